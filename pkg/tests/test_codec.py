import math

import pytest

from pnc.canon import canonical_key
from pnc.codec import ArchiveError, compress_corpus, decompress_corpus, read_header, verify_roundtrip
from pnc.dictionary import fit_closed_form
from pnc.graph import Graph
from pnc.partition import Partition, run_partitioner
from pnc.synthetic import SyntheticSpec, sample_undirected, triangle
from pnc.trainer import TrainConfig, train


def partitions_for(graphs, name="modularity"):
    return [run_partitioner(name, g, seed=0) for g in graphs]


def roundtrip(graphs, model, parts):
    res = compress_corpus(graphs, model, parts)
    dec = decompress_corpus(res.data)
    return res, dec, verify_roundtrip(res, dec)


def assert_parity(res):
    for rec in res.records:
        assert rec.realized_bits >= rec.ideal_bits - 1e-9
        assert rec.realized_bits <= rec.ideal_bits * 1.01 + 32


def test_mutag_roundtrip(mutag, mutag_trained):
    model = mutag_trained.model
    graphs = mutag.graphs
    res, dec, ok = roundtrip(graphs, model, partitions_for(graphs))
    assert all(ok) and len(ok) == 188
    assert_parity(res)
    # decoded graphs are relabelled copies of the inputs
    for g, h in zip(graphs, dec.corpus.graphs):
        assert (g.n, g.m) == (h.n, h.m)
    # whole archive close to the ideal two-part length
    assert 8 * res.body_bytes <= res.report.total * 1.01 + 128


def test_decoded_model_matches(mutag, mutag_trained):
    model = mutag_trained.model
    res = compress_corpus(mutag.graphs[:5], model, partitions_for(mutag.graphs[:5]))
    dec = decompress_corpus(res.data)
    assert dec.model.atoms == model.atoms
    assert list(dec.model.atom_logits) == list(model.atom_logits)
    assert dec.model.delta_logit == model.delta_logit
    info, _ = read_header(res.data)
    assert info["k_max"] == model.k_max


def test_cut_section_example():
    g = Graph(4, ((0, 1), (2, 3), (1, 2)))
    p = Partition(g, ((0, 1), (2, 3)))
    model = fit_closed_form([p], [canonical_key(Graph(2, ((0, 1),)))])
    res = compress_corpus([g], model, [p])
    rep = model.graph_report(p)
    assert rep.l_cuts == pytest.approx(4.3219, abs=1e-4)
    assert res.records[0].realized_bits <= rep.data_bits + 16
    assert all(verify_roundtrip(res, decompress_corpus(res.data)))


def test_empty_corpus_and_empty_graphs():
    model = fit_closed_form([Partition(triangle(), ((0, 1, 2),))], [canonical_key(triangle())])
    res, dec, ok = roundtrip([], model, [])
    assert ok == [] and len(dec.corpus) == 0
    graphs = [Graph(0), Graph(3), triangle()]
    res, dec, ok = roundtrip(graphs, model, partitions_for(graphs))
    assert all(ok)
    assert [h.n for h in dec.corpus.graphs] == [0, 3, 3]


def test_escape_path_for_unseen_block_counts():
    tri = triangle()
    model = fit_closed_form([Partition(tri, ((0, 1, 2),))], [canonical_key(tri)])
    assert model.b_lo == model.b_hi == 1
    big = sample_undirected(SyntheticSpec("planted", samples=3, seed=2, atoms=[tri], atoms_per_graph=40,
                                          noise_edges=5.0))
    graphs = [s.graph for s in big]
    parts = [Partition(s.graph, tuple(s.blocks)) for s in big]
    res, dec, ok = roundtrip(graphs, model, parts)
    assert all(ok)
    assert_parity(res)


def test_attributed_roundtrip(mutag):
    res_train = train(mutag, TrainConfig(epochs=20, seed=0, attributed=True), "modularity")
    model = res_train.model
    assert model.attributed
    graphs = mutag.graphs[:60]
    res, dec, ok = roundtrip(graphs, model, partitions_for(graphs))
    assert all(ok)
    assert_parity(res)
    for h in dec.corpus.graphs:
        assert h.vertex_attrs is not None and h.edge_attrs is not None
    # attribute multisets survive the relabelling
    for g, h in zip(graphs, dec.corpus.graphs):
        assert sorted(g.vertex_attrs) == sorted(h.vertex_attrs)
        assert sorted(g.edge_attrs.values()) == sorted(h.edge_attrs.values())


def test_corruption_detected(mutag, mutag_trained):
    graphs = mutag.graphs[:20]
    res = compress_corpus(graphs, mutag_trained.model, partitions_for(graphs))
    data = bytearray(res.data)
    for pos in (0, 5, len(data) // 2, len(data) - 1):
        bad = bytearray(data)
        bad[pos] ^= 0x10
        with pytest.raises(ArchiveError):
            decompress_corpus(bytes(bad))
    with pytest.raises(ArchiveError):
        decompress_corpus(bytes(data[: len(data) - 9]))
    with pytest.raises(ArchiveError):
        decompress_corpus(b"PNC")


def test_partition_must_match_graph(mutag, mutag_trained):
    g, h = mutag.graphs[0], mutag.graphs[1]
    with pytest.raises(ValueError):
        compress_corpus([g], mutag_trained.model, [run_partitioner("modularity", h)])


def test_header_is_small(mutag_trained):
    res = compress_corpus([], mutag_trained.model, [])
    n_params = mutag_trained.model.param_count
    # fixed fields plus two bytes per parameter
    assert res.header_bytes <= 32 + 2 * n_params
    assert math.isclose(res.report.l_model, 16 * n_params)
