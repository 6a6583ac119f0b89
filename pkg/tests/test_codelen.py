import math

import numpy as np
import pytest

from pnc.canon import canonical_key
from pnc.codelen import (
    CodeLenReport,
    DomainError,
    l_attribute_counts,
    l_cuts,
    l_cuts_counts,
    l_dictionary,
    l_edge_list,
    l_model_params,
    l_null_graph,
    l_sbm_baseline,
    l_uniform_graph,
    null_model_rows,
)
from pnc.dictionary import fit_closed_form
from pnc.graph import Graph
from pnc.partition import Partition
from pnc.synthetic import SyntheticSpec, sample_undirected, triangle
from pnc.theory import l_baselines_iso


def test_null_graph_example():
    assert l_null_graph(5, 4, 5) == pytest.approx(13.7586, abs=1e-4)
    expected = math.log2(6) + math.log2(11) + math.log2(math.comb(10, 4))
    assert l_null_graph(5, 4, 5) == pytest.approx(expected, abs=1e-12)


def test_null_graph_domain():
    with pytest.raises(DomainError):
        l_null_graph(6, 1, 5)
    with pytest.raises(DomainError):
        l_null_graph(3, 4, 5)


def test_uniform_and_edge_list_positive():
    assert l_uniform_graph(5, 5) > l_null_graph(5, 4, 5) - 10
    assert l_edge_list(5, 4, 5) > 0


def test_cut_example():
    # two 2-vertex blocks, one cut edge
    assert l_cuts_counts([2, 2], {(0, 1): 1}) == pytest.approx(4.3219, abs=1e-4)
    g = Graph(4, ((0, 1), (2, 3), (1, 2)))
    p = Partition(g, ((0, 1), (2, 3)))
    assert l_cuts(p) == pytest.approx(math.log2(5) + 2, abs=1e-12)


def test_cut_single_block_is_free():
    assert l_cuts_counts([4], {}) == 0.0


def test_attribute_example():
    assert l_attribute_counts(4, 3, 4, 2) == pytest.approx(11.0)


def test_dictionary_cost_examples():
    tri = canonical_key(triangle())
    hard = l_dictionary([(tri.k, tri.m)], 12)
    assert hard == pytest.approx(math.log2(13) + math.log2(4), abs=1e-12)
    assert hard == pytest.approx(5.7004, abs=1e-4)
    assert l_dictionary([(3, 3)], 12, weights=[0.5]) == pytest.approx(2.8502, abs=1e-4)


def test_model_param_bits():
    assert l_model_params(20, 10) == 16 * 31


def test_iso_baseline_example():
    unif_s, _ = l_baselines_iso(30, 100)
    assert unif_s == pytest.approx(900 - 30 * math.log2(30), abs=1e-9)
    assert unif_s == pytest.approx(752.81, abs=0.02)


def test_planted_triangles_have_zero_dictionary_cost():
    spec = SyntheticSpec("planted", samples=10, seed=3, atoms=[triangle()], atoms_per_graph=(3, 6),
                         noise_edges=0.0)
    samples = sample_undirected(spec)
    parts = [Partition(s.graph, tuple(s.blocks)) for s in samples]
    model = fit_closed_form(parts, [canonical_key(triangle())])
    for p in parts:
        rep = model.graph_report(p)
        assert rep.l_dict_subgraphs == pytest.approx(0.0, abs=1e-9)
        assert rep.l_null_subgraphs == 0.0


def test_sbm_baseline_finite():
    g = Graph(6, ((0, 1), (1, 2), (3, 4), (4, 5), (2, 3)))
    p = Partition(g, ((0, 1, 2), (3, 4, 5)))
    assert np.isfinite(l_sbm_baseline(p, 6))


def test_report_total_and_bpe():
    r = CodeLenReport(l_counts=1.0, l_dict_subgraphs=2.0, l_null_subgraphs=3.0, l_cuts=4.0,
                      edges=5, graphs=1)
    r.l_model = 16.0
    assert r.data_bits == pytest.approx(10.0)
    assert r.total == pytest.approx(26.0)
    assert r.bpe == pytest.approx(26.0 / 5)
    merged = r + r
    assert merged.data_bits == pytest.approx(20.0)
    back = CodeLenReport.from_stats_lines(r.stats_lines())
    assert back.total == pytest.approx(r.total)


def test_mutag_null_rows(mutag):
    rows = {r["method"]: r["data_bpe"] for r in null_model_rows(mutag.graphs, "MUTAG")}
    assert rows["erdos-renyi"] == pytest.approx(4.78, abs=0.05)
    assert rows["uniform"] == pytest.approx(8.44, abs=0.10)
    assert rows["edge-list"] == pytest.approx(7.97, abs=0.10)
