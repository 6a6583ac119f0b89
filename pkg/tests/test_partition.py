import pytest

from pnc.graph import Graph
from pnc.partition import (
    PARTITIONERS,
    Partition,
    PartitionError,
    modularity,
    partition_chunks,
    partition_singletons,
    run_partitioner,
    split_to_valid,
)
from pnc.synthetic import SyntheticSpec, clique, sample_undirected


def two_cliques() -> Graph:
    edges = [(i, j) for i in range(5) for j in range(i + 1, 5)]
    edges += [(i + 5, j + 5) for i in range(5) for j in range(i + 1, 5)]
    return Graph(10, tuple(edges + [(4, 5)]))


def test_partition_statistics():
    p = Partition(two_cliques(), ((0, 1, 2, 3, 4), (5, 6, 7, 8, 9)))
    assert p.internal_edges == (10, 10)
    assert p.cut_counts == {(0, 1): 1}
    assert p.cut_edges(1, 0) == [(5, 4)]
    assert p.is_valid()
    assert Partition.from_text(p.graph, p.to_text()) == p


def test_partition_rejects_overlap_and_gaps():
    g = Graph(3, ((0, 1),))
    with pytest.raises(PartitionError):
        Partition(g, ((0, 1), (1, 2)))
    with pytest.raises(PartitionError):
        Partition(g, ((0, 1),))


def test_validate_connectivity_and_size():
    g = Graph(3, ((0, 1),))
    assert not Partition(g, ((0, 2), (1,))).is_valid()
    assert not Partition(clique(4), ((0, 1, 2, 3),)).is_valid(k_max=3)


def test_split_to_valid_repairs():
    g = Graph(6, ((0, 1), (2, 3), (3, 4), (4, 5)))
    p = split_to_valid(g, [[0, 1, 2, 3, 4, 5]], k_max=3)
    assert p.is_valid(k_max=3)


@pytest.mark.parametrize("name", sorted(PARTITIONERS))
def test_partitioners_valid_on_mutag(name, mutag):
    for g in mutag.graphs[:40]:
        p = run_partitioner(name, g, seed=0, k_max=12)
        p.validate(12)


@pytest.mark.parametrize("name", sorted(PARTITIONERS))
def test_partitioners_find_two_cliques(name):
    p = run_partitioner(name, two_cliques())
    assert sorted(p.blocks) == [(0, 1, 2, 3, 4), (5, 6, 7, 8, 9)]


@pytest.mark.parametrize("name", sorted(PARTITIONERS))
def test_partitioners_deterministic(name):
    g = sample_undirected(SyntheticSpec("er", samples=1, seed=9, n=25, p_edge=0.15))[0].graph
    assert run_partitioner(name, g, seed=3) == run_partitioner(name, g, seed=3)


@pytest.mark.parametrize("name", sorted(PARTITIONERS))
def test_partitioners_empty_graph(name):
    assert run_partitioner(name, Graph(0)).num_blocks == 0
    assert run_partitioner(name, Graph(3)).num_blocks == 3


def test_modularity_values():
    g = two_cliques()
    good = modularity(g, [range(5), range(5, 10)])
    assert good > modularity(g, [range(10)])
    assert modularity(g, [range(10)]) == pytest.approx(0.0)


def test_simple_partitions():
    g = two_cliques()
    assert partition_singletons(g).num_blocks == 10
    assert partition_chunks(g, 5).sizes == (5, 5)


def test_unknown_partitioner():
    with pytest.raises(ValueError):
        run_partitioner("nope", Graph(1))
