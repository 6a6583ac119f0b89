"""Undirected simple graphs and graph corpora."""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence


class GraphError(ValueError):
    """Raised when a graph violates its structural invariants."""


def _edge(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Graph:
    """Immutable undirected simple graph on vertices ``0..n-1``.

    Edges are stored as a sorted tuple of ``(u, v)`` pairs with ``u < v``.
    Vertex attributes are a tuple of category ids (length ``n``); edge
    attributes map each edge to a category id.
    """

    n: int
    edges: tuple[tuple[int, int], ...] = ()
    vertex_attrs: tuple[int, ...] | None = None
    edge_attrs: dict[tuple[int, int], int] | None = field(default=None, compare=True, hash=False)

    def __post_init__(self) -> None:
        if self.n < 0:
            raise GraphError("negative vertex count")
        norm = []
        for u, v in self.edges:
            if u == v:
                raise GraphError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError(f"edge ({u}, {v}) out of range for n={self.n}")
            norm.append(_edge(u, v))
        norm.sort()
        for a, b in zip(norm, norm[1:]):
            if a == b:
                raise GraphError(f"duplicate edge {a}")
        object.__setattr__(self, "edges", tuple(norm))
        if self.vertex_attrs is not None:
            va = tuple(self.vertex_attrs)
            if len(va) != self.n:
                raise GraphError("vertex_attrs length differs from n")
            object.__setattr__(self, "vertex_attrs", va)
        if self.edge_attrs is not None:
            ea = {_edge(u, v): a for (u, v), a in self.edge_attrs.items()}
            if set(ea) != set(norm):
                raise GraphError("edge_attrs keys differ from the edge set")
            object.__setattr__(self, "edge_attrs", ea)

    def __hash__(self) -> int:
        ea = None if self.edge_attrs is None else tuple(sorted(self.edge_attrs.items()))
        return hash((self.n, self.edges, self.vertex_attrs, ea))

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def attributed(self) -> bool:
        return self.vertex_attrs is not None or self.edge_attrs is not None

    def adjacency(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj

    def adjacency_bits(self) -> list[int]:
        """Neighbourhoods as integer bitmasks."""
        bits = [0] * self.n
        for u, v in self.edges:
            bits[u] |= 1 << v
            bits[v] |= 1 << u
        return bits

    def degrees(self) -> list[int]:
        deg = [0] * self.n
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def induced(self, vertices: Sequence[int]) -> Graph:
        """Subgraph induced by ``vertices``, relabelled by position in the sequence."""
        pos = {v: i for i, v in enumerate(vertices)}
        edges = []
        eattrs = {} if self.edge_attrs is not None else None
        for u, v in self.edges:
            if u in pos and v in pos:
                e = _edge(pos[u], pos[v])
                edges.append(e)
                if eattrs is not None:
                    eattrs[e] = self.edge_attrs[(u, v)]
        vattrs = None
        if self.vertex_attrs is not None:
            vattrs = tuple(self.vertex_attrs[v] for v in vertices)
        return Graph(len(vertices), tuple(edges), vattrs, eattrs)

    def relabel(self, perm: Sequence[int]) -> Graph:
        """Return the graph with vertex ``v`` renamed to ``perm[v]``."""
        edges = [_edge(perm[u], perm[v]) for u, v in self.edges]
        vattrs = None
        if self.vertex_attrs is not None:
            va = [0] * self.n
            for v, a in enumerate(self.vertex_attrs):
                va[perm[v]] = a
            vattrs = tuple(va)
        eattrs = None
        if self.edge_attrs is not None:
            eattrs = {_edge(perm[u], perm[v]): a for (u, v), a in self.edge_attrs.items()}
        return Graph(self.n, tuple(edges), vattrs, eattrs)

    def components(self) -> list[list[int]]:
        """Connected components as sorted vertex lists, ordered by smallest vertex."""
        adj = self.adjacency()
        seen = [False] * self.n
        comps = []
        for s in range(self.n):
            if seen[s]:
                continue
            seen[s] = True
            comp = [s]
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for w in adj[u]:
                    if not seen[w]:
                        seen[w] = True
                        comp.append(w)
                        queue.append(w)
            comps.append(sorted(comp))
        return comps

    def is_connected(self) -> bool:
        return self.n <= 1 or len(self.components()) == 1


def random_relabel(g: Graph, rng: random.Random) -> Graph:
    perm = list(range(g.n))
    rng.shuffle(perm)
    return g.relabel(perm)


def from_edges(n: int, edges: Iterable[tuple[int, int]]) -> Graph:
    return Graph(n, tuple(edges))


SPLITS = ("train", "test")


@dataclass
class Corpus:
    """A named list of graphs with a train/test assignment per graph.

    ``vertex_labels`` / ``edge_labels`` map dense attribute ids back to the
    raw label values found in the source files.
    """

    graphs: list[Graph]
    name: str = "corpus"
    split: list[str] | None = None
    vertex_labels: list[int] | None = None
    edge_labels: list[int] | None = None

    def __post_init__(self) -> None:
        if self.split is None:
            self.split = default_split(len(self.graphs))
        if len(self.split) != len(self.graphs):
            raise GraphError("split must cover every graph exactly once")
        bad = set(self.split) - set(SPLITS)
        if bad:
            raise GraphError(f"unknown split names {sorted(bad)}")

    def __len__(self) -> int:
        return len(self.graphs)

    def subset(self, which: str) -> list[Graph]:
        if which == "all":
            return list(self.graphs)
        return [g for g, s in zip(self.graphs, self.split) if s == which]

    def indices(self, which: str) -> list[int]:
        if which == "all":
            return list(range(len(self.graphs)))
        return [i for i, s in enumerate(self.split) if s == which]

    @property
    def num_edges(self) -> int:
        return sum(g.m for g in self.graphs)

    @property
    def attr_domains(self) -> tuple[int, int]:
        """Sizes of the vertex and edge attribute alphabets (0 when absent)."""
        av = len(self.vertex_labels) if self.vertex_labels else 0
        ae = len(self.edge_labels) if self.edge_labels else 0
        # corpora built in memory carry dense ids without a label table
        for g in self.graphs:
            if g.vertex_attrs:
                av = max(av, max(g.vertex_attrs) + 1)
            if g.edge_attrs:
                ae = max(ae, max(g.edge_attrs.values()) + 1)
        return av, ae


def default_split(count: int, train_fraction: float = 0.9, seed: int = 0) -> list[str]:
    """Random 90/10 train/test split, reproducible from ``seed``."""
    order = list(range(count))
    random.Random(seed).shuffle(order)
    n_train = round(train_fraction * count) if count > 1 else count
    split = ["test"] * count
    for i in order[:n_train]:
        split[i] = "train"
    return split
