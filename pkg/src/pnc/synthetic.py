"""Random graph generators with known structure.

Each generator returns graphs together with the blocks it planted, so tests
and the theory harness can compare learned partitions against ground truth.
Undirected samples are :class:`Graph` objects; the directed variants used by
the theory harness are dense boolean adjacency matrices over all ``n**2``
ordered pairs (self-pairs included, matching the ``n**2``-slot formulas).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graph import Corpus, Graph

KINDS = ("er", "sbm", "planted")


def triangle() -> Graph:
    return Graph(3, ((0, 1), (0, 2), (1, 2)))


def clique(k: int) -> Graph:
    return Graph(k, tuple((i, j) for i in range(k) for j in range(i + 1, k)))


def path(k: int) -> Graph:
    return Graph(k, tuple((i, i + 1) for i in range(k - 1)))


@dataclass
class SyntheticSpec:
    """What to sample and how many.

    ``kind`` selects the generator:

    * ``er``: ``n`` vertices, each pair independently with ``p_edge``;
    * ``sbm``: consecutive communities of ``sizes``, ``p_in`` within and
      ``p_out`` between them;
    * ``planted``: ``atoms_per_graph`` copies of atoms drawn from ``atoms``
      (weights ``atom_weights``), a fraction ``null_fraction`` of blocks
      replaced by random connected graphs of ``null_size`` vertices that are
      not isomorphic to any atom, and about ``noise_edges`` random cut
      edges per graph.
    """

    kind: str = "er"
    samples: int = 100
    seed: int = 0
    n: int = 20
    p_edge: float = 0.1
    sizes: tuple[int, ...] = (6, 6)
    p_in: float = 0.8
    p_out: float = 0.02
    atoms: list[Graph] = field(default_factory=lambda: [triangle()])
    atom_weights: list[float] | None = None
    atoms_per_graph: int | tuple[int, int] = 10
    noise_edges: float = 2.0
    null_fraction: float = 0.0
    null_size: int | None = None
    shuffle: bool = True

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown generator {self.kind!r}")
        for name in ("p_edge", "p_in", "p_out", "null_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} is not a probability")
        if self.n < 0 or any(s < 1 for s in self.sizes):
            raise ValueError("sizes must be positive")
        if self.samples < 0:
            raise ValueError("negative sample count")
        if self.kind == "planted" and not self.atoms:
            raise ValueError("planted generator needs at least one atom")

    def block_sizes(self) -> list[int]:
        if self.kind == "er":
            return [self.n]
        if self.kind == "sbm":
            return list(self.sizes)
        raise ValueError("planted block sizes depend on the drawn atoms")


@dataclass
class Sample:
    graph: Graph
    blocks: list[tuple[int, ...]]
    labels: list[int] = field(default_factory=list)  # atom index per block, -1 for null blocks


def _pairs_between(a: Sequence[int], b: Sequence[int]):
    for u in a:
        for v in b:
            yield u, v


def _shuffle(g: Graph, blocks, rng: random.Random):
    perm = list(range(g.n))
    rng.shuffle(perm)
    return g.relabel(perm), [tuple(sorted(perm[v] for v in blk)) for blk in blocks]


def _random_null_block(k: int, atoms: list[Graph], rng: random.Random) -> Graph:
    from .canon import canonical_key
    banned = {canonical_key(a) for a in atoms}
    for _ in range(1000):
        # random spanning tree plus extra edges keeps the block connected
        edges = set()
        for v in range(1, k):
            u = rng.randrange(v)
            edges.add((u, v))
        for i in range(k):
            for j in range(i + 1, k):
                if rng.random() < 0.3:
                    edges.add((i, j))
        h = Graph(k, tuple(edges))
        if canonical_key(h) not in banned:
            return h
    raise ValueError(f"could not draw a {k}-vertex block outside the atom set")


def sample_undirected(spec: SyntheticSpec) -> list[Sample]:
    rng = random.Random(spec.seed)
    out = []
    for _ in range(spec.samples):
        if spec.kind in ("er", "sbm"):
            sizes = spec.block_sizes()
            blocks, pos = [], 0
            for k in sizes:
                blocks.append(tuple(range(pos, pos + k)))
                pos += k
            n = pos
            block_of = [i for i, k in enumerate(sizes) for _ in range(k)]
            edges = []
            for u in range(n):
                for v in range(u + 1, n):
                    if spec.kind == "er":
                        p = spec.p_edge
                    else:
                        p = spec.p_in if block_of[u] == block_of[v] else spec.p_out
                    if rng.random() < p:
                        edges.append((u, v))
            g = Graph(n, tuple(edges))
            labels = [-1] * len(blocks)
        else:
            g, blocks, labels = _sample_planted(spec, rng)
        if spec.shuffle:
            g, blocks = _shuffle(g, blocks, rng)
        out.append(Sample(g, blocks, labels))
    return out


def _sample_planted(spec: SyntheticSpec, rng: random.Random):
    count = spec.atoms_per_graph
    if isinstance(count, tuple):
        count = rng.randint(*count)
    weights = spec.atom_weights or [1.0] * len(spec.atoms)
    parts, labels = [], []
    for _ in range(count):
        if spec.null_fraction and rng.random() < spec.null_fraction:
            k = spec.null_size or max(a.n for a in spec.atoms)
            parts.append(_random_null_block(k, spec.atoms, rng))
            labels.append(-1)
        else:
            a = rng.choices(range(len(spec.atoms)), weights)[0]
            parts.append(spec.atoms[a])
            labels.append(a)
    edges, blocks, pos = [], [], 0
    for h in parts:
        edges.extend((u + pos, v + pos) for u, v in h.edges)
        blocks.append(tuple(range(pos, pos + h.n)))
        pos += h.n
    n = pos
    slots = [(u, v) for i in range(len(blocks)) for j in range(i + 1, len(blocks))
             for u, v in _pairs_between(blocks[i], blocks[j])]
    if slots and spec.noise_edges > 0:
        p = min(1.0, spec.noise_edges / len(slots))
        edges.extend(e for e in slots if rng.random() < p)
    return Graph(n, tuple(edges)), blocks, labels


def synthetic_corpus(spec: SyntheticSpec, name: str | None = None) -> Corpus:
    samples = sample_undirected(spec)
    return Corpus([s.graph for s in samples], name=name or f"synthetic-{spec.kind}")


# -- directed samples for the theory harness ---------------------------------

def sample_directed(spec: SyntheticSpec) -> list[tuple[np.ndarray, list[int], list[int]]]:
    """Directed samples as ``(adjacency, block sizes, atom label per block)``.

    Vertices are laid out block by block (no shuffling), so a fixed-size chunk
    partitioner recovers the planted blocks when sizes are equal. Planted
    atoms are symmetric (each undirected edge in both directions).
    """
    rng = np.random.default_rng(spec.seed)
    py = random.Random(spec.seed)
    out = []
    for _ in range(spec.samples):
        if spec.kind == "er":
            adj = rng.random((spec.n, spec.n)) < spec.p_edge
            out.append((adj, [spec.n], [-1]))
        elif spec.kind == "sbm":
            sizes = list(spec.sizes)
            lab = np.repeat(np.arange(len(sizes)), sizes)
            prob = np.where(lab[:, None] == lab[None, :], spec.p_in, spec.p_out)
            adj = rng.random(prob.shape) < prob
            out.append((adj, sizes, [-1] * len(sizes)))
        else:
            g, blocks, labels = _sample_planted(spec, py)
            adj = np.zeros((g.n, g.n), dtype=bool)
            inner = set()
            for blk in blocks:
                inner.update((u, v) for u in blk for v in blk)
            for u, v in g.edges:
                if (u, v) in inner:
                    adj[u, v] = adj[v, u] = True
            # cut noise is directed: each ordered cross-block pair independently
            cross = ~np.zeros((g.n, g.n), dtype=bool)
            for blk in blocks:
                idx = np.array(blk)
                cross[np.ix_(idx, idx)] = False
            slots = int(cross.sum())
            if slots and spec.noise_edges > 0:
                p = min(1.0, spec.noise_edges / slots)
                adj |= cross & (rng.random(adj.shape) < p)
            out.append((adj, [len(b) for b in blocks], labels))
    return out
