"""Graph partitions into small connected blocks, and the non-parametric partitioners."""

from __future__ import annotations

import math
import random
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .canon import K_MAX
from .codelen import l_sbm_baseline
from .combinatorics import log2_comb
from .graph import Graph


class PartitionError(ValueError):
    """A partition violates cover, connectivity, size or conservation invariants."""


@dataclass(frozen=True)
class Partition:
    """Blocks ``H_1..H_b`` of a graph plus the derived cut statistics.

    ``cut_counts`` maps ``(i, j)`` with ``i < j`` to the number of edges between
    blocks ``i`` and ``j`` (zero pairs are omitted).
    """

    graph: Graph
    blocks: tuple[tuple[int, ...], ...]
    block_of: tuple[int, ...] = field(init=False, repr=False)
    sizes: tuple[int, ...] = field(init=False, repr=False)
    internal_edges: tuple[int, ...] = field(init=False, repr=False)
    cut_counts: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        blocks = tuple(tuple(b) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        n = self.graph.n
        block_of = [-1] * n
        for i, blk in enumerate(blocks):
            for v in blk:
                if not 0 <= v < n:
                    raise PartitionError(f"vertex {v} out of range")
                if block_of[v] != -1:
                    raise PartitionError(f"vertex {v} in two blocks")
                block_of[v] = i
        if -1 in block_of:
            raise PartitionError(f"vertex {block_of.index(-1)} not covered")
        internal = [0] * len(blocks)
        cuts: dict[tuple[int, int], int] = defaultdict(int)
        for u, v in self.graph.edges:
            bu, bv = block_of[u], block_of[v]
            if bu == bv:
                internal[bu] += 1
            else:
                cuts[(min(bu, bv), max(bu, bv))] += 1
        object.__setattr__(self, "block_of", tuple(block_of))
        object.__setattr__(self, "sizes", tuple(len(b) for b in blocks))
        object.__setattr__(self, "internal_edges", tuple(internal))
        object.__setattr__(self, "cut_counts", dict(cuts))

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    @property
    def total_cut(self) -> int:
        return sum(self.cut_counts.values())

    def block_graph(self, i: int) -> Graph:
        return self.graph.induced(self.blocks[i])

    def cut_edges(self, i: int, j: int) -> list[tuple[int, int]]:
        """Edges between blocks i and j as (vertex in i, vertex in j)."""
        out = []
        for u, v in self.graph.edges:
            bu, bv = self.block_of[u], self.block_of[v]
            if (bu, bv) == (i, j):
                out.append((u, v))
            elif (bu, bv) == (j, i):
                out.append((v, u))
        return out

    def validate(self, k_max: int = K_MAX) -> None:
        for i, blk in enumerate(self.blocks):
            if len(blk) == 0:
                raise PartitionError(f"block {i} is empty")
            if len(blk) > k_max:
                raise PartitionError(f"block {i} has {len(blk)} > K_MAX={k_max} vertices")
            if not self.graph.induced(blk).is_connected():
                raise PartitionError(f"block {i} is not connected")
        if sum(self.internal_edges) + self.total_cut != self.graph.m:
            raise PartitionError("edge conservation violated")

    def is_valid(self, k_max: int = K_MAX) -> bool:
        try:
            self.validate(k_max)
        except PartitionError:
            return False
        return True

    def to_text(self) -> str:
        """Debug format: one line per block, ``index: v v v``."""
        return "".join(f"{i}: {' '.join(map(str, b))}\n" for i, b in enumerate(self.blocks))

    @classmethod
    def from_text(cls, g: Graph, text: str) -> Partition:
        blocks = []
        for line in text.splitlines():
            if line.strip():
                _, _, rest = line.partition(":")
                blocks.append(tuple(int(x) for x in rest.split()))
        return cls(g, tuple(blocks))


def _bfs_prefix(adj, start: int, allowed: set[int], limit: int) -> list[int]:
    seen = {start}
    out = [start]
    queue = deque([start])
    while queue and len(out) < limit:
        u = queue.popleft()
        for w in sorted(adj[u]):
            if w in allowed and w not in seen:
                seen.add(w)
                out.append(w)
                queue.append(w)
                if len(out) == limit:
                    break
    return out


def _components(adj, vertices: Iterable[int]) -> list[list[int]]:
    left = set(vertices)
    comps = []
    while left:
        s = min(left)
        comp = _bfs_prefix(adj, s, left, len(left))
        left.difference_update(comp)
        comps.append(sorted(comp))
    return comps


def split_to_valid(g: Graph, blocks: Iterable[Iterable[int]], k_max: int = K_MAX) -> Partition:
    """Make any vertex partition valid: split into components, then chunk big components.

    Oversized components are cut into BFS prefixes of at most ``k_max`` vertices
    (a BFS prefix is always connected); the remainder is re-split into components.
    """
    adj = g.adjacency()
    out = []
    for blk in blocks:
        pending = _components(adj, blk)
        while pending:
            comp = pending.pop(0)
            if len(comp) <= k_max:
                out.append(tuple(comp))
                continue
            chunk = _bfs_prefix(adj, comp[0], set(comp), k_max)
            out.append(tuple(sorted(chunk)))
            rest = set(comp) - set(chunk)
            pending = _components(adj, rest) + pending
    return Partition(g, tuple(out))


def partition_singletons(g: Graph) -> Partition:
    return Partition(g, tuple((v,) for v in range(g.n)))


def partition_chunks(g: Graph, k: int) -> Partition:
    """Consecutive vertex-id chunks of size ``k``; no connectivity guarantee."""
    return Partition(g, tuple(tuple(range(i, min(i + k, g.n))) for i in range(0, g.n, k)))


def _relabel_blocks(labels: Sequence[int]) -> list[list[int]]:
    groups: dict[int, list[int]] = {}
    for v, lab in enumerate(labels):
        groups.setdefault(lab, []).append(v)
    return [groups[k] for k in sorted(groups, key=lambda lab: groups[lab][0])]


def _greedy_coloring(adj) -> list[list[int]]:
    color = [-1] * len(adj)
    for v in range(len(adj)):
        used = {color[w] for w in adj[v]}
        c = 0
        while c in used:
            c += 1
        color[v] = c
    classes: dict[int, list[int]] = defaultdict(list)
    for v, c in enumerate(color):
        classes[c].append(v)
    return [classes[c] for c in sorted(classes)]


def _top_labels(adj, labels, v) -> list[int]:
    freq: dict[int, int] = defaultdict(int)
    for w in adj[v]:
        freq[labels[w]] += 1
    top = max(freq.values())
    return [lab for lab, c in freq.items() if c == top]


def partition_label_prop(g: Graph, seed: int = 0, k_max: int = K_MAX, max_iter: int = 100) -> Partition:
    """Semi-synchronous label propagation.

    Vertices are grouped by a greedy colouring and each colour class is updated
    at once, which avoids the oscillations of fully synchronous updates and the
    order dependence of asynchronous ones. A vertex keeps its label when it is
    among the most frequent neighbour labels, otherwise it takes the smallest
    of them. The result does not depend on ``seed``; the argument is kept so
    all partitioners share one signature.
    """
    adj = g.adjacency()
    labels = list(range(g.n))
    classes = _greedy_coloring(adj)
    for _ in range(max_iter):
        done = True
        for cls in classes:
            for v in cls:
                if not adj[v]:
                    continue
                top = _top_labels(adj, labels, v)
                if labels[v] not in top:
                    labels[v] = min(top)
                    done = False
        if done:
            break
    return split_to_valid(g, _relabel_blocks(labels), k_max)


def _louvain_level(nodes: int, weights: dict, self_loops: list[float], rng: random.Random) -> list[int]:
    """One local-move phase on a weighted graph; returns a community id per node."""
    nbrs: list[dict[int, float]] = [dict() for _ in range(nodes)]
    for (u, v), w in weights.items():
        nbrs[u][v] = nbrs[u].get(v, 0.0) + w
        nbrs[v][u] = nbrs[v].get(u, 0.0) + w
    degree = [sum(nbrs[u].values()) + 2 * self_loops[u] for u in range(nodes)]
    two_m = sum(degree)
    comm = list(range(nodes))
    tot = degree[:]
    order = list(range(nodes))
    rng.shuffle(order)
    improved = True
    while improved:
        improved = False
        for u in order:
            cu = comm[u]
            links: dict[int, float] = defaultdict(float)
            for v, w in nbrs[u].items():
                links[comm[v]] += w
            tot[cu] -= degree[u]
            best_c = cu
            best_gain = links.get(cu, 0.0) - tot[cu] * degree[u] / two_m
            for c in sorted(links):
                gain = links[c] - tot[c] * degree[u] / two_m
                if gain > best_gain + 1e-12 or (abs(gain - best_gain) <= 1e-12 and c < best_c):
                    best_gain, best_c = gain, c
            tot[best_c] += degree[u]
            if best_c != cu:
                comm[u] = best_c
                improved = True
    return comm


def partition_greedy_modularity(g: Graph, seed: int = 0, k_max: int = K_MAX) -> Partition:
    """Louvain: local moves followed by aggregation until modularity stops improving."""
    if g.n == 0:
        return Partition(g, ())
    if g.m == 0:
        return split_to_valid(g, [[v] for v in range(g.n)], k_max)
    rng = random.Random(seed)
    members = [[v] for v in range(g.n)]
    weights = {(u, v): 1.0 for u, v in g.edges}
    self_loops = [0.0] * g.n
    while True:
        comm = _louvain_level(len(members), weights, self_loops, rng)
        ids = {c: i for i, c in enumerate(sorted(set(comm)))}
        if len(ids) == len(members):
            break
        new_members: list[list[int]] = [[] for _ in ids]
        for node, c in enumerate(comm):
            new_members[ids[c]].extend(members[node])
        new_weights: dict[tuple[int, int], float] = defaultdict(float)
        new_loops = [0.0] * len(ids)
        for node in range(len(members)):
            new_loops[ids[comm[node]]] += self_loops[node]
        for (u, v), w in weights.items():
            cu, cv = ids[comm[u]], ids[comm[v]]
            if cu == cv:
                new_loops[cu] += w
            else:
                new_weights[(min(cu, cv), max(cu, cv))] += w
        members, weights, self_loops = new_members, dict(new_weights), new_loops
    blocks = sorted((sorted(m) for m in members), key=lambda b: b[0])
    return split_to_valid(g, blocks, k_max)


def modularity(g: Graph, blocks: Iterable[Iterable[int]]) -> float:
    if g.m == 0:
        return 0.0
    deg = g.degrees()
    block_of = {}
    for i, blk in enumerate(blocks):
        for v in blk:
            block_of[v] = i
    inside = defaultdict(int)
    dsum = defaultdict(int)
    for u, v in g.edges:
        if block_of[u] == block_of[v]:
            inside[block_of[u]] += 1
    for v in range(g.n):
        dsum[block_of[v]] += deg[v]
    m = g.m
    return sum(inside[c] / m - (dsum[c] / (2 * m)) ** 2 for c in dsum)


class _MergeState:
    """Incremental bookkeeping for agglomerative merging under the SBM score."""

    def __init__(self, g: Graph):
        self.g = g
        self.members = {v: [v] for v in range(g.n)}
        self.k = {v: 1 for v in range(g.n)}
        self.mi = {v: 0 for v in range(g.n)}
        self.cut: dict[int, dict[int, int]] = {v: defaultdict(int) for v in range(g.n)}
        for u, v in g.edges:
            self.cut[u][v] += 1
            self.cut[v][u] += 1

    def global_delta(self) -> float:
        n, m, b = self.g.n, self.g.m, len(self.members)
        return (log2_comb(n - 1, b - 2) - log2_comb(n - 1, b - 1)
                + log2_comb((b - 1) * b // 2 + m - 1, m) - log2_comb(b * (b + 1) // 2 + m - 1, m))

    def pair_delta(self, i: int, j: int) -> float:
        k, mi, cut = self.k, self.mi, self.cut
        kij = k[i] + k[j]
        mij = cut[i].get(j, 0)
        d = (log2_comb(kij * (kij - 1) // 2, mi[i] + mi[j] + mij)
             - log2_comb(k[i] * (k[i] - 1) // 2, mi[i]) - log2_comb(k[j] * (k[j] - 1) // 2, mi[j])
             - log2_comb(k[i] * k[j], mij))
        for l in set(cut[i]) | set(cut[j]):
            if l in (i, j):
                continue
            a, c = cut[i].get(l, 0), cut[j].get(l, 0)
            d += log2_comb(kij * k[l], a + c) - log2_comb(k[i] * k[l], a) - log2_comb(k[j] * k[l], c)
        return d

    def merge(self, i: int, j: int) -> None:
        self.members[i].extend(self.members.pop(j))
        self.mi[i] += self.mi.pop(j) + self.cut[i].pop(j, 0)
        self.k[i] += self.k.pop(j)
        cj = self.cut.pop(j)
        cj.pop(i, None)
        for l, c in cj.items():
            self.cut[i][l] = self.cut[i].get(l, 0) + c
            self.cut[l][i] = self.cut[l].get(i, 0) + c
            del self.cut[l][j]


def partition_mdl_merge(g: Graph, k_max: int = K_MAX) -> Partition:
    """Greedy agglomeration of adjacent blocks scored by the SBM baseline length.

    At each step the adjacent pair whose merge lowers the score most (or raises
    it least) is merged; the lowest-scoring partition met along the way is
    returned. Stopping at the first non-improving step would leave e.g. a set of
    disjoint triangles as singletons, since merging one edge costs more than it
    saves. Merged blocks never exceed ``k_max`` vertices.
    """
    if g.n == 0:
        return Partition(g, ())
    st = _MergeState(g)
    score = l_sbm_baseline(partition_singletons(g), g.n)
    best_score = score
    best_blocks = [list(m) for m in st.members.values()]
    while len(st.members) > 1:
        glob = st.global_delta()
        best = None
        for i in sorted(st.members):
            for j in sorted(st.cut[i]):
                if j <= i or st.k[i] + st.k[j] > k_max:
                    continue
                d = glob + st.pair_delta(i, j)
                if best is None or d < best[0] - 1e-12:
                    best = (d, i, j)
        if best is None:
            break
        st.merge(best[1], best[2])
        score += best[0]
        if score < best_score - 1e-9:
            best_score = score
            best_blocks = [list(m) for m in st.members.values()]
    blocks = sorted((sorted(m) for m in best_blocks), key=lambda b: b[0])
    return split_to_valid(g, blocks, k_max)


def sbm_score(p: Partition, n_max: int) -> float:
    return l_sbm_baseline(p, n_max)


PARTITIONERS = {
    "labelprop": lambda g, seed=0, k_max=K_MAX: partition_label_prop(g, seed, k_max),
    "modularity": lambda g, seed=0, k_max=K_MAX: partition_greedy_modularity(g, seed, k_max),
    "mdlmerge": lambda g, seed=0, k_max=K_MAX: partition_mdl_merge(g, k_max),
}


def run_partitioner(name: str, g: Graph, seed: int = 0, k_max: int = K_MAX) -> Partition:
    try:
        fn = PARTITIONERS[name]
    except KeyError:
        raise ValueError(f"unknown partitioner {name!r}; choose from {sorted(PARTITIONERS)}") from None
    return fn(g, seed=seed, k_max=k_max)
