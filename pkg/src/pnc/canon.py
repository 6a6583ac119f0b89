"""Canonical forms and hashing for small graphs.

The canonical labelling is the vertex order whose packed adjacency bits are
lexicographically smallest over *all* permutations. Bits are packed column by
column over the upper triangle, i.e. pairs in the order
(0,1), (0,2), (1,2), (0,3), (1,3), (2,3), ... with the first pair in the most
significant position. With this packing, column ``j`` only depends on the first
``j + 1`` vertices of the order, so the minimum can be found one position at a
time: every prefix that ties for the smallest column so far is kept, the rest
are dropped. Two cheap prunings keep the frontier small:

* twins (``N(u) - {w} == N(w) - {u}``) are interchangeable, so only one of
  them is tried at each position;
* prefixes that leave identical signatures on the same remaining vertex set
  have identical futures and are merged.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass
from functools import lru_cache

from .graph import Graph

K_MAX = 12


class CanonError(ValueError):
    """Input outside what canonicalization accepts (too large or disconnected)."""


@dataclass(frozen=True, order=True)
class CanonicalCode:
    """Isomorphism-class key of a small graph.

    ``bitmask`` holds the ``k(k-1)/2`` upper-triangular bits of the canonical
    labelling, column-major, most significant first. ``attr_signature`` is
    ``(vertex attrs, edge attrs)`` in canonical order, or None.
    """

    k: int
    bitmask: int
    attr_signature: tuple | None = None

    @property
    def m(self) -> int:
        return bin(self.bitmask).count("1")

    def edges(self) -> list[tuple[int, int]]:
        """Edges of the canonical labelling, in packing order."""
        return [pair for pair, bit in zip(pair_order(self.k), unpack_bits(self.bitmask, self.k)) if bit]

    def to_graph(self) -> Graph:
        edges = self.edges()
        vattrs = eattrs = None
        if self.attr_signature is not None:
            va, ea = self.attr_signature
            vattrs = va
            if ea is not None:
                eattrs = dict(zip(edges, ea))
        return Graph(self.k, tuple(edges), vattrs, eattrs)


@lru_cache(maxsize=None)
def pair_order(k: int) -> tuple[tuple[int, int], ...]:
    return tuple((i, j) for j in range(k) for i in range(j))


def pack_bits(g: Graph, order) -> int:
    """Packed adjacency of ``g`` with vertex ``order[i]`` placed at position ``i``."""
    adj = g.adjacency_bits()
    code = 0
    for j in range(g.n):
        vj = order[j]
        for i in range(j):
            code = (code << 1) | ((adj[order[i]] >> vj) & 1)
    return code


def unpack_bits(code: int, k: int) -> list[int]:
    total = k * (k - 1) // 2
    return [(code >> (total - 1 - t)) & 1 for t in range(total)]


def _twins(adj: list[int], u: int, w: int) -> bool:
    mask = ~((1 << u) | (1 << w))
    return (adj[u] & mask) == (adj[w] & mask)


def _search(g: Graph) -> list[int]:
    """Vertex order achieving the lexicographically smallest column sequence."""
    n = g.n
    if n == 0:
        return []
    adj = g.adjacency_bits()
    va = g.vertex_attrs
    ea = g.edge_attrs

    def col_key(v, sig, esig):
        if va is None and ea is None:
            return sig
        return (va[v] if va is not None else 0, sig, esig if ea is not None else ())

    def twins(u, w):
        if not _twins(adj, u, w):
            return False
        if va is not None and va[u] != va[w]:
            return False
        if ea is not None:
            for x in range(n):
                if x != u and x != w and (adj[u] >> x) & 1:
                    if ea[(min(u, x), max(u, x))] != ea[(min(w, x), max(w, x))]:
                        return False
        return True

    # a state is (order, remaining bitmask, sig list, edge-attr sig list)
    states = [([], (1 << n) - 1, [0] * n, [()] * n)]
    for depth in range(n):
        best = None
        children = []
        for order, rem, sig, esig in states:
            cands = []
            r = rem
            while r:
                v = (r & -r).bit_length() - 1
                r &= r - 1
                key = col_key(v, sig[v], esig[v])
                if best is None or key < best:
                    best = key
                    children = []
                    cands = [v]
                elif key == best:
                    cands.append(v)
            kept: list[int] = []
            for v in cands:
                if not any(twins(v, w) for w in kept):
                    kept.append(v)
            children.extend((order, rem, sig, esig, v) for v in kept)
        nxt = {}
        for order, rem, sig, esig, v in children:
            rem2 = rem & ~(1 << v)
            nb = adj[v]
            sig2 = [(s << 1) | ((nb >> x) & 1) for x, s in enumerate(sig)]
            if ea is not None:
                esig2 = [
                    e + ((ea[(min(v, x), max(v, x))] + 1) if (nb >> x) & 1 else 0,)
                    for x, e in enumerate(esig)
                ]
            else:
                esig2 = esig
            key = (rem2, tuple(sig2[x] for x in range(n) if (rem2 >> x) & 1),
                   tuple(esig2[x] for x in range(n) if (rem2 >> x) & 1))
            if key not in nxt:
                nxt[key] = (order + [v], rem2, sig2, esig2)
        states = list(nxt.values())
    return states[0][0]


@lru_cache(maxsize=1 << 16)
def _canonical(g: Graph) -> tuple[CanonicalCode, tuple[int, ...]]:
    order = _search(g)
    bits = pack_bits(g, order)
    sig = None
    if g.attributed:
        vs = tuple(g.vertex_attrs[v] for v in order) if g.vertex_attrs is not None else None
        es = None
        if g.edge_attrs is not None:
            adj = g.adjacency_bits()
            es = tuple(
                g.edge_attrs[(min(order[i], order[j]), max(order[i], order[j]))]
                for i, j in pair_order(g.n)
                if (adj[order[i]] >> order[j]) & 1
            )
        sig = (vs, es)
    return CanonicalCode(g.n, bits, sig), tuple(order)


def canonical_key(g: Graph) -> CanonicalCode:
    """Canonical code of any graph (connected or not, any size the search can handle)."""
    return _canonical(g)[0]


def canonical_order(g: Graph) -> tuple[int, ...]:
    """``order[i]`` is the original vertex placed at canonical position ``i``."""
    return _canonical(g)[1]


def canonical_form(g: Graph, k_max: int = K_MAX) -> tuple[CanonicalCode, tuple[int, ...]]:
    """Canonical code and canonical vertex order of a connected graph with at most ``k_max`` vertices."""
    if g.n > k_max:
        raise CanonError(f"graph has {g.n} vertices, more than K_MAX={k_max}")
    if not g.is_connected():
        raise CanonError("canonical_form expects a connected graph")
    return _canonical(g)


def wl_hash(g: Graph, rounds: int = 3) -> str:
    """1-WL colour-refinement digest. Equal for isomorphic graphs; not a proof of isomorphism."""
    if rounds < 1:
        raise ValueError("rounds must be positive")
    if g.n == 0:
        return hashlib.blake2b(b"pnc-empty-graph", digest_size=16).hexdigest()
    adj = g.adjacency()
    va = g.vertex_attrs or (0,) * g.n
    ea = g.edge_attrs
    colors = [hashlib.blake2b(f"v{va[v]}".encode(), digest_size=16).hexdigest() for v in range(g.n)]
    for _ in range(rounds):
        nxt = []
        for v in range(g.n):
            parts = []
            for w in adj[v]:
                lab = ea[(min(v, w), max(v, w))] if ea is not None else 0
                parts.append(f"{lab}:{colors[w]}")
            msg = colors[v] + "|" + ",".join(sorted(parts))
            nxt.append(hashlib.blake2b(msg.encode(), digest_size=16).hexdigest())
        colors = nxt
    summary = f"{g.n};{g.m};" + ",".join(sorted(colors))
    return hashlib.blake2b(summary.encode(), digest_size=16).hexdigest()


def automorphism_count(g: Graph) -> int:
    """Number of automorphisms by brute force over all permutations (small graphs only)."""
    edges = set(g.edges)
    va = g.vertex_attrs
    count = 0
    for perm in itertools.permutations(range(g.n)):
        if va is not None and any(va[perm[v]] != va[v] for v in range(g.n)):
            continue
        if all((min(perm[u], perm[v]), max(perm[u], perm[v])) in edges for u, v in edges):
            if g.edge_attrs is None or all(
                g.edge_attrs[(min(perm[u], perm[v]), max(perm[u], perm[v]))] == a
                for (u, v), a in g.edge_attrs.items()
            ):
                count += 1
    return count


def is_rigid(g: Graph) -> bool:
    return automorphism_count(g) == 1
