"""Exact binomials, their logarithms, and lexicographic ranking of combinations."""

from __future__ import annotations

import math
from functools import lru_cache


def log2_comb(n: int, k: int) -> float:
    """log2 C(n, k) from the exact integer; -inf outside the support."""
    if k < 0 or k > n:
        return -math.inf
    return math.log2(math.comb(n, k))


def log2_int(x: int) -> float:
    return math.log2(x) if x > 0 else -math.inf


@lru_cache(maxsize=1 << 14)
def _comb(n: int, k: int) -> int:
    return math.comb(n, k) if 0 <= k <= n else 0


def rank_combination(n: int, chosen) -> int:
    """Lexicographic rank of a strictly increasing index set drawn from ``range(n)``.

    Uses the complement identity
    ``rank = C(n, M) - 1 - sum_i C(n - 1 - c_i, M - i)``.
    """
    chosen = list(chosen)
    mcount = len(chosen)
    prev = -1
    for c in chosen:
        if not (prev < c < n):
            raise ValueError(f"indices must be strictly increasing and < {n}: {chosen}")
        prev = c
    total = _comb(n, mcount)
    acc = 0
    for i, c in enumerate(chosen):
        acc += _comb(n - 1 - c, mcount - i)
    return total - 1 - acc


def unrank_combination(n: int, mcount: int, rank: int) -> list[int]:
    """Inverse of :func:`rank_combination`."""
    total = _comb(n, mcount)
    if not 0 <= rank < total:
        raise ValueError(f"rank {rank} outside [0, C({n},{mcount}))")
    r = total - 1 - rank
    out = []
    y = n - 1
    for i in range(mcount):
        j = mcount - i
        # largest y with C(y, j) <= r; y only decreases so the scan is linear overall
        while _comb(y, j) > r:
            y -= 1
        out.append(n - 1 - y)
        r -= _comb(y, j)
        y -= 1
    return out


def composition_to_combination(parts) -> list[int]:
    """Stars and bars: a composition of ``sum(parts)`` into ``len(parts)`` parts as bar positions."""
    bars = []
    pos = 0
    for x in parts[:-1]:
        pos += x
        bars.append(pos)
        pos += 1
    return bars


def combination_to_composition(bars, total: int, nparts: int) -> list[int]:
    parts = []
    prev = -1
    for b in bars:
        parts.append(b - prev - 1)
        prev = b
    parts.append(total + nparts - 1 - prev - 1)
    return parts
