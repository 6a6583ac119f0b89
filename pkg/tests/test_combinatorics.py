import itertools
import math
import random

import pytest

from pnc.combinatorics import (
    combination_to_composition,
    composition_to_combination,
    log2_comb,
    rank_combination,
    unrank_combination,
)


def test_rank_small_examples():
    assert rank_combination(4, [0, 1]) == 0
    assert rank_combination(4, [1, 3]) == 4


def test_rank_is_lexicographic():
    for n, m in [(4, 2), (6, 3), (7, 0), (5, 5)]:
        combos = list(itertools.combinations(range(n), m))
        assert [rank_combination(n, c) for c in combos] == list(range(len(combos)))


def test_unrank_inverts_rank_large():
    rng = random.Random(1)
    for _ in range(200):
        chosen = sorted(rng.sample(range(20), 5))
        r = rank_combination(20, chosen)
        assert 0 <= r < math.comb(20, 5)
        assert unrank_combination(20, 5, r) == chosen


def test_rank_rejects_bad_input():
    with pytest.raises(ValueError):
        rank_combination(4, [1, 1])
    with pytest.raises(ValueError):
        rank_combination(4, [0, 4])


def test_log2_comb_exact():
    assert abs(log2_comb(52, 5) - math.log2(2598960)) < 1e-10
    assert log2_comb(10, 0) == 0.0
    assert log2_comb(3, 3) == 0.0


def test_composition_roundtrip():
    rng = random.Random(2)
    for _ in range(100):
        parts = [rng.randrange(4) for _ in range(rng.randrange(1, 6))]
        bars = composition_to_combination(parts)
        assert combination_to_composition(bars, sum(parts), len(parts)) == parts
