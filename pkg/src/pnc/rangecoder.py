"""Renormalizing 64-bit range coder over exact integers.

The encoder keeps ``low`` and ``range`` as Python ints; bytes leave from the
top of ``low`` whenever ``range`` drops below 2**56, and a carry out of
``low`` is pushed back into the bytes already written. The decoder tracks
``code - low`` only, so it never needs to see the carry.

Positions are measured exactly: after any number of symbols the information
spent so far is ``8 * bytes_out + 64 - log2(range)``, which makes per-symbol
and per-graph realized lengths directly comparable to ideal ``-log2 p``.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from functools import lru_cache
from typing import Sequence

from .codelen import log2_binomial_pmf

PRECISION = 64
FULL = 1 << PRECISION
MASK = FULL - 1
RENORM = 1 << (PRECISION - 8)
FREQ_BITS = 31
FREQ_TOTAL = 1 << FREQ_BITS
MAX_FREQ_BITS = 40
UNIFORM_DIRECT = 1 << 24
RAW_CHUNK = 16


class CoderError(ValueError):
    """Malformed or truncated coded data."""


class SymbolModel:
    """Cumulative frequency table for a finite alphabet.

    Built from probabilities as ``freq = floor(p * T)`` with ``T = 2**31``,
    or up to ``2**40`` when some probability is smaller than ``2**-31``. The
    total is ``T`` even when the floors sum to less; the unused top of the
    interval is never selected. Hence ``freq / T <= p`` and no symbol is coded
    shorter than its ideal length.

    Symbols whose floor is zero share one extra count (the tail bucket). Such
    a symbol is sent as the bucket, its index among the tail symbols, and
    zero bits padding the cost up to ``-log2 p``; ``pad`` holds those counts.
    """

    __slots__ = ("freqs", "cum", "total", "tail", "pad")

    def __init__(self, freqs: Sequence[int], total: int | None = None, tail: Sequence[int] = (),
                 pad: Sequence[int] | None = None):
        if not freqs or any(f < 0 for f in freqs):
            raise ValueError("frequencies must be nonnegative")
        self.freqs = list(freqs)
        self.tail = {sym: i for i, sym in enumerate(tail)}
        if any(self.freqs[t] != 0 for t in self.tail):
            raise ValueError("tail symbols must have zero frequency")
        self.pad = list(pad) if pad is not None else [0] * len(self.freqs)
        cum = [0]
        for f in self.freqs:
            cum.append(cum[-1] + f)
        self.cum = cum
        used = cum[-1] + (1 if self.tail else 0)
        if used == 0:
            raise ValueError("every symbol has zero probability")
        self.total = used if total is None else max(total, used)
        if self.total > 1 << MAX_FREQ_BITS:
            raise ValueError(f"frequency total exceeds 2**{MAX_FREQ_BITS}")

    @classmethod
    def from_probs(cls, probs: Sequence[float]) -> SymbolModel:
        return cls.from_log2_probs([math.log2(p) if p > 0 else -math.inf for p in probs])

    @classmethod
    def from_log2_probs(cls, log2p: Sequence[float]) -> SymbolModel:
        finite = [x for x in log2p if x > -math.inf]
        if not finite:
            raise ValueError("every symbol has zero probability")
        lowest = min(finite)
        bits = FREQ_BITS if lowest >= -FREQ_BITS else min(MAX_FREQ_BITS, math.ceil(-lowest))
        freqs, tail = [], []
        for sym, x in enumerate(log2p):
            # the tiny shrink keeps float rounding from lifting a floor above p * T
            f = int(math.floor(2.0 ** (x + bits) * (1 - 1e-12))) if x > -math.inf else 0
            freqs.append(f)
            if f == 0 and x > -math.inf:
                tail.append(sym)
        pad = [0] * len(freqs)
        if tail:
            base = bits + math.log2(len(tail))
            for sym in tail:
                pad[sym] = max(0, math.ceil(-log2p[sym] - base - 1e-12))
        return cls(freqs, 1 << bits, tail, pad)

    def __len__(self) -> int:
        return len(self.freqs)

    def log2_prob(self, s: int) -> float:
        if s in self.tail:
            return -(math.log2(self.total) + math.log2(len(self.tail)) + self.pad[s])
        if self.freqs[s] == 0:
            return -math.inf
        return math.log2(self.freqs[s] / self.total)

    def find(self, target: int) -> int:
        return bisect_right(self.cum, target) - 1


@lru_cache(maxsize=4096)
def binomial_model(n: int, p_bits: tuple) -> SymbolModel:
    """Binomial(n, p) table; ``p_bits`` is ``(p,)`` so floats hash exactly."""
    (p,) = p_bits
    return SymbolModel.from_log2_probs([log2_binomial_pmf(k, n, p) for k in range(n + 1)])


def binomial_pmf(k: int, n: int, p: float) -> float:
    return 2.0 ** log2_binomial_pmf(k, n, p)


class Encoder:
    def __init__(self) -> None:
        self.low = 0
        self.range = FULL
        self.out = bytearray()

    @property
    def bits(self) -> float:
        """Exact information written so far, in bits."""
        return 8 * len(self.out) + PRECISION - math.log2(self.range)

    def _carry(self) -> None:
        i = len(self.out) - 1
        while i >= 0 and self.out[i] == 0xFF:
            self.out[i] = 0
            i -= 1
        if i < 0:
            raise CoderError("carry out of an empty stream")
        self.out[i] += 1

    def encode(self, cum: int, freq: int, total: int) -> None:
        r = self.range // total
        self.low += r * cum
        self.range = r * freq
        if self.low >= FULL:
            self.low -= FULL
            self._carry()
        while self.range < RENORM:
            self.out.append(self.low >> (PRECISION - 8))
            self.low = (self.low << 8) & MASK
            self.range <<= 8

    def encode_symbol(self, model: SymbolModel, s: int) -> None:
        if not 0 <= s < len(model.freqs):
            raise CoderError(f"symbol {s} outside an alphabet of {len(model.freqs)}")
        if model.freqs[s]:
            self.encode(model.cum[s], model.freqs[s], model.total)
            return
        if s not in model.tail:
            raise CoderError(f"symbol {s} has zero probability")
        self.encode(model.cum[-1], 1, model.total)
        self.encode_uniform(model.tail[s], len(model.tail))
        self.encode_bits(0, model.pad[s])

    def encode_uniform(self, value: int, n: int) -> None:
        """``value`` uniform over ``range(n)``; wide alphabets go top bits first."""
        if not 0 <= value < n:
            raise CoderError(f"value {value} outside [0, {n})")
        if n == 1:
            return
        if n <= UNIFORM_DIRECT:
            self.encode(value, 1, n)
            return
        shift = n.bit_length() - 24
        self.encode(value >> shift, 1, ((n - 1) >> shift) + 1)
        self.encode_bits(value & ((1 << shift) - 1), shift)

    def encode_bits(self, value: int, count: int) -> None:
        while count > 0:
            step = min(count, RAW_CHUNK)
            count -= step
            self.encode((value >> count) & ((1 << step) - 1), 1, 1 << step)

    def finish(self) -> bytes:
        """Shortest byte string that still pins the final interval."""
        low, rng = self.low, self.range
        for nbytes in range(PRECISION // 8 + 1):
            unit = 1 << (PRECISION - 8 * nbytes)
            v = -(-low // unit) * unit
            if v < low + rng:
                break
        out = self.out
        if v >= FULL:
            v -= FULL
            self._carry()
        for t in range(nbytes):
            out.append((v >> (PRECISION - 8 - 8 * t)) & 0xFF)
        # trailing zero bytes are implied by the decoder's zero padding
        while out and out[-1] == 0:
            out.pop()
        return bytes(out)


class Decoder:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0
        self.range = FULL
        self.code = 0
        for _ in range(PRECISION // 8):
            self.code = (self.code << 8) | self._byte()

    def _byte(self) -> int:
        p = self.pos
        self.pos += 1
        return self.data[p] if p < len(self.data) else 0

    @property
    def bits(self) -> float:
        return 8 * (self.pos - PRECISION // 8) + PRECISION - math.log2(self.range)

    def _target(self, total: int) -> tuple[int, int]:
        r = self.range // total
        t = self.code // r
        if t >= total:
            raise CoderError("code value outside the coding interval")
        return r, t

    def _consume(self, r: int, cum: int, freq: int) -> None:
        self.code -= r * cum
        self.range = r * freq
        while self.range < RENORM:
            self.code = (self.code << 8) | self._byte()
            self.range <<= 8

    def decode(self, model: SymbolModel) -> int:
        r, t = self._target(model.total)
        if t < model.cum[-1]:
            s = model.find(t)
            self._consume(r, model.cum[s], model.freqs[s])
            return s
        if t > model.cum[-1] or not model.tail:
            raise CoderError("code value in the unused part of a table")
        self._consume(r, t, 1)
        s = list(model.tail)[self.decode_uniform(len(model.tail))]
        if self.decode_bits(model.pad[s]) != 0:
            raise CoderError("nonzero padding after a tail symbol")
        return s

    def decode_uniform(self, n: int) -> int:
        if n <= 0:
            raise CoderError("empty alphabet")
        if n == 1:
            return 0
        if n <= UNIFORM_DIRECT:
            r, t = self._target(n)
            self._consume(r, t, 1)
            return t
        shift = n.bit_length() - 24
        top = ((n - 1) >> shift) + 1
        r, t = self._target(top)
        self._consume(r, t, 1)
        value = (t << shift) | self.decode_bits(shift)
        if value >= n:
            raise CoderError("decoded value outside its range")
        return value

    def decode_bits(self, count: int) -> int:
        value = 0
        while count > 0:
            step = min(count, RAW_CHUNK)
            count -= step
            r, t = self._target(1 << step)
            self._consume(r, t, 1)
            value = (value << step) | t
        return value

