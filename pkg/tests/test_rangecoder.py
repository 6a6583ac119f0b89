import math
import random

import pytest

from pnc.rangecoder import (
    FREQ_TOTAL,
    CoderError,
    Decoder,
    Encoder,
    SymbolModel,
    binomial_model,
    binomial_pmf,
)


def random_ops(rng: random.Random, count: int):
    ops = []
    for _ in range(count):
        r = rng.random()
        if r < 0.4:
            k = rng.randint(1, 6)
            ps = [rng.random() ** 4 + 1e-12 for _ in range(k)]
            s = sum(ps)
            ps = [p / s for p in ps]
            ops.append(("sym", ps, rng.choices(range(k), ps)[0]))
        elif r < 0.8:
            n = rng.choice([1, 2, 3, 1000, 2 ** 24, 2 ** 24 + 1, 10 ** 30, rng.randint(1, 10 ** 12)])
            ops.append(("uni", n, rng.randrange(n)))
        else:
            c = rng.randint(0, 40)
            ops.append(("raw", c, rng.getrandbits(c) if c else 0))
    return ops


@pytest.mark.parametrize("seed", range(40))
def test_roundtrip_and_lengths(seed):
    rng = random.Random(seed)
    ops = random_ops(rng, rng.randint(0, 150))
    enc = Encoder()
    ideal = 0.0
    for kind, a, x in ops:
        before = enc.bits
        if kind == "sym":
            enc.encode_symbol(SymbolModel.from_probs(a), x)
            cost = -math.log2(a[x])
        elif kind == "uni":
            enc.encode_uniform(x, a)
            cost = math.log2(a)
        else:
            enc.encode_bits(x, a)
            cost = a
        # never shorter than the ideal length of the symbol
        assert enc.bits - before >= cost - 1e-9
        ideal += cost
    bits = enc.bits
    data = enc.finish()
    assert 8 * len(data) <= bits + 16
    dec = Decoder(data)
    for kind, a, x in ops:
        if kind == "sym":
            assert dec.decode(SymbolModel.from_probs(a)) == x
        elif kind == "uni":
            assert dec.decode_uniform(a) == x
        else:
            assert dec.decode_bits(a) == x


def test_overhead_is_small_for_long_streams():
    rng = random.Random(7)
    probs = [0.7, 0.2, 0.1]
    model = SymbolModel.from_probs(probs)
    enc = Encoder()
    ideal = 0.0
    for _ in range(20000):
        x = rng.choices(range(3), probs)[0]
        enc.encode_symbol(model, x)
        ideal += -math.log2(probs[x])
    data = enc.finish()
    assert 8 * len(data) <= ideal * 1.0001 + 64


def test_empty_stream():
    assert Encoder().finish() == b""
    Decoder(b"")


def test_symbol_model_guards():
    with pytest.raises(ValueError):
        SymbolModel([-1, 1])
    with pytest.raises(ValueError):
        SymbolModel([0, 0])
    m = SymbolModel.from_probs([0.5, 0.5])
    assert m.total == FREQ_TOTAL
    assert m.log2_prob(0) == pytest.approx(-1.0)


def test_slack_region_is_an_error():
    # symbols cover half the interval; a stream landing in the other half is invalid
    m = SymbolModel([1, 1], total=4)
    with pytest.raises(CoderError):
        Decoder(b"\xff" * 16).decode(m)


def test_tiny_probabilities_use_the_tail():
    log2p = [math.log2(1 - 2e-12), math.log2(1e-12), -70.0, -200.0, -2000.0]
    # the last entries are below double precision, so only log-probabilities work
    model = SymbolModel.from_log2_probs(log2p + [-float("inf")])
    assert model.total == 2 ** 40
    assert set(model.tail) == {2, 3, 4}
    rng = random.Random(3)
    seq = [rng.randrange(5) for _ in range(200)]
    enc = Encoder()
    for s in seq:
        before = enc.bits
        enc.encode_symbol(model, s)
        assert enc.bits - before >= -log2p[s] - 1e-9
        assert enc.bits - before <= -log2p[s] + 4
    with pytest.raises(CoderError):
        enc.encode_symbol(model, 5)
    dec = Decoder(enc.finish())
    assert [dec.decode(model) for _ in seq] == seq


def test_binomial_table():
    m = binomial_model(5, (0.3,))
    assert len(m) == 6
    assert sum(binomial_pmf(k, 5, 0.3) for k in range(6)) == pytest.approx(1.0)
    assert binomial_pmf(0, 4, 0.0) == 1.0 and binomial_pmf(4, 4, 1.0) == 1.0
