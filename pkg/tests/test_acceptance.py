"""Acceptance suite: one check per criterion, one PASS/FAIL line each.

Run under pytest (the lines appear in the terminal summary) or directly with
``python3 tests/test_acceptance.py``. Datasets other than MUTAG are read from
``$PNC_DATA_DIR``; their parts are reported as SKIPPED when absent.
"""

import itertools
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE, MUTAG_DIR, external_dataset, mixed_synthetic  # noqa: E402

from pnc.canon import canonical_key, pair_order  # noqa: E402
from pnc.codec import compress_corpus, decompress_corpus, verify_roundtrip  # noqa: E402
from pnc.codelen import null_model_rows  # noqa: E402
from pnc.dictionary import Dictionary, ProbModel, fit_closed_form, graph_stats, observe_blocks, relaxed_grad  # noqa: E402
from pnc.graph import Corpus, Graph  # noqa: E402
from pnc.partition import Partition, run_partitioner  # noqa: E402
from pnc.policy import PolicyParams, enumerate_trajectories, exact_policy_gradient, sample_policy_partition  # noqa: E402
from pnc.synthetic import SyntheticSpec, clique, path, sample_undirected, synthetic_corpus, triangle  # noqa: E402
from pnc.theory import run_preset  # noqa: E402
from pnc.trainer import TrainConfig, train  # noqa: E402
from pnc.tudataset import load_corpus  # noqa: E402

TITLES = {
    1: "null-model reproduction",
    2: "lossless round trip",
    3: "bitstream parity",
    4: "PnC beats null",
    5: "planted-dictionary recovery",
    6: "gradient correctness",
    7: "REINFORCE unbiasedness",
    8: "theory checks",
    9: "canonicalization oracle",
}


def record(num: int, ok: bool | None, detail: str) -> None:
    status = {True: "PASS", False: "FAIL", None: "SKIP"}[ok]
    ACCEPTANCE[num] = f"[{status}] criterion {num} ({TITLES[num]}): {detail}"


def _partitions(graphs, name="modularity"):
    return [run_partitioner(name, g, seed=0) for g in graphs]


# -- 1 -----------------------------------------------------------------------

NULL_TARGETS = {"MUTAG": {"erdos-renyi": (4.78, 0.05), "uniform": (8.44, 0.10), "edge-list": (7.97, 0.10)},
                "IMDB-BINARY": {"erdos-renyi": (1.94, 0.05)},
                "ZINC": {"erdos-renyi": (5.15, 0.05)}}


def check_null(name: str, path) -> tuple[bool, str]:
    t = time.time()
    corpus = load_corpus(path)
    rows = {r["method"]: r["data_bpe"] for r in null_model_rows(corpus.graphs, name)}
    dt = time.time() - t
    ok = dt < 60
    parts = []
    for method, (target, tol) in NULL_TARGETS[name].items():
        ok &= abs(rows[method] - target) <= tol
        parts.append(f"{method} {rows[method]:.4f} (target {target}+-{tol})")
    return ok, f"{name}: " + ", ".join(parts) + f", {dt:.1f}s"


def test_c1_null_models():
    ok, detail = check_null("MUTAG", MUTAG_DIR)
    missing = []
    for name in ("IMDB-BINARY", "ZINC"):
        path = external_dataset(name)
        if path is None:
            missing.append(name)
            continue
        ok2, d2 = check_null(name, path)
        ok &= ok2
        detail += "; " + d2
    if missing:
        detail += f"; {', '.join(missing)} not available (set PNC_DATA_DIR), not checked"
    record(1, ok, detail)
    assert ok, detail


@pytest.mark.parametrize("name", ["IMDB-BINARY", "ZINC"])
def test_c1_external_datasets(name):
    path = external_dataset(name)
    if path is None:
        pytest.skip(f"{name} not present under $PNC_DATA_DIR")
    ok, detail = check_null(name, path)
    assert ok, detail


# -- 2 and 3 -------------------------------------------------------------------

def _roundtrip_set(graphs, model):
    res = compress_corpus(graphs, model, _partitions(graphs))
    dec = decompress_corpus(res.data)
    return res, verify_roundtrip(res, dec)


@pytest.fixture(scope="module")
def coded_sets(mutag, mutag_trained, synthetic_trained):
    t = time.time()
    corpus, trained = synthetic_trained
    sets = {"MUTAG": _roundtrip_set(mutag.graphs, mutag_trained.model),
            "synthetic": _roundtrip_set(corpus.graphs, trained.model)}
    path = external_dataset("IMDB-BINARY")
    if path is not None:
        imdb = load_corpus(path)
        model = train(imdb, TrainConfig(epochs=30, seed=0), "modularity").model
        sets["IMDB-BINARY"] = _roundtrip_set(imdb.graphs, model)
    return sets, time.time() - t


def test_c2_roundtrip(coded_sets):
    sets, dt = coded_sets
    ok = dt < 300
    parts = []
    for name, (_, flags) in sets.items():
        ok &= all(flags)
        parts.append(f"{name} {sum(flags)}/{len(flags)}")
    detail = ", ".join(parts) + f" witnesses equal, {dt:.1f}s to encode and decode"
    if "IMDB-BINARY" not in sets:
        detail += "; IMDB-BINARY not available, not checked"
    record(2, ok, detail)
    assert ok, detail


def test_c3_parity(coded_sets):
    sets, _ = coded_sets
    recs = [r for res, _ in sets.values() for r in res.records]
    below = [r for r in recs if r.realized_bits < r.ideal_bits - 1e-9]
    above = [r for r in recs if r.realized_bits > r.ideal_bits * 1.01 + 32]
    excess = [r.realized_bits - r.ideal_bits for r in recs]
    ok = len(recs) >= 1000 and not below and not above
    detail = (f"{len(recs)} graphs, realized - ideal in [{min(excess):.2e}, {max(excess):.2e}] bits; "
              f"{len(below)} below ideal, {len(above)} above ideal*1.01+32")
    record(3, ok, detail)
    assert ok, detail


# -- 4 -----------------------------------------------------------------------

def pnc_bpe(corpus, seed=0) -> tuple[float, int, float]:
    t = time.time()
    res = train(corpus, TrainConfig(epochs=100, seed=seed), "modularity")
    rep = res.model.corpus_report(_partitions(corpus.graphs))
    return rep.bpe, res.best_epoch, time.time() - t


def test_c4_pnc_beats_null(mutag):
    bpe, epoch, dt = pnc_bpe(mutag)
    ok = bpe <= 3.5 and dt < 900
    detail = f"MUTAG total {bpe:.3f} bpe (gate 3.5, ER null 4.78), best epoch {epoch}, {dt:.1f}s"
    path = external_dataset("IMDB-BINARY")
    if path is None:
        detail += "; IMDB-BINARY not available, not checked"
    else:
        b2, e2, d2 = pnc_bpe(load_corpus(path))
        ok &= b2 <= 1.6 and d2 < 900
        detail += f"; IMDB-BINARY {b2:.3f} bpe (gate 1.6), {d2:.1f}s"
    record(4, ok, detail)
    assert ok, detail


# -- 5 -----------------------------------------------------------------------

def planted_triangles(samples: int, seed: int) -> Corpus:
    spec = SyntheticSpec("planted", samples=samples, seed=seed, atoms=[triangle()],
                         atoms_per_graph=(3, 12), noise_edges=0.0)
    return synthetic_corpus(spec, name="planted-triangle")


def split_styles(g: Graph) -> dict[str, Partition]:
    """Whole triangles, edge plus vertex, or singletons, applied to every triangle."""
    comps = [sorted(c) for c in g.components()]
    styles = {
        "triangles": [tuple(c) for c in comps],
        "edge+vertex": [b for c in comps for b in ((c[0], c[1]), (c[2],))],
        "singletons": [(v,) for v in range(g.n)],
    }
    return {k: Partition(g, tuple(v)) for k, v in styles.items()}


def brute_force_optimum(graphs) -> tuple[float, str, tuple]:
    candidates = [canonical_key(Graph(1)), canonical_key(Graph(2, ((0, 1),))), canonical_key(triangle())]
    best = None
    for style in ("triangles", "edge+vertex", "singletons"):
        parts = [split_styles(g)[style] for g in graphs]
        for r in range(len(candidates) + 1):
            for subset in itertools.combinations(candidates, r):
                model = fit_closed_form(parts, list(subset))
                total = model.corpus_report(parts).total
                if best is None or total < best[0]:
                    best = (total, style, tuple(sorted(subset)))
    return best


def test_c5_planted_recovery():
    corpus = planted_triangles(200, seed=1)
    res = train(corpus, TrainConfig(epochs=50, seed=0), "modularity")
    model = res.model
    tri = canonical_key(triangle())
    q_tri = float(model.q_atoms()[0]) if model.atoms == [tri] else 0.0
    parts = _partitions(corpus.graphs)
    per_graph = max(model.graph_report(p).l_dict_subgraphs for p in parts)
    small = corpus.graphs[:20]
    total, style, atoms = brute_force_optimum(small)
    ok = model.atoms == [tri] and q_tri >= 0.99 and per_graph < 0.05
    ok &= style == "triangles" and atoms == (tri,)
    detail = (f"dictionary {[(c.k, c.m) for c in model.atoms]}, q(triangle)={q_tri:.4f}, "
              f"max dictionary-subgraph cost {per_graph:.2e} bits/graph; brute force over "
              f"3 partition styles x 8 atom subsets on 20 graphs picks {style} with "
              f"{[(c.k, c.m) for c in atoms]} ({total:.1f} bits)")
    record(5, ok, detail)
    assert ok, detail


# -- 6 -----------------------------------------------------------------------

def test_c6_gradients():
    samples = sample_undirected(SyntheticSpec("planted", samples=5, seed=11, atoms=[triangle(), clique(4), path(3)],
                                              atoms_per_graph=(3, 6), noise_edges=2.0, null_fraction=0.3,
                                              null_size=4))
    d = Dictionary()
    parts = [Partition(s.graph, tuple(s.blocks)) for s in samples]
    stats = [graph_stats(p, d, observe_blocks(d, p)) for p in parts]
    bs = [p.num_blocks for p in parts]
    lo, nb, na = min(bs), max(bs) - min(bs) + 1, len(d)

    def evaluate(v):
        phi = ProbModel(v[0], lo, v[1:1 + nb], v[1 + nb:1 + nb + na])
        return relaxed_grad(stats, v[1 + nb + na:], phi, d.null_bits, 0.7, 1.3)

    rng = np.random.default_rng(0)
    worst, h = 0.0, 1e-5
    for _ in range(100):
        v = np.concatenate([[rng.normal(-1, 1)], rng.normal(0, 1, nb), rng.normal(0, 1, na),
                            rng.normal(0, 1.5, na)])
        _, g = evaluate(v)
        analytic = np.concatenate([[g.delta_logit], g.b_logits, g.atom_logits, g.psi])
        numeric = np.array([(evaluate(v + h * e)[0] - evaluate(v - h * e)[0]) / (2 * h)
                            for e in np.eye(len(v))])
        rel = np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
        worst = max(worst, float(rel.max()))
    ok = worst < 1e-4
    detail = f"5 graphs, {len(v)} parameters, 100 random points, max relative error {worst:.2e} (gate 1e-4)"
    record(6, ok, detail)
    assert ok, detail


# -- 7 -----------------------------------------------------------------------

def test_c7_reinforce():
    g = Graph(5, ((0, 1), (1, 2), (0, 2), (2, 3), (3, 4)))
    seeds = [triangle(), path(2), Graph(1)]
    model = fit_closed_form(_partitions(seeds) + [Partition(g, ((0, 1, 2), (3, 4)))],
                            [canonical_key(s) for s in seeds], k_max=5)
    cache = {}

    def length(blocks):
        key = tuple(blocks)
        if key not in cache:
            cache[key] = model.graph_report(Partition(g, key)).data_bits
        return cache[key]

    rng = np.random.default_rng(1)
    theta = PolicyParams(5, rng.normal(0, 0.5, 5), rng.normal(0, 0.5, 5))
    codes = {canonical_key(triangle())}
    trajectories = enumerate_trajectories(g, theta, codes)
    exact = exact_policy_gradient(g, theta, length, codes)
    n = 100_000
    acc = np.zeros_like(exact)
    acc2 = np.zeros_like(exact)
    for _ in range(n):
        p, _, grad = sample_policy_partition(g, theta, rng=rng, dictionary_codes=codes)
        x = length(p.blocks) * grad
        acc += x
        acc2 += x * x
    mean = acc / n
    se = np.sqrt(np.maximum(acc2 / n - mean ** 2, 0.0) / n)
    z = np.where(se > 0, np.abs(mean - exact) / np.where(se > 0, se, 1), 0.0)
    exact_zero_ok = bool(np.all(np.abs(mean - exact)[se == 0] < 1e-9))
    ok = bool(z.max() <= 3.0) and exact_zero_ok
    detail = (f"5-vertex graph, {len(trajectories)} enumerated trajectories, {n} samples, "
              f"max |mean - exact| = {z.max():.2f} sigma over {len(exact)} components")
    record(7, ok, detail)
    assert ok, detail


# -- 8 -----------------------------------------------------------------------

ORDERING_PRESETS = ("er-sparse", "er-dense", "sbm-k6", "planted-tri-k4")
RIGID_PRESETS = ("rigid-k6", "rigid-k7")


@pytest.fixture(scope="module")
def theory_reports():
    t = time.time()
    orderings = [run_preset(name) for name in ORDERING_PRESETS]
    rigid = [run_preset(name) for name in RIGID_PRESETS]
    dt = time.time() - t
    asserted = sum(v is not None for r in orderings for v in r.checks.values())
    failed = [f"{r.name}: {k}" for r in orderings for k, v in r.checks.items() if v is False]
    ratios = {r.name: r.observed["gap / n(1-delta) log k"] for r in rigid}
    orderings_ok = not failed and asserted > 0 and dt < 600
    gap_ok = all(abs(x - 1.0) <= 0.2 for x in ratios.values())
    detail = (f"orderings: {asserted} asserted checks over {len(orderings)} presets, failed {failed or 'none'}; "
              "rigid gap / n(1-delta) log k: "
              + ", ".join(f"{k} {v:.3f}" for k, v in ratios.items())
              + f" (gate 1 +- 0.2); {dt:.1f}s")
    record(8, orderings_ok and gap_ok, detail)
    return orderings_ok, gap_ok, detail


def test_c8_orderings(theory_reports):
    orderings_ok, _, detail = theory_reports
    assert orderings_ok, detail


def test_c8_rigid_gap(theory_reports):
    # The measured gap is exactly (n/k)(1-delta) E[log(k!/|Aut|)], which sits near 0.6 of
    # n(1-delta) log k for k = 6, 7; see the decisions ledger.
    _, gap_ok, detail = theory_reports
    assert gap_ok, detail


# -- 9 -----------------------------------------------------------------------

def test_c9_canonical_oracle():
    t = time.time()
    counts = {}
    agree = True
    for k in range(1, 7):
        pairs = pair_order(k)
        width = len(pairs)
        pos = {p: i for i, p in enumerate(pairs)}
        masks = np.arange(1 << width, dtype=np.int64)
        bits = [(masks >> (width - 1 - i)) & 1 for i in range(width)]
        best = masks.copy()
        for perm in itertools.permutations(range(k)):
            code = np.zeros_like(masks)
            for i, (a, b) in enumerate(pairs):
                u, v = perm[a], perm[b]
                code |= bits[pos[(min(u, v), max(u, v))]] << (width - 1 - i)
            np.minimum(best, code, out=best)
        seen = set()
        for mask in range(1 << width):
            g = Graph(k, tuple(p for i, p in enumerate(pairs) if (mask >> (width - 1 - i)) & 1))
            c = canonical_key(g).bitmask
            agree &= c == int(best[mask])
            seen.add(c)
        counts[k] = len(seen)
    dt = time.time() - t
    ok = agree and counts[4] == 11 and counts[5] == 34 and counts[6] == 156 and dt < 120
    detail = (f"canonical code equals the brute-force minimum over all k! relabellings for every graph "
              f"with k<=6: {agree}; classes k=4..6: {counts[4]}, {counts[5]}, {counts[6]}; {dt:.1f}s")
    record(9, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    code = pytest.main([__file__, "-q", "-p", "no:cacheprovider"])
    sys.exit(code)
