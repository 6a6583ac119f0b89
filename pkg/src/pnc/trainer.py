"""Minimize the total description length over dictionary, model and (optionally) partitioner."""

from __future__ import annotations

import copy
import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .canon import K_MAX
from .codelen import CodeLenReport, log2_binomial_pmf, log2_multinomial_pmf
from .dictionary import (
    Dictionary,
    GraphStats,
    HardModel,
    ProbModel,
    block_code,
    graph_stats,
    harden,
    observe_blocks,
    relaxed_grad,
    relaxed_graph_len,
)
from .graph import Corpus, Graph
from .partition import Partition, run_partitioner
from .policy import PolicyParams, sample_policy_partition

log = logging.getLogger(__name__)


class TrainingDivergence(RuntimeError):
    """Training total exceeded the divergence bound."""


class TrainingFault(FloatingPointError):
    """Non-finite gradient."""


@dataclass
class TrainConfig:
    """Training hyperparameters. ``lr_phi_psi=None`` picks 1.0 (fixed partitioner) or 0.1 (policy)."""

    epochs: int = 100
    batch_size: int = 64
    lr_phi_psi: float | None = None
    lr_theta: float = 1e-3
    samples: int = 1
    baseline_decay: float = 0.9
    seed: int = 0
    k_max: int = K_MAX
    optimizer: str = "adam"
    threshold: float = 0.5
    escape_log2: float = -16.0
    attributed: bool = False
    divergence_factor: float = 10.0

    def __post_init__(self) -> None:
        if self.lr_phi_psi is not None and self.lr_phi_psi < 0:
            raise ValueError("learning rates must be nonnegative")
        if self.lr_theta < 0:
            raise ValueError("learning rates must be nonnegative")
        if self.samples < 1:
            raise ValueError("samples (R) must be at least 1")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be 'adam' or 'sgd'")

    def phi_psi_rate(self, policy: bool) -> float:
        if self.lr_phi_psi is not None:
            return self.lr_phi_psi
        return 0.1 if policy else 1.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> TrainConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> TrainConfig:
        return cls.from_dict(json.loads(Path(path).read_text()))


LOG_COLUMNS = ("epoch", "relaxed_bits", "hard_bits", "dict_size", "universe_size", "delta",
               "grad_norm", "seconds")


@dataclass
class TrainLog:
    rows: list[dict] = field(default_factory=list)

    def append(self, **row) -> None:
        self.rows.append({k: row.get(k) for k in LOG_COLUMNS})

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=LOG_COLUMNS)
            w.writeheader()
            w.writerows(self.rows)

    @classmethod
    def from_csv(cls, path) -> TrainLog:
        with open(path) as fh:
            return cls([dict(r) for r in csv.DictReader(fh)])


class _Optimizer:
    """SGD or Adam over named parameter vectors that may grow."""

    def __init__(self, kind: str, rates: dict[str, float], b1=0.9, b2=0.999, eps=1e-8):
        self.kind, self.rates = kind, rates
        self.b1, self.b2, self.eps = b1, b2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t: dict[str, int] = {}

    def step(self, name: str, param: np.ndarray, grad: np.ndarray) -> np.ndarray:
        lr = self.rates[name]
        if lr == 0:
            return param
        if self.kind == "sgd":
            return param - lr * grad
        m = self.m.get(name, np.zeros(0))
        v = self.v.get(name, np.zeros(0))
        if len(m) < len(grad):
            m = np.concatenate([m, np.zeros(len(grad) - len(m))])
            v = np.concatenate([v, np.zeros(len(grad) - len(v))])
        t = self.t.get(name, 0) + 1
        m = self.b1 * m + (1 - self.b1) * grad
        v = self.b2 * v + (1 - self.b2) * grad * grad
        self.m[name], self.v[name], self.t[name] = m, v, t
        mh = m / (1 - self.b1 ** t)
        vh = v / (1 - self.b2 ** t)
        return param - lr * mh / (np.sqrt(vh) + self.eps)


def objective(stats: list[GraphStats], d: Dictionary, phi: ProbModel) -> float:
    """Relaxed total bits: dictionary plus every graph (fixed partitions, point-mass expectation)."""
    x = d.membership()
    return sum(relaxed_graph_len(st, x, phi) for st in stats) + d.cost_bits()


def objective_policy(graphs: list[Graph], theta: PolicyParams, d: Dictionary, phi: ProbModel,
                     samples: int = 1, rng=None, attributed: bool = False) -> float:
    """Monte-Carlo estimate of dictionary cost plus expected graph cost under the policy."""
    rng = rng if rng is not None else np.random.default_rng(0)
    x = d.membership()
    total = 0.0
    for g in graphs:
        acc = 0.0
        for _ in range(samples):
            p, _, _ = sample_policy_partition(g, theta, rng=rng)
            ids = [d.lookup(block_code(p, i, d.k_max, attributed)[0]) for i in range(p.num_blocks)]
            if any(i is None for i in ids):
                raise ValueError("sampled block outside the universe; observe it first")
            acc += relaxed_graph_len(graph_stats(p, d, ids, attributed), x, phi)
        total += acc / samples
    return total + d.cost_bits()


def grad_phi_psi(stats: list[GraphStats], d: Dictionary, phi: ProbModel, dict_weight: float = 1.0,
                 graph_weight: float = 1.0):
    value, grad = relaxed_grad(stats, d.psi, phi, d.null_bits, dict_weight, graph_weight)
    if not grad.is_finite():
        bad = None
        for i, st in enumerate(stats):
            if not relaxed_grad([st], d.psi, phi, d.null_bits, 0.0)[1].is_finite():
                bad = i
                break
        raise TrainingFault(f"non-finite gradient (graph {bad})")
    return value, grad


def grad_theta_reinforce(g: Graph, theta: PolicyParams, d: Dictionary, phi: ProbModel, samples: int,
                         baseline: float | None, rng, attributed: bool = False, observe: bool = True,
                         dictionary_codes=None):
    """Score-function estimate ``mean_r (l_r - baseline) * grad log p(partition_r)``.

    Returns ``(gradient, lengths, partitions, atom id lists)``. With
    ``baseline=None`` the first sample's length is used (zero advantage for it).
    """
    grad = np.zeros(len(theta.flat()))
    lengths, parts, idss = [], [], []
    for _ in range(samples):
        p, _, glogp = sample_policy_partition(g, theta, rng=rng, dictionary_codes=dictionary_codes)
        codes = [block_code(p, i, d.k_max, attributed)[0] for i in range(p.num_blocks)]
        if observe:
            ids = observe_blocks(d, p, attributed, codes=codes)
            phi.grow(len(d))
        else:
            ids = [d.lookup(c) for c in codes]
        st = graph_stats(p, d, ids, attributed)
        ell = relaxed_graph_len(st, d.membership(), phi)
        if baseline is None:
            baseline = ell
        grad += (ell - baseline) * glogp
        lengths.append(ell)
        parts.append(p)
        idss.append(ids)
    return grad / samples, lengths, parts, idss


def hard_report_from_stats(hm: HardModel, stats: list[GraphStats], uni_to_hard: dict[int, int],
                           d: Dictionary) -> CodeLenReport:
    """Exact corpus lengths of precomputed graph summaries under a hardened model."""
    q = hm.q_atoms()
    delta = hm.delta
    total = CodeLenReport()
    for st in stats:
        b = st.b
        counts = [0] * len(hm.atoms)
        b_dict = 0
        null_bits = attr_bits = 0.0
        for a, c, full, struct in zip(st.atom_ids, st.counts, st.null_bits, st.null_struct_bits):
            h = uni_to_hard.get(int(a))
            if h is None:
                null_bits += c * struct
                attr_bits += c * (full - struct)
            else:
                counts[h] += int(c)
                b_dict += int(c)
        l_counts = -hm.log2_q_b(b)
        if b:
            l_counts -= log2_binomial_pmf(b_dict, b, 1.0 - delta)
        l_dict = -log2_multinomial_pmf(counts, q) if b_dict else 0.0
        total.l_counts += l_counts
        total.l_dict_subgraphs += l_dict
        total.l_null_subgraphs += null_bits
        total.l_cuts += st.cut_bits
        total.l_attrs += attr_bits + st.cut_attr_bits
        total.edges += st.edges
        total.graphs += 1
    total.l_model = hm.l_model()
    total.l_dictionary = hm.l_dictionary()
    total.param_count = hm.param_count
    return total


def _harden_copy(d: Dictionary, phi: ProbModel, cfg: TrainConfig, n_max: int,
                 b_range=None) -> tuple[HardModel, dict[int, int]]:
    dd = copy.copy(d)
    dd.hard_mask = None
    hm = harden(dd, phi, cfg.threshold, n_max=n_max, attributed=cfg.attributed, b_range=b_range)
    uni = {d.index[c]: i for i, c in enumerate(hm.atoms)}
    return hm, uni


@dataclass
class TrainResult:
    model: HardModel
    dictionary: Dictionary
    phi: ProbModel
    theta: PolicyParams | None
    log: TrainLog
    best_epoch: int
    partitioner: str
    train_report: CodeLenReport | None = None


def _b_bounds(graphs: list[Graph], partitions: list[Partition] | None, k_max: int) -> tuple[int, int]:
    if partitions is not None:
        bs = [p.num_blocks for p in partitions]
    else:
        bs = [g.n for g in graphs] + [math.ceil(g.n / k_max) for g in graphs]
    lo = 0 if min(bs, default=1) == 0 else 1
    return lo, max(max(bs, default=1), lo)


def train(corpus: Corpus | list[Graph], config: TrainConfig | None = None, partitioner: str = "modularity",
          partitions: list[Partition] | None = None) -> TrainResult:
    """Fit dictionary and model (and the policy when ``partitioner == 'policy'``).

    Model selection keeps the epoch whose hardened, 16-bit-quantized total on
    the training graphs is smallest; epoch 0 is the initial model.
    """
    cfg = config or TrainConfig()
    if isinstance(corpus, Corpus):
        graphs = corpus.subset("train")
        av, ae = corpus.attr_domains if cfg.attributed else (0, 0)
    else:
        graphs = list(corpus)
        av = ae = 0
    if not cfg.attributed:
        graphs = [Graph(g.n, g.edges) if g.attributed else g for g in graphs]
    if not graphs:
        raise ValueError("training split is empty")
    n_max = max(g.n for g in graphs)
    policy = partitioner == "policy"
    rng = np.random.default_rng(cfg.seed)
    d = Dictionary(cfg.k_max, av, ae)

    if not policy and partitions is None:
        partitions = [run_partitioner(partitioner, g, seed=cfg.seed, k_max=cfg.k_max) for g in graphs]
    codes = None
    stats: list[GraphStats] = []
    if not policy:
        codes = [[block_code(p, i, cfg.k_max, cfg.attributed)[0] for i in range(p.num_blocks)]
                 for p in partitions]
        ids = [observe_blocks(d, p, cfg.attributed, codes=c) for p, c in zip(partitions, codes)]
        stats = [graph_stats(p, d, i, cfg.attributed) for p, i in zip(partitions, ids)]
    b_lo, b_hi = _b_bounds(graphs, partitions, cfg.k_max)
    phi = ProbModel(0.0, b_lo, np.zeros(b_hi - b_lo + 1), np.zeros(len(d)), cfg.escape_log2)
    theta = PolicyParams(cfg.k_max) if policy else None
    rates = {"delta": cfg.phi_psi_rate(policy), "b": cfg.phi_psi_rate(policy),
             "phi": cfg.phi_psi_rate(policy), "psi": cfg.phi_psi_rate(policy), "theta": cfg.lr_theta}
    opt = _Optimizer(cfg.optimizer, rates)
    baselines: dict[int, float] = {}
    tlog = TrainLog()
    n = len(graphs)

    def evaluate(epoch_stats):
        x = d.membership()
        relaxed = sum(relaxed_graph_len(st, x, phi) for st in epoch_stats) + d.cost_bits()
        hm, uni = _harden_copy(d, phi, cfg, n_max)
        rep = hard_report_from_stats(hm, epoch_stats, uni, d)
        return relaxed, rep

    if policy:
        # epoch-0 statistics come from one pass of the initial policy
        stats = []
        for gi, g in enumerate(graphs):
            _, lengths, parts, idss = grad_theta_reinforce(g, theta, d, phi, 1, None, rng, cfg.attributed)
            stats.append(graph_stats(parts[0], d, idss[0], cfg.attributed))
    t0 = time.time()
    relaxed0, rep0 = evaluate(stats)
    tlog.append(epoch=0, relaxed_bits=relaxed0, hard_bits=rep0.total, dict_size=_dict_size(d, cfg.threshold),
                universe_size=len(d), delta=phi.delta, grad_norm=0.0, seconds=0.0)
    best = (rep0.total, 0, _snapshot(d, phi, theta), rep0)

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        gnorm = 0.0
        epoch_stats: list[GraphStats | None] = [None] * n if policy else stats
        if not policy and epoch > 1:
            for p, c in zip(partitions, codes):
                observe_blocks(d, p, cfg.attributed, codes=c)
        for start in range(0, n, cfg.batch_size):
            batch = order[start: start + cfg.batch_size]
            if policy:
                g_theta = np.zeros(len(theta.flat()))
                codes_in = {a.code for a, xv in zip(d.atoms, d.x_hat) if xv >= cfg.threshold}
                for gi in batch:
                    gi = int(gi)
                    gr, lengths, parts, idss = grad_theta_reinforce(
                        graphs[gi], theta, d, phi, cfg.samples, baselines.get(gi), rng, cfg.attributed,
                        dictionary_codes=codes_in)
                    ell = float(np.mean(lengths))
                    baselines[gi] = ell if gi not in baselines else (
                        cfg.baseline_decay * baselines[gi] + (1 - cfg.baseline_decay) * ell)
                    g_theta += gr
                    epoch_stats[gi] = graph_stats(parts[-1], d, idss[-1], cfg.attributed)
                g_theta /= len(batch)
                theta = PolicyParams.from_flat(opt.step("theta", theta.flat(), g_theta), cfg.k_max)
                batch_stats = [epoch_stats[int(gi)] for gi in batch]
                phi.grow(len(d))
            else:
                batch_stats = [stats[int(gi)] for gi in batch]
            _, grad = grad_phi_psi(batch_stats, d, phi, dict_weight=1.0 / n, graph_weight=1.0 / len(batch))
            gnorm = max(gnorm, grad.norm())
            phi.delta_logit = float(opt.step("delta", np.array([phi.delta_logit]), np.array([grad.delta_logit]))[0])
            phi.b_logits = opt.step("b", phi.b_logits, grad.b_logits)
            phi.atom_logits = opt.step("phi", phi.atom_logits, grad.atom_logits)
            d.psi = opt.step("psi", d.psi, grad.psi)
        if policy:
            epoch_stats = [st for st in epoch_stats if st is not None]
        relaxed, rep = evaluate(epoch_stats)
        tlog.append(epoch=epoch, relaxed_bits=relaxed, hard_bits=rep.total, dict_size=_dict_size(d, cfg.threshold),
                    universe_size=len(d), delta=phi.delta, grad_norm=gnorm, seconds=time.time() - t0)
        log.info("epoch %d relaxed %.1f hard %.1f |D| %s", epoch, relaxed, rep.total, tlog.rows[-1]["dict_size"])
        if not math.isfinite(relaxed) or relaxed > cfg.divergence_factor * relaxed0:
            raise TrainingDivergence(f"epoch {epoch}: {relaxed:.1f} bits > {cfg.divergence_factor} x epoch-0 "
                                     f"({relaxed0:.1f})")
        if rep.total < best[0]:
            best = (rep.total, epoch, _snapshot(d, phi, theta), rep)
        if policy:
            stats = epoch_stats

    _, best_epoch, snap, best_rep = best
    # atoms first seen after the selected epoch were not part of that model
    late = len(d) - len(snap["psi"])
    d.psi = np.concatenate([snap["psi"], np.full(late, -30.0)])
    phi, theta = snap["phi"], snap["theta"]
    phi.atom_logits = np.concatenate([phi.atom_logits[: len(snap["psi"])], np.zeros(late)])
    for a, e in zip(d.atoms, snap["ema"]):
        a.ema = e
    b_range = None
    if policy:
        bs = [st.b for st in stats]
        b_range = (max(min(bs), phi.b_lo), min(max(bs), phi.b_hi))
    model = harden(d, phi, cfg.threshold, n_max=n_max, attributed=cfg.attributed, b_range=b_range)
    return TrainResult(model, d, phi, theta, tlog, best_epoch, partitioner, best_rep)


def _dict_size(d: Dictionary, threshold: float) -> int:
    return int((d.x_hat >= threshold).sum()) if len(d) else 0


def _snapshot(d: Dictionary, phi: ProbModel, theta: PolicyParams | None) -> dict:
    return {
        "psi": d.psi.copy(),
        "phi": phi.copy(),
        "theta": theta.copy() if theta is not None else None,
        "ema": [a.ema for a in d.atoms],
    }
