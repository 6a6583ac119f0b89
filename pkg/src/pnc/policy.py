"""Randomized sequential partitioner with a learnable feature-based policy.

Each block is built by first sampling its maximum size ``k_t`` and then adding
vertices one at a time. The first vertex of a block is drawn from all remaining
vertices; later ones only from remaining neighbours of the block, so blocks are
connected by construction. A block closes early when that frontier is empty.

Scores are linear in a few hand-made features instead of a GNN. The
probability of a trajectory is the product of all categorical choices, and its
log is returned exactly together with the score-function gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .canon import K_MAX, canonical_key
from .graph import Graph
from .partition import Partition

FEATURES = ("remaining_degree", "links_to_block", "link_fraction", "block_density", "in_dictionary")


@dataclass
class PolicyParams:
    """theta: vertex-score weights and logits of the block-size head over 1..k_max."""

    k_max: int = K_MAX
    weights: np.ndarray = field(default_factory=lambda: np.zeros(len(FEATURES)))
    k_logits: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.k_logits is None:
            self.k_logits = np.zeros(self.k_max)
        self.weights = np.asarray(self.weights, dtype=float)
        self.k_logits = np.asarray(self.k_logits, dtype=float)
        if len(self.weights) != len(FEATURES) or len(self.k_logits) != self.k_max:
            raise ValueError("policy parameter shapes do not match the feature set")

    def flat(self) -> np.ndarray:
        return np.concatenate([self.weights, self.k_logits])

    @classmethod
    def from_flat(cls, vec: np.ndarray, k_max: int = K_MAX) -> PolicyParams:
        return cls(k_max, vec[: len(FEATURES)].copy(), vec[len(FEATURES):].copy())

    def copy(self) -> PolicyParams:
        return PolicyParams(self.k_max, self.weights.copy(), self.k_logits.copy())


@dataclass
class Trajectory:
    blocks: list[tuple[int, ...]]
    log_prob: float
    grad: np.ndarray  # d log p / d theta (flat)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max()
    return z - math.log(np.exp(z).sum())


class _Features:
    """Feature rows for candidate vertices given the block under construction."""

    def __init__(self, g: Graph, dictionary_codes=None):
        self.g = g
        self.adj = g.adjacency()
        self.codes = dictionary_codes

    def rows(self, cands: list[int], block: list[int], remaining: set[int]) -> np.ndarray:
        adj = self.adj
        size = len(block)
        bset = set(block)
        inner = sum(1 for u in block for w in adj[u] if w in bset) // 2
        out = np.zeros((len(cands), len(FEATURES)))
        for r, v in enumerate(cands):
            rem_deg = sum(1 for w in adj[v] if w in remaining and w != v)
            links = sum(1 for w in adj[v] if w in bset)
            k = size + 1
            dens = (inner + links) / (k * (k - 1) / 2) if k > 1 else 0.0
            in_dict = 0.0
            if self.codes:
                h = self.g.induced(block + [v])
                in_dict = float(canonical_key(Graph(h.n, h.edges)) in self.codes)
            out[r] = (rem_deg / K_MAX, links, links / size if size else 0.0, dens, in_dict)
        return out


ScoreFn = Callable[[list[int], list[int], set], np.ndarray]


def _k_choices(theta: PolicyParams, n_remaining: int):
    kmax = min(theta.k_max, n_remaining)
    logits = theta.k_logits[:kmax]
    return _log_softmax(logits), kmax


def sample_policy_partition(g: Graph, theta: PolicyParams, seed=None, dictionary_codes=None,
                            score_fn: ScoreFn | None = None, rng: np.random.Generator | None = None,
                            forced_k: int | None = None) -> tuple[Partition, float, np.ndarray]:
    """Sample a partition; returns it with the exact trajectory log-probability and its gradient.

    ``score_fn(cands, block, remaining)`` overrides the linear scores (the
    gradient of the weights is then reported as zero). ``forced_k`` fixes every
    ``k_t`` (probability one, no head gradient) for deterministic examples.
    """
    rng = rng if rng is not None else np.random.default_rng(seed)
    feats = _Features(g, dictionary_codes)
    remaining = set(range(g.n))
    blocks = []
    logp = 0.0
    grad = np.zeros(len(FEATURES) + theta.k_max)
    while remaining:
        if forced_k is None:
            logq, kmax = _k_choices(theta, len(remaining))
            q = np.exp(logq)
            k = int(rng.choice(kmax, p=q / q.sum())) + 1
            logp += logq[k - 1]
            gk = -q
            gk[k - 1] += 1.0
            grad[len(FEATURES): len(FEATURES) + kmax] += gk
        else:
            k = min(forced_k, len(remaining))
        block: list[int] = []
        while len(block) < k:
            if block:
                frontier = {w for u in block for w in feats.adj[u]} & remaining
                cands = sorted(frontier)
            else:
                cands = sorted(remaining)
            if not cands:
                break
            if score_fn is not None:
                scores = np.asarray(score_fn(cands, block, remaining), dtype=float)
                rows = None
            else:
                rows = feats.rows(cands, block, remaining)
                scores = rows @ theta.weights
            logpv = _log_softmax(scores)
            pv = np.exp(logpv)
            idx = int(rng.choice(len(cands), p=pv / pv.sum()))
            logp += logpv[idx]
            if rows is not None:
                grad[: len(FEATURES)] += rows[idx] - pv @ rows
            v = cands[idx]
            block.append(v)
            remaining.discard(v)
        blocks.append(tuple(sorted(block)))
    return Partition(g, tuple(blocks)), float(logp), grad


def enumerate_trajectories(g: Graph, theta: PolicyParams, dictionary_codes=None,
                           score_fn: ScoreFn | None = None) -> list[Trajectory]:
    """All sampling paths with their exact probabilities (tiny graphs only)."""
    feats = _Features(g, dictionary_codes)
    nf = len(FEATURES)
    out: list[Trajectory] = []

    def grow(remaining, blocks, block, k, logp, grad):
        # extend the current block or close it
        cands = []
        if len(block) < k:
            if block:
                cands = sorted({w for u in block for w in feats.adj[u]} & remaining)
            else:
                cands = sorted(remaining)
        if not cands:
            new_blocks = blocks + [tuple(sorted(block))]
            start(remaining, new_blocks, logp, grad)
            return
        if score_fn is not None:
            scores = np.asarray(score_fn(cands, block, remaining), dtype=float)
            rows = None
        else:
            rows = feats.rows(cands, block, remaining)
            scores = rows @ theta.weights
        logpv = _log_softmax(scores)
        pv = np.exp(logpv)
        for idx, v in enumerate(cands):
            g2 = grad.copy()
            if rows is not None:
                g2[:nf] += rows[idx] - pv @ rows
            grow(remaining - {v}, blocks, block + [v], k, logp + logpv[idx], g2)

    def start(remaining, blocks, logp, grad):
        if not remaining:
            out.append(Trajectory(blocks, logp, grad))
            return
        logq, kmax = _k_choices(theta, len(remaining))
        q = np.exp(logq)
        for k in range(1, kmax + 1):
            g2 = grad.copy()
            g2[nf: nf + kmax] -= q
            g2[nf + k - 1] += 1.0
            grow(remaining, blocks, [], k, logp + logq[k - 1], g2)

    start(frozenset(range(g.n)), [], 0.0, np.zeros(nf + theta.k_max))
    return out


def exact_policy_gradient(g: Graph, theta: PolicyParams, length_fn, dictionary_codes=None) -> np.ndarray:
    """E[length * grad log p] by enumeration; ``length_fn(blocks) -> bits``."""
    total = np.zeros(len(FEATURES) + theta.k_max)
    for t in enumerate_trajectories(g, theta, dictionary_codes):
        total += math.exp(t.log_prob) * length_fn(t.blocks) * t.grad
    return total
