"""Atom universe, membership relaxation and the probabilistic block model.

Training works on per-graph summaries (:class:`GraphStats`): for a fixed
partition the relaxed length only depends on the number of blocks, how many
blocks fall in each universe atom, and the constant cut/attribute bits.
All relaxed quantities are computed in nats internally and reported in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma, expit, gammaln

from .canon import K_MAX, CanonicalCode, canonical_form
from .codelen import (
    CodeLenReport,
    l_atom,
    l_attribute_counts,
    l_cuts,
    l_model_params,
    l_null_graph,
    log2_binomial_pmf,
    log2_multinomial_pmf,
)
from .partition import Partition

LN2 = math.log(2.0)
PSI0 = math.log(0.9 / 0.1)
EMA_DECAY = 0.99
ESCAPE_LOG2 = -16.0


class ModelError(ValueError):
    """The model cannot score the input (degenerate or stale model)."""


def sigmoid(x):
    return expit(x)


def log_sigmoid_pair(eta: float) -> tuple[float, float]:
    """(log sigmoid(eta), log(1 - sigmoid(eta))) without underflow."""
    return -float(np.logaddexp(0.0, -eta)), -float(np.logaddexp(0.0, eta))


def _logsoftmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max()
    return z - math.log(np.exp(z).sum())


def gamma_bits(value: int) -> int:
    """Length of the Elias-gamma code of ``value + 1``."""
    return 2 * (value + 1).bit_length() - 1


@dataclass
class Atom:
    code: CanonicalCode
    index: int
    ema: float = 0.0
    null_bits: float = 0.0

    @property
    def k(self) -> int:
        return self.code.k

    @property
    def m(self) -> int:
        return self.code.m


@dataclass
class Dictionary:
    """Adaptive universe of atoms with membership logits ``psi``.

    ``x_hat = sigmoid(psi)``; ``hard_mask`` is set once by :func:`harden`.
    """

    k_max: int = K_MAX
    n_vertex_labels: int = 0
    n_edge_labels: int = 0
    atoms: list[Atom] = field(default_factory=list)
    index: dict = field(default_factory=dict)
    psi: np.ndarray = field(default_factory=lambda: np.zeros(0))
    hard_mask: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def x_hat(self) -> np.ndarray:
        return sigmoid(self.psi)

    def lookup(self, code: CanonicalCode) -> int | None:
        return self.index.get(code)

    def add(self, code: CanonicalCode, psi0: float = PSI0) -> int:
        idx = self.index.get(code)
        if idx is not None:
            return idx
        if self.hard_mask is not None:
            raise ModelError("dictionary is hardened; no new atoms")
        if code.k > self.k_max:
            raise ModelError(f"atom with {code.k} vertices exceeds K_MAX={self.k_max}")
        idx = len(self.atoms)
        bits = l_atom(code.k, code.m, self.k_max, self.n_vertex_labels, self.n_edge_labels)
        self.atoms.append(Atom(code, idx, 0.0, bits))
        self.index[code] = idx
        self.psi = np.append(self.psi, psi0)
        return idx

    @property
    def null_bits(self) -> np.ndarray:
        return np.array([a.null_bits for a in self.atoms], dtype=float)

    def by_frequency(self) -> list[Atom]:
        return sorted(self.atoms, key=lambda a: (-a.ema, a.index))

    def membership(self) -> np.ndarray:
        """Membership weights: the hard mask if hardened, otherwise x_hat."""
        if self.hard_mask is not None:
            return self.hard_mask.astype(float)
        return self.x_hat

    def cost_bits(self, relaxed: bool = True) -> float:
        """Dictionary length: sum of atom null costs, weighted by membership."""
        if not self.atoms:
            return 0.0
        w = self.membership() if relaxed else (self.x_hat >= 0.5).astype(float)
        return float(np.dot(w, self.null_bits))


def block_code(p: Partition, i: int, k_max: int = K_MAX, attributed: bool = False):
    """Canonical code and canonical order of block ``i``."""
    h = p.block_graph(i)
    if not attributed and h.attributed:
        h = type(h)(h.n, h.edges)
    return canonical_form(h, k_max)


def observe_blocks(d: Dictionary, p: Partition, attributed: bool = False, rho: float = EMA_DECAY,
                   codes: list[CanonicalCode] | None = None) -> list[int]:
    """Insert unseen block classes and update frequency EMAs; returns atom ids per block."""
    if codes is None:
        codes = [block_code(p, i, d.k_max, attributed)[0] for i in range(p.num_blocks)]
    ids = [d.add(c) for c in codes]
    if d.atoms:
        freq = np.zeros(len(d.atoms))
        for i in ids:
            freq[i] += 1.0
        if ids:
            freq /= len(ids)
        for a, f in zip(d.atoms, freq):
            a.ema = rho * a.ema + (1.0 - rho) * f
    return ids


@dataclass
class ProbModel:
    """Parameters phi: membership logit, block-count logits over a support, atom logits."""

    delta_logit: float = 0.0
    b_lo: int = 1
    b_logits: np.ndarray = field(default_factory=lambda: np.zeros(1))
    atom_logits: np.ndarray = field(default_factory=lambda: np.zeros(0))
    escape_log2: float = ESCAPE_LOG2

    @property
    def delta(self) -> float:
        return float(sigmoid(self.delta_logit))

    @property
    def b_hi(self) -> int:
        return self.b_lo + len(self.b_logits) - 1

    @property
    def b_support(self) -> int:
        return len(self.b_logits)

    def grow(self, n_atoms: int, init: float = 0.0) -> None:
        if n_atoms > len(self.atom_logits):
            self.atom_logits = np.append(self.atom_logits, np.full(n_atoms - len(self.atom_logits), init))

    def escape_prob(self) -> float:
        return 2.0 ** self.escape_log2 if self.escape_log2 > -math.inf else 0.0

    def log2_q_b(self, b: int) -> float:
        """log2 q(b), including the escape path for counts outside the support."""
        esc = self.escape_prob()
        if self.b_lo <= b <= self.b_hi:
            ls = _logsoftmax(np.asarray(self.b_logits, dtype=float))[b - self.b_lo] / LN2
            return ls + (math.log2(1.0 - esc) if esc > 0 else 0.0)
        if esc <= 0:
            raise ModelError(f"b={b} outside support [{self.b_lo}, {self.b_hi}] and no escape")
        return self.escape_log2 - gamma_bits(b)

    def q_b(self) -> np.ndarray:
        return np.exp(_logsoftmax(np.asarray(self.b_logits, dtype=float)))

    def q_atoms(self, weights: np.ndarray) -> np.ndarray:
        """x-weighted softmax over atom logits."""
        if len(weights) == 0 or not np.any(weights > 0):
            raise ModelError("no atom has positive membership")
        phi = np.asarray(self.atom_logits[: len(weights)], dtype=float)
        z = np.where(weights > 0, phi, -np.inf)
        z = z - z[weights > 0].max()
        e = weights * np.exp(z)
        return e / e.sum()

    def copy(self) -> ProbModel:
        return ProbModel(self.delta_logit, self.b_lo, np.array(self.b_logits, dtype=float),
                         np.array(self.atom_logits, dtype=float), self.escape_log2)


def relaxed_q_atom(d: Dictionary, phi: ProbModel, atom_index: int) -> float:
    return float(phi.q_atoms(d.membership())[atom_index])


@dataclass
class GraphStats:
    """What the relaxed length of one partitioned graph depends on."""

    b: int
    atom_ids: np.ndarray  # universe ids with at least one block
    counts: np.ndarray  # blocks per id
    null_bits: np.ndarray  # null-model bits of one block of that id (incl. attributes)
    cut_bits: float
    cut_attr_bits: float = 0.0
    edges: int = 0
    null_struct_bits: np.ndarray | None = None  # structure-only part of null_bits


def graph_stats(p: Partition, d: Dictionary, ids: list[int], attributed: bool = False) -> GraphStats:
    av, ae = (d.n_vertex_labels, d.n_edge_labels) if attributed else (0, 0)
    uniq: dict[int, int] = {}
    for i in ids:
        uniq[i] = uniq.get(i, 0) + 1
    atom_ids = np.array(sorted(uniq), dtype=int)
    counts = np.array([uniq[i] for i in atom_ids], dtype=float)
    struct = np.array([l_null_graph(d.atoms[i].k, d.atoms[i].m, d.k_max) for i in atom_ids], dtype=float)
    full = np.array([d.atoms[i].null_bits for i in atom_ids], dtype=float)
    return GraphStats(
        b=p.num_blocks,
        atom_ids=atom_ids,
        counts=counts,
        null_bits=full,
        cut_bits=l_cuts(p),
        cut_attr_bits=l_attribute_counts(0, p.total_cut, av, ae),
        edges=p.graph.m,
        null_struct_bits=struct,
    )


def relaxed_graph_len(st: GraphStats, x: np.ndarray, phi: ProbModel) -> float:
    """Relaxed length (bits) of one graph: counts + dictionary blocks + null blocks + cuts.

    ``x`` is the membership vector over the whole universe (values in [0, 1]).
    Factorials are replaced by the Gamma function so the value is smooth in ``x``.
    """
    if st.b == 0:
        return phi_log2_qb_bits(phi, 0) + st.cut_bits + st.cut_attr_bits
    xs = x[st.atom_ids]
    s = xs * st.counts
    big_b = float(s.sum())
    ln_d, ln_1md = log_sigmoid_pair(phi.delta_logit)
    nats = 0.0
    nats -= gammaln(st.b + 1) - gammaln(big_b + 1) - gammaln(st.b - big_b + 1)
    if big_b > 0:
        nats -= big_b * ln_1md
    if st.b - big_b > 0:
        nats -= (st.b - big_b) * ln_d
    # multinomial over the universe with fractional counts
    nats -= gammaln(big_b + 1)
    nats += float(gammaln(s + 1).sum())
    if big_b > 0:
        q = phi.q_atoms(x)[st.atom_ids]
        pos = s > 0
        with np.errstate(divide="ignore"):
            # q underflowing to 0 gives an infinite length, caught by the divergence guard
            nats -= float((s[pos] * np.log(q[pos])).sum())
    bits = nats / LN2
    bits += phi_log2_qb_bits(phi, st.b)
    bits += float(((1.0 - xs) * st.counts * st.null_bits).sum())
    return bits + st.cut_bits + st.cut_attr_bits


def phi_log2_qb_bits(phi: ProbModel, b: int) -> float:
    return -phi.log2_q_b(b)


def relaxed_corpus_len(stats: list[GraphStats], d: Dictionary, phi: ProbModel,
                       x: np.ndarray | None = None) -> float:
    x = d.membership() if x is None else x
    return sum(relaxed_graph_len(st, x, phi) for st in stats) + float(np.dot(x, d.null_bits))


@dataclass
class Gradient:
    delta_logit: float
    b_logits: np.ndarray
    atom_logits: np.ndarray
    psi: np.ndarray

    def norm(self) -> float:
        return math.sqrt(self.delta_logit ** 2 + float((self.b_logits ** 2).sum())
                         + float((self.atom_logits ** 2).sum()) + float((self.psi ** 2).sum()))

    def scaled(self, c: float) -> Gradient:
        return Gradient(self.delta_logit * c, self.b_logits * c, self.atom_logits * c, self.psi * c)

    def is_finite(self) -> bool:
        return (math.isfinite(self.delta_logit) and np.isfinite(self.b_logits).all()
                and np.isfinite(self.atom_logits).all() and np.isfinite(self.psi).all())


def relaxed_grad(stats: list[GraphStats], psi: np.ndarray, phi: ProbModel,
                 dict_null_bits: np.ndarray, dict_weight: float = 1.0,
                 graph_weight: float = 1.0) -> tuple[float, Gradient]:
    """Value (bits) and analytic gradient of ``graph_weight * sum_g L_g + dict_weight * L(D)``.

    Gradients are taken w.r.t. the delta logit, the block-count logits, the atom
    logits and the membership logits ``psi`` (``x = sigmoid(psi)``).
    """
    n_atoms = len(psi)
    x = sigmoid(psi)
    phi_arr = np.asarray(phi.atom_logits[:n_atoms], dtype=float)
    delta = phi.delta
    ln_d, ln_1md = log_sigmoid_pair(phi.delta_logit)
    logq_b = _logsoftmax(np.asarray(phi.b_logits, dtype=float))
    qb = np.exp(logq_b)
    if n_atoms:
        z = phi_arr - phi_arr.max()
        ez = x * np.exp(z)
        q = ez / ez.sum()
        with np.errstate(divide="ignore"):
            log_q = np.log(q)
    else:
        q = log_q = np.zeros(0)

    g_eta = 0.0
    g_b = np.zeros_like(qb)
    g_phi = np.zeros(n_atoms)
    g_x = np.zeros(n_atoms)
    sum_big_b = 0.0
    value = 0.0
    for st in stats:
        value += relaxed_graph_len(st, x, phi)
        b = st.b
        if phi.b_lo <= b <= phi.b_hi:
            j = b - phi.b_lo
            g_b += qb
            g_b[j] -= 1.0
        if b == 0 or len(st.atom_ids) == 0:
            g_eta += -(b * (1 - delta))
            continue
        ids = st.atom_ids
        c = st.counts
        s = x[ids] * c
        big_b = float(s.sum())
        sum_big_b += big_b
        g_eta += big_b * delta - (b - big_b) * (1 - delta)
        np.add.at(g_phi, ids, -s)
        gx = c * (digamma(s + 1) - digamma(b - big_b + 1) - ln_1md + ln_d - log_q[ids] - 1.0
                  - st.null_bits * LN2)
        np.add.at(g_x, ids, gx)
    if n_atoms:
        g_phi += sum_big_b * q
        # B q_u / x_u = B e^phi_u / Z, dense over the universe
        g_x += sum_big_b * np.exp(z) / ez.sum()
    g_x *= graph_weight
    g_x += dict_weight * dict_null_bits * LN2
    value = graph_weight * value + dict_weight * float(np.dot(x, dict_null_bits))
    grad = Gradient(
        graph_weight * g_eta / LN2,
        graph_weight * g_b / LN2,
        graph_weight * g_phi / LN2,
        g_x * x * (1 - x) / LN2,
    )
    return value, grad


# ---------------------------------------------------------------------------
# hardened model used for exact lengths and for the entropy coder


def quantize16(values) -> np.ndarray:
    return np.asarray(values, dtype=np.float16).astype(np.float64)


@dataclass
class HardModel:
    """Integral dictionary plus 16-bit parameters; what the archive header carries."""

    atoms: list[CanonicalCode]
    atom_logits: np.ndarray
    delta_logit: float
    b_lo: int
    b_logits: np.ndarray
    k_max: int = K_MAX
    n_max: int = 0
    escape_log2: float = ESCAPE_LOG2
    n_vertex_labels: int = 0
    n_edge_labels: int = 0
    attributed: bool = False

    def __post_init__(self) -> None:
        self.atom_logits = quantize16(self.atom_logits)
        self.b_logits = quantize16(self.b_logits)
        self.delta_logit = float(quantize16([self.delta_logit])[0])
        self.index = {c: i for i, c in enumerate(self.atoms)}

    @property
    def delta(self) -> float:
        return float(sigmoid(self.delta_logit))

    @property
    def b_hi(self) -> int:
        return self.b_lo + len(self.b_logits) - 1

    def prob_model(self) -> ProbModel:
        return ProbModel(self.delta_logit, self.b_lo, self.b_logits.copy(), self.atom_logits.copy(),
                         self.escape_log2)

    def q_atoms(self) -> np.ndarray:
        if not self.atoms:
            return np.zeros(0)
        return np.exp(_logsoftmax(self.atom_logits))

    def q_b(self) -> np.ndarray:
        return np.exp(_logsoftmax(self.b_logits))

    def log2_q_b(self, b: int) -> float:
        return self.prob_model().log2_q_b(b)

    def lookup(self, code: CanonicalCode) -> int | None:
        return self.index.get(code)

    @property
    def param_count(self) -> int:
        return 1 + len(self.b_logits) + len(self.atoms)

    def l_model(self) -> float:
        return l_model_params(len(self.b_logits), len(self.atoms))

    def l_dictionary(self) -> float:
        av, ae = self.attr_domains()
        return sum(l_atom(c.k, c.m, self.k_max, av, ae) for c in self.atoms)

    def attr_domains(self) -> tuple[int, int]:
        return (self.n_vertex_labels, self.n_edge_labels) if self.attributed else (0, 0)

    def block_codes(self, p: Partition):
        return [block_code(p, i, self.k_max, self.attributed) for i in range(p.num_blocks)]

    def graph_report(self, p: Partition, codes=None) -> CodeLenReport:
        """Exact lengths of one partitioned graph under this model."""
        if codes is None:
            codes = [c for c, _ in self.block_codes(p)]
        av, ae = self.attr_domains()
        b = p.num_blocks
        dict_counts = [0] * len(self.atoms)
        b_dict = 0
        null_bits = 0.0
        attr_bits = 0.0
        for i, code in enumerate(codes):
            a = self.lookup(code)
            if a is None:
                null_bits += l_null_graph(p.sizes[i], p.internal_edges[i], self.k_max)
                attr_bits += l_attribute_counts(p.sizes[i], p.internal_edges[i], av, ae)
            else:
                dict_counts[a] += 1
                b_dict += 1
        attr_bits += l_attribute_counts(0, p.total_cut, av, ae)
        l_counts = -self.log2_q_b(b)
        if b > 0:
            l_counts -= log2_binomial_pmf(b_dict, b, 1.0 - self.delta)
        l_dict = -log2_multinomial_pmf(dict_counts, self.q_atoms()) if b_dict else 0.0
        if not math.isfinite(l_counts) or not math.isfinite(l_dict):
            raise ModelError("graph has zero probability under the model")
        return CodeLenReport(
            l_counts=l_counts,
            l_dict_subgraphs=l_dict,
            l_null_subgraphs=null_bits,
            l_cuts=l_cuts(p),
            l_attrs=attr_bits,
            edges=p.graph.m,
            graphs=1,
        )

    def corpus_report(self, partitions: list[Partition]) -> CodeLenReport:
        total = CodeLenReport()
        for p in partitions:
            total = total + self.graph_report(p)
        total.l_model = self.l_model()
        total.l_dictionary = self.l_dictionary()
        total.param_count = self.param_count
        return total


def harden(d: Dictionary, phi: ProbModel, threshold: float = 0.5, n_max: int = 0,
           attributed: bool = False, b_range: tuple[int, int] | None = None) -> HardModel:
    """Threshold memberships and freeze the model.

    Surviving atoms are ordered by decreasing probability (ties by code) so the
    coder's atom chain visits likely atoms first. ``b_range`` optionally trims
    the block-count support.
    """
    x = d.x_hat
    keep = [i for i in range(len(d.atoms)) if x[i] >= threshold]
    d.hard_mask = np.zeros(len(d.atoms), dtype=bool)
    d.hard_mask[keep] = True
    logits = np.asarray(phi.atom_logits[: len(d.atoms)], dtype=float)
    keep.sort(key=lambda i: (-logits[i], d.atoms[i].code))
    b_lo, b_logits = phi.b_lo, np.asarray(phi.b_logits, dtype=float)
    if b_range is not None:
        lo, hi = b_range
        b_logits = b_logits[lo - b_lo: hi - b_lo + 1]
        b_lo = lo
    return HardModel(
        atoms=[d.atoms[i].code for i in keep],
        atom_logits=logits[keep] if keep else np.zeros(0),
        delta_logit=phi.delta_logit,
        b_lo=b_lo,
        b_logits=b_logits,
        k_max=d.k_max,
        n_max=n_max,
        escape_log2=phi.escape_log2,
        n_vertex_labels=d.n_vertex_labels,
        n_edge_labels=d.n_edge_labels,
        attributed=attributed,
    )


def fit_closed_form(partitions: list[Partition], atoms: list[CanonicalCode], k_max: int = K_MAX,
                    n_max: int = 0, b_range: tuple[int, int] | None = None,
                    clip: float = 30.0) -> HardModel:
    """Maximum-likelihood parameters for a fixed integral dictionary.

    delta is the fraction of null blocks, q(a) and q(b) are empirical
    frequencies. Zero-probability outcomes are approximated by logits ``-clip``.
    """
    index = {c: i for i, c in enumerate(atoms)}
    counts = np.zeros(len(atoms))
    bcounts: dict[int, int] = {}
    n_dict = n_all = 0
    for p in partitions:
        bcounts[p.num_blocks] = bcounts.get(p.num_blocks, 0) + 1
        for i in range(p.num_blocks):
            code, _ = block_code(p, i, k_max)
            a = index.get(code)
            n_all += 1
            if a is not None:
                counts[a] += 1
                n_dict += 1
    lo, hi = b_range or (min(bcounts), max(bcounts))

    def logit_of(freq):
        with np.errstate(divide="ignore"):
            lg = np.log(np.asarray(freq, dtype=float))
        if not len(lg) or not np.isfinite(lg.max()):
            return np.zeros(len(lg))  # nothing observed: uniform
        return np.maximum(lg - lg.max(), -clip)

    frac_null = (n_all - n_dict) / n_all if n_all else 0.5
    frac_null = min(max(frac_null, 1e-6), 1 - 1e-6)
    order = sorted(range(len(atoms)), key=lambda i: (-counts[i], atoms[i]))
    return HardModel(
        atoms=[atoms[i] for i in order],
        atom_logits=logit_of(counts[order]) if atoms else np.zeros(0),
        delta_logit=math.log(frac_null / (1 - frac_null)),
        b_lo=lo,
        b_logits=logit_of([bcounts.get(b, 0) for b in range(lo, hi + 1)]),
        k_max=k_max,
        n_max=n_max,
    )
