"""Description lengths in bits.

Every function here returns a real-valued length ``-log2 p`` under the
corresponding model. Binomial coefficients are evaluated from exact integers
before the logarithm is taken.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, fields
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

from .combinatorics import log2_comb

if TYPE_CHECKING:
    from .graph import Graph
    from .partition import Partition

PARAM_BITS = 16


class DomainError(ValueError):
    """Arguments outside the support of a length function."""


def _pairs(n: int) -> int:
    return n * (n - 1) // 2


def _check_n(n: int, n_max: int) -> None:
    if not 0 <= n <= n_max:
        raise DomainError(f"n={n} outside [0, n_max={n_max}]")


def l_null_graph(n: int, m: int, n_max: int) -> float:
    """Erdos-Renyi null model: vertex count, edge count, then a uniform edge set."""
    _check_n(n, n_max)
    slots = _pairs(n)
    if not 0 <= m <= slots:
        raise DomainError(f"m={m} outside [0, {slots}] for n={n}")
    return math.log2(n_max + 1) + math.log2(slots + 1) + log2_comb(slots, m)


def l_uniform_graph(n: int, n_max: int) -> float:
    """One bit per vertex pair plus the vertex count."""
    _check_n(n, n_max)
    return math.log2(n_max + 1) + _pairs(n)


def l_edge_list(n: int, m: int, n_max: int) -> float:
    """Vertex count, edge count, then each edge as an index into the pair list."""
    _check_n(n, n_max)
    slots = _pairs(n)
    if not 0 <= m <= slots:
        raise DomainError(f"m={m} outside [0, {slots}] for n={n}")
    per_edge = math.log2(slots) if slots > 0 else 0.0
    return math.log2(n_max + 1) + math.log2(slots + 1) + m * per_edge


def l_cuts_counts(sizes: Sequence[int], cut_counts: Mapping[tuple[int, int], int]) -> float:
    """Cut graph length from block sizes and the per-pair cut edge counts."""
    b = len(sizes)
    if b <= 1:
        if any(cut_counts.values()):
            raise DomainError("cut edges without a second block")
        return 0.0
    slots = 0
    for i in range(b):
        for j in range(i + 1, b):
            slots += sizes[i] * sizes[j]
    mc = 0
    arrangements = 0.0
    for (i, j), mij in cut_counts.items():
        cap = sizes[i] * sizes[j]
        if not 0 <= mij <= cap:
            raise DomainError(f"m_{i}{j}={mij} exceeds k_i*k_j={cap}")
        mc += mij
        arrangements += log2_comb(cap, mij)
    npairs = b * (b - 1) // 2
    return math.log2(1 + slots) + log2_comb(npairs + mc - 1, mc) + arrangements


def l_cuts(p: Partition) -> float:
    return l_cuts_counts(p.sizes, p.cut_counts)


def l_sbm_baseline(p: Partition, n_max: int) -> float:
    """Clustering baseline: SBM-style uniform encodings of sizes, counts and arrangements."""
    g = p.graph
    n, m, b = g.n, g.m, p.num_blocks
    _check_n(n, n_max)
    bits = math.log2(n_max + 1) + math.log2(_pairs(n) + 1)
    if n == 0:
        return bits
    bits += math.log2(n) + log2_comb(n - 1, b - 1)
    bits += log2_comb(b * (b + 1) // 2 + m - 1, m)
    for k, mi in zip(p.sizes, p.internal_edges):
        bits += log2_comb(_pairs(k), mi)
    for (i, j), mij in p.cut_counts.items():
        bits += log2_comb(p.sizes[i] * p.sizes[j], mij)
    return bits


def l_attributes(g: Graph, n_vertex_labels: int, n_edge_labels: int) -> float:
    """Uniform code for discrete vertex and edge attributes."""
    bits = 0.0
    if g.vertex_attrs is not None:
        if n_vertex_labels < 1 or any(not 0 <= a < n_vertex_labels for a in g.vertex_attrs):
            raise DomainError("vertex attribute outside its domain")
        bits += g.n * math.log2(n_vertex_labels)
    if g.edge_attrs is not None:
        if n_edge_labels < 1 or any(not 0 <= a < n_edge_labels for a in g.edge_attrs.values()):
            raise DomainError("edge attribute outside its domain")
        bits += g.m * math.log2(n_edge_labels)
    return bits


def l_attribute_counts(n: int, m: int, n_vertex_labels: int, n_edge_labels: int) -> float:
    bits = 0.0
    if n_vertex_labels:
        bits += n * math.log2(n_vertex_labels)
    if n_edge_labels:
        bits += m * math.log2(n_edge_labels)
    return bits


def l_atom(k: int, m: int, k_max: int, n_vertex_labels: int = 0, n_edge_labels: int = 0) -> float:
    """Cost of storing one dictionary atom with the null model (plus its attributes)."""
    return l_null_graph(k, m, k_max) + l_attribute_counts(k, m, n_vertex_labels, n_edge_labels)


def l_dictionary(atoms: Iterable[tuple[int, int]], k_max: int, weights: Iterable[float] | None = None,
                 n_vertex_labels: int = 0, n_edge_labels: int = 0) -> float:
    """Sum of null-model atom costs; ``weights`` gives the relaxed (fractional) version."""
    atoms = list(atoms)
    w = [1.0] * len(atoms) if weights is None else list(weights)
    return sum(x * l_atom(k, m, k_max, n_vertex_labels, n_edge_labels) for (k, m), x in zip(atoms, w))


def l_model_params(b_support: int, n_atoms: int) -> float:
    """16 bits for the membership logit, each block-count logit and each atom logit."""
    return PARAM_BITS * (1 + b_support + n_atoms)


def log2_binomial_pmf(k: int, n: int, p: float) -> float:
    """log2 of Binomial(k | n, p), with the 0 log 0 = 0 convention."""
    if not 0 <= k <= n:
        return -math.inf
    out = log2_comb(n, k)
    if k:
        out += k * math.log2(p) if p > 0 else -math.inf
    if n - k:
        out += (n - k) * math.log2(1 - p) if p < 1 else -math.inf
    return out


def log2_multinomial_pmf(counts: Sequence[int], probs: Sequence[float]) -> float:
    total = sum(counts)
    out = math.lgamma(total + 1) / math.log(2)
    for c, q in zip(counts, probs):
        if c:
            if q <= 0:
                return -math.inf
            out += c * math.log2(q) - math.lgamma(c + 1) / math.log(2)
    return out


@dataclass
class CodeLenReport:
    """Bits broken down by what they pay for."""

    l_counts: float = 0.0
    l_dict_subgraphs: float = 0.0
    l_null_subgraphs: float = 0.0
    l_cuts: float = 0.0
    l_attrs: float = 0.0
    l_model: float = 0.0
    l_dictionary: float = 0.0
    edges: int = 0
    graphs: int = 0
    param_count: int = 0
    extra: dict = field(default_factory=dict)

    COMPONENTS = ("l_counts", "l_dict_subgraphs", "l_null_subgraphs", "l_cuts", "l_attrs",
                  "l_model", "l_dictionary")

    @property
    def data_bits(self) -> float:
        return self.l_counts + self.l_dict_subgraphs + self.l_null_subgraphs + self.l_cuts + self.l_attrs

    @property
    def total(self) -> float:
        return self.data_bits + self.l_model + self.l_dictionary

    @property
    def data_bpe(self) -> float:
        return self.data_bits / self.edges if self.edges else 0.0

    @property
    def bpe(self) -> float:
        return self.total / self.edges if self.edges else 0.0

    def __add__(self, other: CodeLenReport) -> CodeLenReport:
        out = CodeLenReport()
        for f in fields(self):
            if f.name == "extra":
                continue
            setattr(out, f.name, getattr(self, f.name) + getattr(other, f.name))
        return out

    def check(self, tol: float = 1e-9) -> None:
        for name in self.COMPONENTS:
            if getattr(self, name) < -tol:
                raise ValueError(f"negative component {name}")

    def stats_lines(self) -> list[str]:
        lines = [f"{name} {getattr(self, name):.6f}" for name in self.COMPONENTS]
        lines += [
            f"data_bits {self.data_bits:.6f}",
            f"total_bits {self.total:.6f}",
            f"graphs {self.graphs}",
            f"edges {self.edges}",
            f"data_bpe {self.data_bpe:.6f}",
            f"total_bpe {self.bpe:.6f}",
            f"param_count {self.param_count}",
        ]
        return lines

    @classmethod
    def from_stats_lines(cls, lines: Iterable[str]) -> CodeLenReport:
        out = cls()
        for line in lines:
            key, _, value = line.strip().partition(" ")
            if key in cls.COMPONENTS:
                setattr(out, key, float(value))
            elif key in ("edges", "graphs", "param_count"):
                setattr(out, key, int(value))
        return out

    def table_row(self, dataset: str, method: str) -> dict:
        return {
            "dataset": dataset,
            "method": method,
            "data_bpe": round(self.data_bpe, 4),
            "total_bpe": round(self.bpe, 4),
            "params_bits": round(self.l_model, 1),
        }


TABLE_COLUMNS = ("dataset", "method", "data_bpe", "total_bpe", "params_bits")


def format_table(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def null_model_rows(graphs: Sequence[Graph], dataset: str, n_max: int | None = None) -> list[dict]:
    """Uniform, edge-list and Erdos-Renyi rows over a whole corpus."""
    if n_max is None:
        n_max = max((g.n for g in graphs), default=0)
    edges = sum(g.m for g in graphs)
    rows = []
    for method, fn in (
        ("uniform", lambda g: l_uniform_graph(g.n, n_max)),
        ("edge-list", lambda g: l_edge_list(g.n, g.m, n_max)),
        ("erdos-renyi", lambda g: l_null_graph(g.n, g.m, n_max)),
    ):
        bits = sum(fn(g) for g in graphs)
        bpe = bits / edges if edges else 0.0
        rows.append({"dataset": dataset, "method": method, "data_bpe": round(bpe, 4),
                     "total_bpe": round(bpe, 4), "params_bits": 0.0})
    return rows
