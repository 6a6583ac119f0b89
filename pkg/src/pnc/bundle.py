"""Saved models: hardened parameters plus what is needed to partition new graphs."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .canon import CanonicalCode, canonical_key
from .dictionary import HardModel
from .graph import Graph
from .partition import Partition, run_partitioner
from .policy import PolicyParams, sample_policy_partition

BUNDLE_FORMAT = "pnc-model/1"


def atom_to_json(code: CanonicalCode) -> dict:
    out = {"k": code.k, "edges": [list(e) for e in code.edges()]}
    if code.attr_signature is not None:
        va, ea = code.attr_signature
        out["vertex_attrs"] = list(va) if va is not None else None
        out["edge_attrs"] = list(ea) if ea is not None else None
    return out


def atom_from_json(obj: dict) -> CanonicalCode:
    edges = [tuple(e) for e in obj["edges"]]
    va = obj.get("vertex_attrs")
    ea = obj.get("edge_attrs")
    g = Graph(obj["k"], tuple(edges), tuple(va) if va is not None else None,
              dict(zip(edges, ea)) if ea is not None else None)
    code = canonical_key(g)
    if code.edges() != sorted(edges, key=lambda e: (e[1], e[0])):
        raise ValueError("atom is not stored in canonical form")
    return code


@dataclass
class ModelBundle:
    model: HardModel
    partitioner: str = "modularity"
    seed: int = 0
    theta: PolicyParams | None = None
    dataset: str = ""
    config: dict = field(default_factory=dict)
    train_stats: list[str] = field(default_factory=list)

    def partition(self, g: Graph, index: int = 0) -> Partition:
        """Deterministic partition of ``g`` (the policy is seeded per graph index)."""
        h = g if self.model.attributed else (Graph(g.n, g.edges) if g.attributed else g)
        if self.partitioner == "policy":
            if self.theta is None:
                raise ValueError("policy bundle without policy parameters")
            rng = np.random.default_rng([self.seed, index])
            codes = {CanonicalCode(c.k, c.bitmask) for c in self.model.atoms}
            p, _, _ = sample_policy_partition(h, self.theta, rng=rng, dictionary_codes=codes)
            return Partition(g, p.blocks)
        p = run_partitioner(self.partitioner, h, seed=self.seed, k_max=self.model.k_max)
        return Partition(g, p.blocks)

    def to_json(self) -> dict:
        m = self.model
        return {
            "format": BUNDLE_FORMAT,
            "dataset": self.dataset,
            "partitioner": self.partitioner,
            "seed": self.seed,
            "k_max": m.k_max,
            "n_max": m.n_max,
            "attributed": m.attributed,
            "n_vertex_labels": m.n_vertex_labels,
            "n_edge_labels": m.n_edge_labels,
            "escape_log2": m.escape_log2,
            "delta_logit": m.delta_logit,
            "b_lo": m.b_lo,
            "b_logits": [float(x) for x in m.b_logits],
            "atom_logits": [float(x) for x in m.atom_logits],
            "atoms": [atom_to_json(c) for c in m.atoms],
            "theta": None if self.theta is None else {
                "weights": [float(x) for x in self.theta.weights],
                "k_logits": [float(x) for x in self.theta.k_logits],
            },
            "config": self.config,
            "train_stats": self.train_stats,
        }

    @classmethod
    def from_json(cls, obj: dict) -> ModelBundle:
        if obj.get("format") != BUNDLE_FORMAT:
            raise ValueError(f"unsupported model format {obj.get('format')!r}")
        model = HardModel(
            atoms=[atom_from_json(a) for a in obj["atoms"]],
            atom_logits=np.array(obj["atom_logits"], dtype=float),
            delta_logit=obj["delta_logit"],
            b_lo=obj["b_lo"],
            b_logits=np.array(obj["b_logits"], dtype=float),
            k_max=obj["k_max"],
            n_max=obj["n_max"],
            escape_log2=obj["escape_log2"],
            n_vertex_labels=obj["n_vertex_labels"],
            n_edge_labels=obj["n_edge_labels"],
            attributed=obj["attributed"],
        )
        theta = None
        if obj.get("theta") is not None:
            t = obj["theta"]
            theta = PolicyParams(obj["k_max"], np.array(t["weights"]), np.array(t["k_logits"]))
        return cls(model, obj["partitioner"], obj.get("seed", 0), theta, obj.get("dataset", ""),
                   obj.get("config", {}), obj.get("train_stats", []))

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json(), indent=1))
        return path

    @classmethod
    def load(cls, path) -> ModelBundle:
        return cls.from_json(json.loads(Path(path).read_text()))


def dictionary_text(model: HardModel, top: int | None = None) -> str:
    """One line per atom: rank, probability, size, edge count, canonical edges."""
    q = model.q_atoms()
    lines = [f"# {len(model.atoms)} atoms, delta={model.delta:.4f}"]
    for rank, (code, p) in enumerate(zip(model.atoms, q)):
        if top is not None and rank >= top:
            break
        edges = " ".join(f"{u}-{v}" for u, v in code.edges())
        lines.append(f"{rank}\t{p:.5f}\tk={code.k}\tm={code.m}\t{edges}")
    return "\n".join(lines) + "\n"


def dictionary_dot(model: HardModel, top: int | None = None) -> str:
    """Graphviz rendering with one cluster per atom."""
    q = model.q_atoms()
    out = ["graph dictionary {", "  node [shape=circle, label=\"\", width=0.15];"]
    for rank, (code, p) in enumerate(zip(model.atoms, q)):
        if top is not None and rank >= top:
            break
        out.append(f"  subgraph cluster_{rank} {{")
        out.append(f"    label=\"#{rank} q={p:.3f}\";")
        for v in range(code.k):
            out.append(f"    a{rank}_{v};")
        for u, v in code.edges():
            out.append(f"    a{rank}_{u} -- a{rank}_{v};")
        out.append("  }")
    out.append("}")
    return "\n".join(out) + "\n"
