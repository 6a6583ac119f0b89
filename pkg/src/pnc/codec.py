"""Bitstream for partitioned graphs and the archive container around it.

Per graph the body carries, in order:

1. the block count ``b`` from the q(b) table (or an escape symbol followed by
   an Elias-gamma code of ``b + 1``);
2. the number of dictionary blocks as one Binomial(b, 1 - delta) symbol;
3. the atom histogram as a chain of binomials: atom ``a`` gets
   Binomial(remaining, q_a / sum_{a' >= a} q_a'), which multiplies out to the
   multinomial over the whole histogram;
4. every non-dictionary block as (k, m, rank of its edge set) under the
   uniform null model, plus attributes when the model is attributed;
5. the cut: total cut size, its split over block pairs (stars and bars), and
   one combination rank per pair over the ``k_i * k_j`` slot grid.

Because only the histogram of dictionary blocks is sent, the encoder sorts
blocks into the order the decoder will rebuild them in (dictionary blocks by
atom id, then null blocks) and relabels the graph to match. Each step is
coded at its exact model probability, so the realized length tracks the
ideal one up to frequency quantization.

Archive layout (all integers little-endian)::

    "PNC1" | version u8 | flags u8 | k_max u8
    uvarint n_max, n_vertex_labels, n_edge_labels, b_lo, b_count, n_atoms
    f16 escape_log2, delta_logit, b_logits[b_count], atom_logits[n_atoms]
    range-coded body: dictionary atoms, then each graph
    u32 graph count | u32 crc32 of everything before the footer
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .canon import CanonicalCode, pair_order
from .codelen import CodeLenReport
from .combinatorics import (
    combination_to_composition,
    composition_to_combination,
    rank_combination,
    unrank_combination,
)
from .dictionary import HardModel, ModelError, block_code
from .graph import Corpus, Graph
from .partition import Partition
from .rangecoder import CoderError, Decoder, Encoder, SymbolModel, binomial_model

MAGIC = b"PNC1"
VERSION = 1
FOOTER = struct.Struct("<II")


class ArchiveError(ValueError):
    """Bad magic, unsupported version, checksum mismatch or truncated archive."""


# -- isomorphism witnesses -------------------------------------------------

@dataclass(frozen=True)
class Witness:
    """Block canonical codes in order plus per-pair cut counts.

    Two graphs with equal witnesses over blocks laid out in the same order
    are isomorphic only up to the cut wiring; the codec additionally checks
    that the decoded graph equals the encoder's relabelled input.
    """

    codes: tuple
    cuts: tuple

    @classmethod
    def of(cls, g: Graph, blocks: Sequence[Sequence[int]], k_max: int, attributed: bool) -> Witness:
        p = Partition(g, tuple(tuple(b) for b in blocks))
        codes = tuple(block_code(p, i, k_max, attributed)[0] for i in range(p.num_blocks))
        return cls(codes, tuple(sorted(p.cut_counts.items())))


# -- small helpers -----------------------------------------------------------

def _softmax(logits: Sequence[float]) -> list[float]:
    if not len(logits):
        return []
    top = max(logits)
    e = [math.exp(float(z) - top) for z in logits]
    s = math.fsum(e)
    return [x / s for x in e]


def _pairs(k: int) -> int:
    return k * (k - 1) // 2


def _strip(g: Graph) -> Graph:
    return Graph(g.n, g.edges) if g.attributed else g


class GraphCoder:
    """Encoder/decoder tables for one hardened model."""

    def __init__(self, model: HardModel):
        self.model = model
        self.k_max = model.k_max
        self.av, self.ae = model.attr_domains()
        esc = 2.0 ** model.escape_log2 if model.escape_log2 > -math.inf else 0.0
        qb = [(1.0 - esc) * q for q in _softmax(list(model.b_logits))]
        self.escape = esc > 0
        self.b_table = SymbolModel.from_probs(qb + ([esc] if self.escape else []))
        self.p_member = 1.0 - model.delta
        q = _softmax(list(model.atom_logits))
        self.cond = []
        for a in range(len(q)):
            rest = math.fsum(q[a:])
            self.cond.append(min(1.0, q[a] / rest) if rest > 0 else 1.0)
        self.atom_graphs = [c.to_graph() if model.attributed else Graph(c.k, tuple(c.edges()))
                            for c in model.atoms]

    # block count ------------------------------------------------------------
    def _put_b(self, enc: Encoder, b: int) -> None:
        m = self.model
        if m.b_lo <= b <= m.b_hi:
            enc.encode_symbol(self.b_table, b - m.b_lo)
            return
        if not self.escape:
            raise ModelError(f"b={b} outside the block-count support and escape is disabled")
        enc.encode_symbol(self.b_table, len(self.b_table) - 1)
        v = b + 1
        enc.encode_bits(0, v.bit_length() - 1)
        enc.encode_bits(v, v.bit_length())

    def _get_b(self, dec: Decoder) -> int:
        s = dec.decode(self.b_table)
        if not self.escape or s < len(self.b_table) - 1:
            return self.model.b_lo + s
        zeros = 0
        while dec.decode_bits(1) == 0:
            zeros += 1
            if zeros > 64:
                raise CoderError("runaway escape code")
        v = (1 << zeros) | dec.decode_bits(zeros)
        return v - 1

    # null-model blocks --------------------------------------------------------
    def put_null_block(self, enc: Encoder, code: CanonicalCode, k_max: int | None = None) -> None:
        k_max = self.k_max if k_max is None else k_max
        k = code.k
        slots = _pairs(k)
        enc.encode_uniform(k, k_max + 1)
        enc.encode_uniform(code.m, slots + 1)
        bits = code.bitmask
        chosen = [t for t in range(slots) if (bits >> (slots - 1 - t)) & 1]
        enc.encode_uniform(rank_combination(slots, chosen), math.comb(slots, len(chosen)))
        if self.model.attributed:
            va, ea = code.attr_signature or (None, None)
            if self.av:
                for a in va:
                    enc.encode_uniform(a, self.av)
            if self.ae:
                for a in ea:
                    enc.encode_uniform(a, self.ae)

    def get_null_block(self, dec: Decoder, k_max: int | None = None) -> Graph:
        k_max = self.k_max if k_max is None else k_max
        k = dec.decode_uniform(k_max + 1)
        slots = _pairs(k)
        m = dec.decode_uniform(slots + 1)
        rank = dec.decode_uniform(math.comb(slots, m))
        order = pair_order(k)
        edges = [order[t] for t in unrank_combination(slots, m, rank)]
        va = ea = None
        if self.model.attributed:
            if self.av:
                va = tuple(dec.decode_uniform(self.av) for _ in range(k))
            if self.ae:
                ea = {e: dec.decode_uniform(self.ae) for e in edges}
        return Graph(k, tuple(edges), va, ea)

    # whole graphs ------------------------------------------------------------
    def layout(self, p: Partition, codes=None):
        """Decode-order block list and the vertex relabelling that goes with it."""
        if codes is None:
            codes = self.model.block_codes(p)
        atom_of = [self.model.lookup(c) for c, _ in codes]
        dict_blocks = sorted((a, i) for i, a in enumerate(atom_of) if a is not None)
        null_blocks = [i for i, a in enumerate(atom_of) if a is None]
        order = [i for _, i in dict_blocks] + null_blocks
        blocks = []
        for i in order:
            canon = codes[i][1]
            blocks.append(tuple(p.blocks[i][o] for o in canon))
        return order, blocks, atom_of, codes

    def encode_graph(self, enc: Encoder, p: Partition, codes=None) -> tuple[Graph, list[tuple[int, ...]]]:
        """Write one partitioned graph; returns the relabelled graph the decoder will rebuild."""
        model = self.model
        g = p.graph if model.attributed else _strip(p.graph)
        order, blocks, atom_of, codes = self.layout(p, codes)
        b = len(order)
        self._put_b(enc, b)
        hist = [0] * len(model.atoms)
        for a in atom_of:
            if a is not None:
                hist[a] += 1
        b_dict = sum(hist)
        if b:
            enc.encode_symbol(binomial_model(b, (self.p_member,)), b_dict)
        remaining = b_dict
        for a, c in enumerate(hist):
            if remaining == 0:
                break
            if a < len(hist) - 1:
                enc.encode_symbol(binomial_model(remaining, (self.cond[a],)), c)
            remaining -= c
        for i in order[b_dict:]:
            self.put_null_block(enc, codes[i][0])
        perm = [0] * g.n
        offsets = []
        pos = 0
        for blk in blocks:
            offsets.append(pos)
            for v in blk:
                perm[v] = pos
                pos += 1
        relabelled = g.relabel(perm)
        sizes = [len(blk) for blk in blocks]
        self._put_cuts(enc, relabelled, sizes, offsets)
        return relabelled, blocks

    def _cut_pairs(self, g: Graph, sizes, offsets):
        block_of = []
        for i, k in enumerate(sizes):
            block_of.extend([i] * k)
        per_pair: dict[tuple[int, int], list[int]] = {}
        attrs: dict[tuple[int, int], list[tuple[int, int]]] = {}
        for u, v in g.edges:
            i, j = block_of[u], block_of[v]
            if i == j:
                continue
            slot = (u - offsets[i]) * sizes[j] + (v - offsets[j])
            per_pair.setdefault((i, j), []).append(slot)
            if g.edge_attrs is not None:
                attrs.setdefault((i, j), []).append((slot, g.edge_attrs[(u, v)]))
        return per_pair, attrs

    def _put_cuts(self, enc: Encoder, g: Graph, sizes, offsets) -> None:
        b = len(sizes)
        if b <= 1:
            return
        per_pair, attrs = self._cut_pairs(g, sizes, offsets)
        pairs = [(i, j) for i in range(b) for j in range(i + 1, b)]
        span = sum(sizes[i] * sizes[j] for i, j in pairs)
        parts = [len(per_pair.get(pr, ())) for pr in pairs]
        mc = sum(parts)
        enc.encode_uniform(mc, span + 1)
        bars = composition_to_combination(parts)
        enc.encode_uniform(rank_combination(len(pairs) + mc - 1, bars), math.comb(len(pairs) + mc - 1, mc))
        for (i, j), cnt in zip(pairs, parts):
            if cnt:
                grid = sizes[i] * sizes[j]
                chosen = sorted(per_pair[(i, j)])
                enc.encode_uniform(rank_combination(grid, chosen), math.comb(grid, cnt))
        if self.model.attributed and self.ae:
            for pr in pairs:
                for _, a in sorted(attrs.get(pr, ())):
                    enc.encode_uniform(a, self.ae)

    def decode_graph(self, dec: Decoder) -> tuple[Graph, list[tuple[int, ...]]]:
        model = self.model
        b = self._get_b(dec)
        b_dict = dec.decode(binomial_model(b, (self.p_member,))) if b else 0
        hist = [0] * len(model.atoms)
        remaining = b_dict
        for a in range(len(hist)):
            if remaining == 0:
                break
            c = dec.decode(binomial_model(remaining, (self.cond[a],))) if a < len(hist) - 1 else remaining
            hist[a] = c
            remaining -= c
        if remaining:
            raise CoderError("dictionary block count without atoms")
        parts = [self.atom_graphs[a] for a, c in enumerate(hist) for _ in range(c)]
        parts += [self.get_null_block(dec) for _ in range(b - b_dict)]
        sizes = [h.n for h in parts]
        offsets = []
        pos = 0
        for k in sizes:
            offsets.append(pos)
            pos += k
        edges = []
        eattrs = {} if (model.attributed and self.ae) else None
        vattrs = [] if (model.attributed and self.av) else None
        for h, off in zip(parts, offsets):
            for u, v in h.edges:
                edges.append((u + off, v + off))
                if eattrs is not None:
                    eattrs[(u + off, v + off)] = h.edge_attrs[(u, v)]
            if vattrs is not None:
                vattrs.extend(h.vertex_attrs)
        if b > 1:
            pairs = [(i, j) for i in range(b) for j in range(i + 1, b)]
            span = sum(sizes[i] * sizes[j] for i, j in pairs)
            mc = dec.decode_uniform(span + 1)
            nbars = len(pairs) - 1
            rank = dec.decode_uniform(math.comb(len(pairs) + mc - 1, mc))
            bars = unrank_combination(len(pairs) + mc - 1, nbars, rank)
            counts = combination_to_composition(bars, mc, len(pairs))
            cut_edges = []
            for (i, j), cnt in zip(pairs, counts):
                if cnt:
                    grid = sizes[i] * sizes[j]
                    if cnt > grid:
                        raise CoderError("cut count exceeds its slot grid")
                    r = dec.decode_uniform(math.comb(grid, cnt))
                    for slot in unrank_combination(grid, cnt, r):
                        a, c = divmod(slot, sizes[j])
                        cut_edges.append((offsets[i] + a, offsets[j] + c))
            edges.extend(cut_edges)
            if eattrs is not None:
                for e in cut_edges:
                    eattrs[e] = dec.decode_uniform(self.ae)
        n = sum(sizes)
        blocks = [tuple(range(off, off + k)) for off, k in zip(offsets, sizes)]
        g = Graph(n, tuple(edges), tuple(vattrs) if vattrs is not None else None, eattrs)
        return g, blocks

    def put_dictionary(self, enc: Encoder) -> None:
        for code in self.model.atoms:
            self.put_null_block(enc, code)

    def get_dictionary(self, dec: Decoder) -> list[CanonicalCode]:
        from .canon import canonical_key
        out = []
        for _ in range(len(self.model.atoms)):
            h = self.get_null_block(dec)
            out.append(canonical_key(h))
        return out


# -- archive -----------------------------------------------------------------

def _uvarint(x: int) -> bytes:
    if x < 0:
        raise ValueError("uvarint of a negative number")
    out = bytearray()
    while True:
        byte = x & 0x7F
        x >>= 7
        if x:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def _read_uvarint(buf: bytes, pos: int) -> tuple[int, int]:
    x = shift = 0
    while True:
        if pos >= len(buf):
            raise ArchiveError("truncated header")
        byte = buf[pos]
        pos += 1
        x |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return x, pos
        shift += 7


def _f16(values) -> bytes:
    return np.asarray(values, dtype="<f2").tobytes()


def write_header(model: HardModel) -> bytes:
    out = bytearray(MAGIC)
    out += bytes([VERSION, 1 if model.attributed else 0, model.k_max])
    for x in (model.n_max, model.n_vertex_labels, model.n_edge_labels, model.b_lo,
              len(model.b_logits), len(model.atoms)):
        out += _uvarint(int(x))
    out += _f16([model.escape_log2, model.delta_logit])
    out += _f16(model.b_logits)
    out += _f16(model.atom_logits)
    return bytes(out)


def read_header(buf: bytes) -> tuple[dict, int]:
    if len(buf) < 7 or buf[:4] != MAGIC:
        raise ArchiveError("not a PNC archive (bad magic)")
    version, flags, k_max = buf[4], buf[5], buf[6]
    if version != VERSION:
        raise ArchiveError(f"unsupported archive version {version}")
    pos = 7
    vals = []
    for _ in range(6):
        x, pos = _read_uvarint(buf, pos)
        vals.append(x)
    n_max, av, ae, b_lo, b_count, n_atoms = vals
    need = 2 * (2 + b_count + n_atoms)
    if pos + need > len(buf):
        raise ArchiveError("truncated header")
    floats = np.frombuffer(buf[pos: pos + need], dtype="<f2").astype(np.float64)
    pos += need
    info = dict(
        attributed=bool(flags & 1), k_max=k_max, n_max=n_max, n_vertex_labels=av, n_edge_labels=ae,
        b_lo=b_lo, escape_log2=float(floats[0]), delta_logit=float(floats[1]),
        b_logits=floats[2: 2 + b_count], atom_logits=floats[2 + b_count:], n_atoms=n_atoms,
    )
    return info, pos


@dataclass
class GraphRecord:
    index: int
    ideal_bits: float
    realized_bits: float
    relabelled: Graph
    witness: Witness


@dataclass
class CompressResult:
    data: bytes
    records: list[GraphRecord]
    report: CodeLenReport
    header_bytes: int
    body_bytes: int
    dictionary_bits: float
    flush_bits: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def ideal_total_bits(self) -> float:
        return self.report.total

    @property
    def realized_total_bits(self) -> int:
        return 8 * len(self.data)


@dataclass
class Decompressed:
    corpus: Corpus
    model: HardModel
    blocks: list[list[tuple[int, ...]]]
    witnesses: list[Witness]


def compress_corpus(graphs: Sequence[Graph], model: HardModel,
                    partitions: Sequence[Partition] | Callable[[int, Graph], Partition]) -> CompressResult:
    """Encode ``graphs`` with their partitions (a list, or ``fn(index, graph)``)."""
    coder = GraphCoder(model)
    header = write_header(model)
    enc = Encoder()
    start = enc.bits
    coder.put_dictionary(enc)
    dict_bits = enc.bits - start
    records = []
    report = CodeLenReport()
    for idx, g in enumerate(graphs):
        p = partitions(idx, g) if callable(partitions) else partitions[idx]
        if p.graph is not g and p.graph != g:
            raise ValueError(f"partition {idx} belongs to a different graph")
        p.validate(model.k_max)
        codes = model.block_codes(p)
        ideal = model.graph_report(p, [c for c, _ in codes])
        before = enc.bits
        relabelled, blocks = coder.encode_graph(enc, p, codes)
        realized = enc.bits - before
        witness = Witness.of(relabelled, _contiguous(blocks), model.k_max, model.attributed)
        records.append(GraphRecord(idx, ideal.data_bits, realized, relabelled, witness))
        report = report + ideal
    report.l_model = model.l_model()
    report.l_dictionary = model.l_dictionary()
    report.param_count = model.param_count
    coded_bits = enc.bits
    body = enc.finish()
    prefix = header + body
    footer = FOOTER.pack(len(graphs), zlib.crc32(prefix) & 0xFFFFFFFF)
    return CompressResult(prefix + footer, records, report, len(header), len(body), dict_bits,
                          8 * len(body) - coded_bits)


def _contiguous(blocks) -> list[tuple[int, ...]]:
    out = []
    pos = 0
    for blk in blocks:
        out.append(tuple(range(pos, pos + len(blk))))
        pos += len(blk)
    return out


def decompress_corpus(data: bytes, name: str = "decoded") -> Decompressed:
    if len(data) < 7 + FOOTER.size:
        raise ArchiveError("archive too short")
    info, pos = read_header(data)
    count, crc = FOOTER.unpack(data[-FOOTER.size:])
    if zlib.crc32(data[: -FOOTER.size]) & 0xFFFFFFFF != crc:
        raise ArchiveError("checksum mismatch")
    body = data[pos: -FOOTER.size]
    placeholder = [CanonicalCode(1, 0)] * info.pop("n_atoms")
    model = HardModel(atoms=placeholder, **info)
    dec = Decoder(body)
    try:
        coder = GraphCoder(model)
        model.atoms = coder.get_dictionary(dec)
        model.index = {c: i for i, c in enumerate(model.atoms)}
        coder = GraphCoder(model)
        graphs, blocks, witnesses = [], [], []
        for _ in range(count):
            g, blks = coder.decode_graph(dec)
            graphs.append(g)
            blocks.append(blks)
            witnesses.append(Witness.of(g, blks, model.k_max, model.attributed))
    except (CoderError, ValueError) as exc:
        raise ArchiveError(f"corrupt body: {exc}") from exc
    return Decompressed(Corpus(graphs, name=name, split=["train"] * len(graphs)), model, blocks, witnesses)


def verify_roundtrip(result: CompressResult, decoded: Decompressed) -> list[bool]:
    """Per-graph check: same witness and same graph as the encoder's relabelled input."""
    if len(result.records) != len(decoded.corpus.graphs):
        return [False] * max(len(result.records), len(decoded.corpus.graphs))
    out = []
    for rec, g, w in zip(result.records, decoded.corpus.graphs, decoded.witnesses):
        out.append(rec.witness == w and rec.relabelled == g)
    return out
