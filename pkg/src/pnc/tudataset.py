"""Readers and writers for the TUDataset text format and a plain edge-list format.

TUDataset layout (one-indexed, comma separated)::

    <name>_A.txt                one "row, col" line per directed adjacency entry
    <name>_graph_indicator.txt  graph id of vertex i on line i
    <name>_node_labels.txt      optional, label of vertex i on line i
    <name>_edge_labels.txt      optional, label of the entry on the same line of _A.txt
    <name>_split.txt            optional, "train"/"test" per graph (written by this package)

Edge-list layout: per graph a header line ``n m`` followed by ``m`` lines ``u v``
(zero-indexed). Blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

import os
import shutil
import urllib.request
import zipfile
from collections import defaultdict
from pathlib import Path

from .graph import Corpus, Graph, GraphError

TU_URL = "https://www.chrsmrrs.com/graphkerneldatasets/{name}.zip"


class ParseError(ValueError):
    """Malformed line in an input file."""

    def __init__(self, path: Path | str, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = str(path)
        self.lineno = lineno


class IntegrityError(ValueError):
    """Input files are individually well-formed but mutually inconsistent."""


def _read_ints(path: Path, width: int) -> list[tuple[int, ...]]:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != width:
                raise ParseError(path, lineno, f"expected {width} field(s), got {len(parts)}")
            try:
                rows.append(tuple(int(p) for p in parts))
            except ValueError:
                raise ParseError(path, lineno, f"non-integer field in {line!r}") from None
    return rows


def _dataset_name(dir_path: Path) -> str:
    hits = sorted(dir_path.glob("*_A.txt"))
    if not hits:
        raise FileNotFoundError(f"no *_A.txt file in {dir_path}")
    return hits[0].name[: -len("_A.txt")]


def parse_tu_dataset(dir_path: str | os.PathLike) -> Corpus:
    """Read a TUDataset directory into a :class:`Corpus`.

    Directed duplicates are merged into one undirected edge and self-loops are
    dropped. Vertex and edge labels are remapped to dense ids ``0..|A|-1``; the
    raw values are kept on the corpus so they can be written back.
    """
    dir_path = Path(dir_path)
    name = _dataset_name(dir_path)
    indicator = [r[0] for r in _read_ints(dir_path / f"{name}_graph_indicator.txt", 1)]
    pairs = _read_ints(dir_path / f"{name}_A.txt", 2)

    node_path = dir_path / f"{name}_node_labels.txt"
    node_raw = [r[0] for r in _read_ints(node_path, 1)] if node_path.exists() else None
    edge_path = dir_path / f"{name}_edge_labels.txt"
    edge_raw = [r[0] for r in _read_ints(edge_path, 1)] if edge_path.exists() else None
    if node_raw is not None and len(node_raw) != len(indicator):
        raise IntegrityError(f"{node_path}: {len(node_raw)} labels for {len(indicator)} vertices")
    if edge_raw is not None and len(edge_raw) != len(pairs):
        raise IntegrityError(f"{edge_path}: {len(edge_raw)} labels for {len(pairs)} adjacency entries")

    graph_ids = sorted(set(indicator))
    if graph_ids != list(range(1, len(graph_ids) + 1)):
        raise IntegrityError("graph ids in the indicator file are not 1..N")
    local: list[int] = []
    sizes: dict[int, int] = defaultdict(int)
    for gid in indicator:
        local.append(sizes[gid])
        sizes[gid] += 1
    # vertices of one graph must be contiguous in the TU layout
    for a, b in zip(indicator, indicator[1:]):
        if b < a:
            raise IntegrityError("graph indicator is not sorted by graph id")

    vmap = {v: i for i, v in enumerate(sorted(set(node_raw)))} if node_raw is not None else None
    emap = {v: i for i, v in enumerate(sorted(set(edge_raw)))} if edge_raw is not None else None

    edges: dict[int, dict[tuple[int, int], int]] = defaultdict(dict)
    for lineno, (a, b) in enumerate(pairs, 1):
        for x in (a, b):
            if not 1 <= x <= len(indicator):
                raise IntegrityError(f"{name}_A.txt:{lineno}: vertex {x} has no graph assignment")
        ga, gb = indicator[a - 1], indicator[b - 1]
        if ga != gb:
            raise IntegrityError(f"{name}_A.txt:{lineno}: edge joins graphs {ga} and {gb}")
        if a == b:
            continue
        u, v = local[a - 1], local[b - 1]
        key = (u, v) if u < v else (v, u)
        label = emap[edge_raw[lineno - 1]] if emap is not None else 0
        prev = edges[ga].get(key)
        if prev is not None and prev != label:
            raise IntegrityError(f"{name}_A.txt:{lineno}: conflicting labels for edge {key}")
        edges[ga][key] = label

    graphs = []
    offset = 0
    for gid in graph_ids:
        n = sizes[gid]
        e = edges[gid]
        vattrs = tuple(vmap[node_raw[offset + i]] for i in range(n)) if vmap is not None else None
        eattrs = dict(e) if emap is not None else None
        graphs.append(Graph(n, tuple(e), vattrs, eattrs))
        offset += n

    split = None
    split_path = dir_path / f"{name}_split.txt"
    if split_path.exists():
        split = [line.strip() for line in open(split_path) if line.strip()]
        if len(split) != len(graphs):
            raise IntegrityError(f"{split_path}: {len(split)} entries for {len(graphs)} graphs")
    return Corpus(
        graphs,
        name=name,
        split=split,
        vertex_labels=sorted(vmap) if vmap is not None else None,
        edge_labels=sorted(emap) if emap is not None else None,
    )


def write_tu_dataset(corpus: Corpus, dir_path: str | os.PathLike, name: str | None = None) -> Path:
    """Write ``corpus`` in TUDataset layout; both directions of every edge are listed."""
    name = name or corpus.name
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)
    has_v = any(g.vertex_attrs is not None for g in corpus.graphs)
    has_e = any(g.edge_attrs is not None for g in corpus.graphs)
    vlab = corpus.vertex_labels
    elab = corpus.edge_labels
    a_lines, ind_lines, v_lines, e_lines = [], [], [], []
    base = 1
    for gid, g in enumerate(corpus.graphs, 1):
        ind_lines.extend([str(gid)] * g.n)
        if has_v:
            for a in g.vertex_attrs or (0,) * g.n:
                v_lines.append(str(vlab[a] if vlab else a))
        for u, v in g.edges:
            lab = None
            if has_e:
                a = g.edge_attrs[(u, v)] if g.edge_attrs else 0
                lab = str(elab[a] if elab else a)
            for x, y in ((u, v), (v, u)):
                a_lines.append(f"{base + x}, {base + y}")
                if lab is not None:
                    e_lines.append(lab)
        base += g.n

    def dump(suffix: str, lines: list[str]) -> None:
        with open(dir_path / f"{name}_{suffix}.txt", "w") as fh:
            fh.write("".join(line + "\n" for line in lines))

    dump("A", a_lines)
    dump("graph_indicator", ind_lines)
    if has_v:
        dump("node_labels", v_lines)
    if has_e:
        dump("edge_labels", e_lines)
    dump("split", corpus.split)
    return dir_path


def parse_edge_list(path: str | os.PathLike, name: str | None = None) -> Corpus:
    """Read the plain edge-list format (unattributed)."""
    path = Path(path)
    graphs = []
    lines = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if line:
                lines.append((lineno, line))
    i = 0
    while i < len(lines):
        lineno, line = lines[i]
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(path, lineno, "expected header 'n m'")
        try:
            n, m = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(path, lineno, "non-integer header") from None
        if m < 0 or m > len(lines) - i - 1:
            raise ParseError(path, lineno, f"header announces {m} edges but the file ends early")
        edges = set()
        for lineno_e, eline in lines[i + 1 : i + 1 + m]:
            p = eline.split()
            if len(p) != 2:
                raise ParseError(path, lineno_e, "expected edge 'u v'")
            try:
                u, v = int(p[0]), int(p[1])
            except ValueError:
                raise ParseError(path, lineno_e, "non-integer vertex id") from None
            if not (0 <= u < n and 0 <= v < n):
                raise IntegrityError(f"{path}:{lineno_e}: vertex out of range for n={n}")
            if u != v:
                edges.add((min(u, v), max(u, v)))
        try:
            graphs.append(Graph(n, tuple(edges)))
        except GraphError as exc:
            raise IntegrityError(f"{path}:{lineno}: {exc}") from None
        i += 1 + m
    return Corpus(graphs, name=name or path.stem)


def write_edge_list(corpus: Corpus, path: str | os.PathLike) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        for g in corpus.graphs:
            fh.write(f"{g.n} {g.m}\n")
            for u, v in g.edges:
                fh.write(f"{u} {v}\n")
    return path


def load_corpus(spec: str | os.PathLike) -> Corpus:
    """Load a corpus from a TU directory, an edge-list file, or a dataset name.

    Bare names are looked up under ``$PNC_DATA_DIR``.
    """
    path = Path(spec)
    if not path.exists():
        root = os.environ.get("PNC_DATA_DIR")
        if root and (Path(root) / str(spec)).exists():
            path = Path(root) / str(spec)
        else:
            raise FileNotFoundError(f"dataset {spec!r} not found (set PNC_DATA_DIR or pass a path)")
    if path.is_dir():
        return parse_tu_dataset(path)
    return parse_edge_list(path)


def fetch_tu_dataset(name: str, root: str | os.PathLike | None = None) -> Path:
    """Download and unpack a TUDataset archive by name (requires network)."""
    root = Path(root or os.environ.get("PNC_DATA_DIR") or ".")
    target = root / name
    if target.exists():
        return target
    root.mkdir(parents=True, exist_ok=True)
    archive = root / f"{name}.zip"
    with urllib.request.urlopen(TU_URL.format(name=name), timeout=60) as resp, open(archive, "wb") as fh:
        shutil.copyfileobj(resp, fh)
    with zipfile.ZipFile(archive) as zf:
        zf.extractall(root)
    archive.unlink()
    return target
