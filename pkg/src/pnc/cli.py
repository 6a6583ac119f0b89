"""Command line entry point: ``pnc <command> [flags]``.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 integrity failure
(checksum, round trip, failed theory check), 4 training divergence or
non-finite gradient.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .bundle import ModelBundle, dictionary_dot, dictionary_text
from .canon import K_MAX
from .codec import ArchiveError, compress_corpus, decompress_corpus, verify_roundtrip
from .codelen import format_table, null_model_rows
from .graph import Corpus
from .partition import PARTITIONERS
from .trainer import TrainConfig, TrainingDivergence, TrainingFault, train
from .tudataset import IntegrityError, ParseError, load_corpus, write_edge_list, write_tu_dataset

EXIT_USAGE, EXIT_IO, EXIT_INTEGRITY, EXIT_DIVERGED = 1, 2, 3, 4

log = logging.getLogger("pnc")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _partition_one(args):
    bundle, idx, g = args
    return bundle.partition(g, idx)


def partition_corpus(bundle: ModelBundle, graphs, jobs: int | None):
    """Partitions for ``graphs`` in order, optionally over several processes."""
    jobs = jobs or os.cpu_count() or 1
    work = [(bundle, i, g) for i, g in enumerate(graphs)]
    if jobs <= 1 or len(work) < 64:
        return [_partition_one(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_partition_one, work, chunksize=max(1, len(work) // (4 * jobs))))


def _graphs_for(corpus: Corpus, split: str, attributed: bool):
    graphs = corpus.subset(split)
    if not attributed:
        from .graph import Graph
        graphs = [Graph(g.n, g.edges) if g.attributed else g for g in graphs]
    return graphs


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- commands --------------------------------------------------------------------

def cmd_train(a) -> int:
    corpus = load_corpus(a.dataset)
    cfg = TrainConfig.load(a.config) if a.config else TrainConfig()
    cfg.epochs = a.epochs if a.epochs is not None else cfg.epochs
    cfg.seed = a.seed
    cfg.k_max = a.kmax
    cfg.attributed = a.attributed or cfg.attributed
    if a.optimizer:
        cfg.optimizer = a.optimizer
    res = train(corpus, cfg, a.partitioner)
    bundle = ModelBundle(res.model, a.partitioner, a.seed, res.theta, corpus.name,
                         config=vars(cfg).copy(),
                         train_stats=res.train_report.stats_lines() if res.train_report else [])
    out = a.out or f"{corpus.name}.model.json"
    bundle.save(out)
    if a.log:
        res.log.to_csv(a.log)
    print(f"trained on {len(corpus.subset('train'))} graphs; best epoch {res.best_epoch}; "
          f"{len(res.model.atoms)} atoms; model written to {out}")
    return 0


def cmd_compress(a) -> int:
    bundle = ModelBundle.load(a.model)
    corpus = load_corpus(a.dataset)
    graphs = _graphs_for(corpus, a.split, bundle.model.attributed)
    parts = partition_corpus(bundle, graphs, a.jobs)
    res = compress_corpus(graphs, bundle.model, parts)
    out = a.out or f"{corpus.name}.pnc"
    Path(out).write_bytes(res.data)
    edges = sum(g.m for g in graphs)
    print(f"{len(graphs)} graphs, {edges} edges -> {len(res.data)} bytes "
          f"({8 * len(res.data) / max(edges, 1):.4f} bpe realized, {res.report.bpe:.4f} bpe ideal)")
    if a.verify:
        dec = decompress_corpus(res.data)
        ok = verify_roundtrip(res, dec)
        if not all(ok):
            print(f"round trip failed for {ok.count(False)} graphs", file=sys.stderr)
            return EXIT_INTEGRITY
        print(f"round trip verified for {len(ok)} graphs")
    return 0


def cmd_decompress(a) -> int:
    data = Path(a.archive).read_bytes()
    dec = decompress_corpus(data, name=Path(a.archive).stem)
    if a.dataset:
        if not a.model:
            raise UsageError("--dataset needs --model to re-derive the reference witnesses")
        bundle = ModelBundle.load(a.model)
        corpus = load_corpus(a.dataset)
        graphs = _graphs_for(corpus, a.split, bundle.model.attributed)
        res = compress_corpus(graphs, bundle.model, partition_corpus(bundle, graphs, a.jobs))
        ok = verify_roundtrip(res, dec)
        if not all(ok):
            print(f"isomorphism witness mismatch for {ok.count(False)} of {len(ok)} graphs", file=sys.stderr)
            return EXIT_INTEGRITY
        print(f"isomorphism witnesses match for {len(ok)} graphs")
    if a.out:
        if a.format == "edgelist":
            write_edge_list(dec.corpus, a.out)
        else:
            write_tu_dataset(dec.corpus, a.out)
    print(f"decoded {len(dec.corpus)} graphs")
    return 0


def cmd_stats(a) -> int:
    bundle = ModelBundle.load(a.model)
    corpus = load_corpus(a.dataset)
    graphs = _graphs_for(corpus, a.split, bundle.model.attributed)
    parts = partition_corpus(bundle, graphs, a.jobs)
    rep = bundle.model.corpus_report(parts)
    rows = null_model_rows(graphs, corpus.name, a.nmax)
    rows.append(rep.table_row(corpus.name, f"pnc+{bundle.partitioner}"))
    text = format_table(rows)
    if a.breakdown:
        text += "\n" + "\n".join(rep.stats_lines()) + "\n"
    _write(text, a.out)
    return 0


def cmd_bench_null(a) -> int:
    corpus = load_corpus(a.dataset)
    graphs = corpus.subset(a.split)
    _write(format_table(null_model_rows(graphs, corpus.name, a.nmax)), a.out)
    return 0


def cmd_verify_theory(a) -> int:
    from .theory import PRESETS, run_preset
    names = sorted(PRESETS) if a.preset == "all" else [a.preset]
    if any(n not in PRESETS for n in names):
        raise UsageError(f"unknown preset {a.preset!r}; choose from {sorted(PRESETS)} or 'all'")
    chunks, ok = [], True
    for name in names:
        rep = run_preset(name, a.samples)
        ok &= rep.passed
        chunks.append(rep.to_csv() if a.format == "csv" else f"### {name}\n\n{rep.to_markdown()}")
    _write("\n".join(chunks), a.out)
    return 0 if ok else EXIT_INTEGRITY


def cmd_dump_dict(a) -> int:
    bundle = ModelBundle.load(a.model)
    fn = dictionary_dot if a.format == "dot" else dictionary_text
    _write(fn(bundle.model, a.top), a.out)
    return 0


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pnc", description="Partition-and-code graph compression.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, dataset=True, split="all"):
        if dataset:
            sp.add_argument("--dataset", required=True, help="TU directory, edge-list file, or name under $PNC_DATA_DIR")
        sp.add_argument("--split", default=split, choices=("train", "test", "all"))
        sp.add_argument("--out")
        sp.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")

    t = sub.add_parser("train", help="fit dictionary and model; writes a model bundle")
    common(t, split="train")
    t.add_argument("--partitioner", default="modularity", choices=sorted(PARTITIONERS) + ["policy"])
    t.add_argument("--kmax", type=int, default=K_MAX)
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--optimizer", choices=("adam", "sgd"))
    t.add_argument("--attributed", action="store_true")
    t.add_argument("--config", help="JSON training config")
    t.add_argument("--log", help="per-epoch CSV log")
    t.set_defaults(fn=cmd_train)

    c = sub.add_parser("compress", help="write an archive")
    common(c)
    c.add_argument("--model", required=True)
    c.add_argument("--verify", action="store_true", help="decode again and check every graph")
    c.set_defaults(fn=cmd_compress)

    d = sub.add_parser("decompress", help="decode an archive")
    d.add_argument("archive")
    d.add_argument("--dataset", help="original corpus, to check isomorphism witnesses")
    d.add_argument("--model", help="model used for compression (with --dataset)")
    d.add_argument("--split", default="all", choices=("train", "test", "all"))
    d.add_argument("--format", default="tu", choices=("tu", "edgelist"))
    d.add_argument("--out")
    d.add_argument("--jobs", type=int, default=None)
    d.set_defaults(fn=cmd_decompress)

    s = sub.add_parser("stats", help="bits-per-edge table for a trained model")
    common(s)
    s.add_argument("--model", required=True)
    s.add_argument("--nmax", type=int, default=None)
    s.add_argument("--breakdown", action="store_true", help="append the component breakdown")
    s.set_defaults(fn=cmd_stats)

    b = sub.add_parser("bench-null", help="null-model rows (uniform, edge list, Erdos-Renyi)")
    common(b)
    b.add_argument("--nmax", type=int, default=None, help="vertex-count bound (default: dataset max)")
    b.set_defaults(fn=cmd_bench_null)

    v = sub.add_parser("verify-theory", help="Monte-Carlo checks of the length orderings")
    v.add_argument("--preset", default="all")
    v.add_argument("--samples", type=int, default=None)
    v.add_argument("--format", default="md", choices=("md", "csv"))
    v.add_argument("--out")
    v.set_defaults(fn=cmd_verify_theory)

    dd = sub.add_parser("dump-dict", help="print dictionary atoms as text or DOT")
    dd.add_argument("--model", required=True)
    dd.add_argument("--top", type=int, default=None)
    dd.add_argument("--format", default="text", choices=("text", "dot"))
    dd.add_argument("--out")
    dd.set_defaults(fn=cmd_dump_dict)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
        if a.command is None:
            raise UsageError("a command is required")
        logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        return a.fn(a)
    except UsageError as exc:
        print(f"pnc: usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (ArchiveError, IntegrityError) as exc:
        print(f"pnc: integrity error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except (TrainingDivergence, TrainingFault) as exc:
        print(f"pnc: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (OSError, ParseError) as exc:
        print(f"pnc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
