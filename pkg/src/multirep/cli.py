"""Command-line entry point: ``multirep <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric fault.
"""
from __future__ import annotations

import argparse
import csv
import gc
import io
import logging
import os
import statistics
import sys
import time
import warnings
from importlib import metadata
from pathlib import Path
from typing import Callable, Optional, Sequence

from .config import ENV_PREFIX, ConfigError, RunConfig, resolve_config
from .corpus import (
    ALL_KINDS, ClassTooSmall, FormatError, Sample, Vocabularies, build_samples, build_vocabularies,
    load_sources, make_splits, read_dataset, write_dataset,
)
from .neural import (
    REPRESENTATION_COMBINATIONS, ChecksumMismatch, NumericFault, VocabMismatch, forward, iter_batches, load_checkpoint,
)
from .paths import PathKind
from .synth import PROBLEMS, write_corpus
from .tasks import (
    CodeVectorStore, InsufficientPairs, detect_clones, evaluate_classification, evaluate_method_naming,
    export_code_vectors, sample_clone_pairs, score_pairs, sweep_csv, threshold_sweep, train_task,
)

log = logging.getLogger("multirep")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
SPLITS = ("train", "test", "validation")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class MissingArtifact(DataError):
    def __init__(self, path: Path, producer: str):
        super().__init__(f"missing {path}; run `multirep {producer}` first")


def version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


# ---------------------------------------------------------------------------
# Run directory

class Run:
    """Output directory holding the resolved config, a log, metrics and a version stamp."""

    def __init__(self, out: Path, config: RunConfig, command: str):
        self.out, self.command = out, command
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(config.dumps(), encoding="utf-8")
        (out / "VERSION").write_text(f"multirep {version()}\n", encoding="utf-8")
        self.handler = logging.FileHandler(out / f"{command}.log", mode="w", encoding="utf-8")
        self.handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        logging.getLogger().addHandler(self.handler)
        self.metrics: list[tuple[str, str]] = []

    def metric(self, name: str, value) -> None:
        self.metrics.append((name, value if isinstance(value, str) else f"{value:.6f}"))

    def close(self, summary: str = "") -> None:
        with open(self.out / f"{self.command}_metrics.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["metric", "value"])
            writer.writerows(self.metrics)
        if summary:
            (self.out / f"{self.command}_summary.txt").write_text(summary, encoding="utf-8")
        logging.getLogger().removeHandler(self.handler)
        self.handler.close()


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise MissingArtifact(path, producer)
    return path


def _load_splits(data: Path) -> dict[str, list[Sample]]:
    return {s: read_dataset(_require(data / f"{s}.txt", "extract")) for s in SPLITS}


def _load_vocab(data: Path) -> Vocabularies:
    return Vocabularies.load(_require(data / "vocab.tsv", "extract"))


def _checkpoint(args, out: Path) -> Path:
    return _require(Path(args.checkpoint) if args.checkpoint else out / "model.ckpt", "train")


# ---------------------------------------------------------------------------
# Commands

def cmd_extract(args, config: RunConfig) -> int:
    src, out = Path(args.input), Path(args.out)
    if not src.is_dir():
        raise DataError(f"input directory {src} does not exist")
    sources = load_sources(src, config.task)
    if not sources:
        raise DataError(f"no .c or .dot files under {src}")
    run = Run(out, config, "extract")
    workers = config.workers or os.cpu_count() or 1
    started = time.perf_counter()
    samples, drops = build_samples(sources, config.task, config.limits, ALL_KINDS, workers)
    elapsed = time.perf_counter() - started
    if not samples:
        run.close()
        raise DataError(f"no valid samples in {src} ({drops.total} dropped)")
    (out / "drops.csv").write_text(drops.to_csv(), encoding="utf-8")
    stratified = config.task == "file_level"
    train, test, validation = make_splits(samples, config.split, stratified, config.min_class_size)
    for name, part in zip(SPLITS, (train, test, validation)):
        write_dataset(part, out / f"{name}.txt")
    build_vocabularies(train, config.min_count).save(out / "vocab.tsv")

    averages = {k: statistics.mean(len(s.contexts(k)) for s in samples) for k in ALL_KINDS}
    table = io.StringIO()
    table.write(f"{'samples':>8} {'AST':>8} {'CFG':>8} {'PDG':>8}\n")
    table.write(f"{len(samples):>8} " + " ".join(f"{averages[k]:>8.1f}" for k in ALL_KINDS) + "\n")
    print(table.getvalue(), end="")
    print(f"dropped {drops.total} ({', '.join(f'{r}={c}' for r, c in sorted(drops.counts.items())) or 'none'})")
    for k in ALL_KINDS:
        run.metric(f"avg_{k.value.lower()}_paths", averages[k])
    run.metric("samples", str(len(samples)))
    run.metric("dropped", str(drops.total))
    run.metric("seconds", elapsed)
    run.close(f"extracted {len(samples)} samples from {len(sources)} files in {elapsed:.1f}s\n"
              f"splits train/test/validation: {len(train)}/{len(test)}/{len(validation)}\n"
              f"average path contexts per sample\n{table.getvalue()}")
    return EXIT_OK


def cmd_train(args, config: RunConfig) -> int:
    data, out = Path(args.data), Path(args.out)
    splits, vocabs = _load_splits(data), _load_vocab(data)
    run = Run(out, config, "train")
    started = time.perf_counter()
    result = train_task(config.train, splits["train"], splits["validation"], vocabs, config.limits,
                        out / "train_log.csv", out / "model.ckpt",
                        on_epoch=lambda row: log.info("epoch %(epoch)d %(split)s loss=%(loss).4f "
                                                      "metric=%(metric).4f", row))
    elapsed = time.perf_counter() - started
    run.metric("best_epoch", str(result.best_epoch))
    run.metric("best_validation_metric", result.best_metric)
    run.metric("seconds", elapsed)
    print(f"best epoch {result.best_epoch}: validation metric {result.best_metric:.4f}")
    run.close(f"trained {','.join(k.value for k in config.kinds)} on {len(splits['train'])} samples "
              f"in {elapsed:.1f}s\nbest epoch {result.best_epoch}, validation metric {result.best_metric:.4f}\n")
    return EXIT_OK


def _model_for(args, out: Path, vocabs: Vocabularies):
    return load_checkpoint(_checkpoint(args, out), vocabs.digest())


def cmd_eval(args, config: RunConfig) -> int:
    data, out = Path(args.data), Path(args.out)
    vocabs = _load_vocab(data)
    model = _model_for(args, out, vocabs)
    samples = read_dataset(_require(data / f"{args.split}.txt", "extract"))
    run = Run(out, config, "eval")
    if config.task == "method_level":
        m = evaluate_method_naming(model, samples, vocabs, config.limits)
        run.metric("precision", m.precision)
        run.metric("recall", m.recall)
        run.metric("f1", m.f1)
        text = f"{args.split}: precision {m.precision:.4f} recall {m.recall:.4f} f1 {m.f1:.4f}\n"
    else:
        report = evaluate_classification(model, samples, vocabs, config.limits)
        (out / "confusion.csv").write_text(report.confusion_csv(), encoding="utf-8")
        run.metric("accuracy", report.accuracy)
        text = f"{args.split}: accuracy {report.accuracy:.4f} over {len(samples)} samples\n"
    print(text, end="")
    run.close(text)
    return EXIT_OK


def cmd_embed(args, config: RunConfig) -> int:
    data, out = Path(args.data), Path(args.out)
    vocabs = _load_vocab(data)
    model = _model_for(args, out, vocabs)
    samples = read_dataset(_require(data / f"{args.split}.txt", "extract"))
    run = Run(out, config, "embed")
    store = export_code_vectors(model, samples, vocabs, [f"{args.split}:{i}" for i in range(len(samples))],
                                config.limits)
    store.save(out / "vectors.tsv")
    run.metric("vectors", str(len(store)))
    run.metric("width", str(store.dim))
    print(f"wrote {len(store)} code vectors of width {store.dim}")
    run.close(f"{len(store)} {args.split} code vectors of width {store.dim}\n")
    return EXIT_OK


def _scored_pairs(out: Path, config: RunConfig, vectors: Optional[str]):
    store = CodeVectorStore.load(_require(Path(vectors) if vectors else out / "vectors.tsv", "embed"))
    preset = config.clones
    n_classes = min(preset.n_classes, len(set(store.labels)))
    if n_classes < preset.n_classes:
        log.warning("store has only %d classes; using all of them", n_classes)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", InsufficientPairs)
        pairs = sample_clone_pairs(store, n_classes, preset.n_true, preset.n_false, config.seed)
    for w in caught:
        log.warning("%s", w.message)
    return score_pairs(store, pairs)


def cmd_clones(args, config: RunConfig) -> int:
    out = Path(args.out)
    pairs = _scored_pairs(out, config, args.vectors)
    run = Run(out, config, "clones")
    fixed = detect_clones(pairs, config.theta)
    best_theta, curve = threshold_sweep(pairs)
    best = detect_clones(pairs, best_theta)
    (out / "sweep.csv").write_text(sweep_csv(curve), encoding="utf-8")
    n_true = sum(p.ground_truth for p in pairs)
    run.metric("true_pairs", str(n_true))
    run.metric("false_pairs", str(len(pairs) - n_true))
    for tag, r in ((f"theta_{config.theta:g}", fixed), ("swept", best)):
        run.metric(f"{tag}_precision", r.precision)
        run.metric(f"{tag}_recall", r.recall)
        run.metric(f"{tag}_f1", r.f1)
    run.metric("swept_theta", best_theta)
    text = (f"{n_true} clone + {len(pairs) - n_true} non-clone pairs\n"
            f"theta={config.theta:g}: precision {fixed.precision:.4f} recall {fixed.recall:.4f} f1 {fixed.f1:.4f}\n"
            f"best theta={best_theta:.2f}: precision {best.precision:.4f} recall {best.recall:.4f} "
            f"f1 {best.f1:.4f}\n")
    print(text, end="")
    run.close(text)
    return EXIT_OK


def cmd_sweep(args, config: RunConfig) -> int:
    out = Path(args.out)
    pairs = _scored_pairs(out, config, args.vectors)
    run = Run(out, config, "sweep")
    best_theta, curve = threshold_sweep(pairs)
    (out / "sweep.csv").write_text(sweep_csv(curve), encoding="utf-8")
    best_f1 = max(c[3] for c in curve)
    run.metric("best_theta", best_theta)
    run.metric("best_f1", best_f1)
    text = f"best theta {best_theta:.2f} with f1 {best_f1:.4f}\n"
    print(text, end="")
    run.close(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Benchmarks

def _timed_round_robin(jobs: Sequence[Callable[[], int]], reps: int) -> list[list[float]]:
    """Seconds per repetition for each job, after one warmup each.

    Repetitions are interleaved across jobs so slow drift in machine load
    affects every job alike; the garbage collector is paused while timing.
    """
    for fn in jobs:
        fn()
    times: list[list[float]] = [[] for _ in jobs]
    enabled = gc.isenabled()
    try:
        for _ in range(reps):
            for i, fn in enumerate(jobs):
                gc.collect()
                gc.disable()
                started = time.perf_counter()
                fn()
                times[i].append(time.perf_counter() - started)
                if enabled:
                    gc.enable()
    finally:
        if enabled:
            gc.enable()
    return times


def benchmark(phase: str, config: RunConfig, sources=None, splits=None, vocabs=None,
              combos: Sequence[tuple[PathKind, ...]] = REPRESENTATION_COMBINATIONS) -> list[dict]:
    """Throughput per representation combination: samples/minute for
    extraction, samples/second for training and inference."""
    if phase == "extract":
        n = len(sources or [])
        unit, scale = "samples/minute", 60.0
        jobs = [lambda kinds=kinds: len(build_samples(sources, config.task, config.limits, kinds, 1)[0])
                for kinds in combos]
    else:
        data = (splits or {}).get("train" if phase == "train" else "test", [])
        n = len(data)
        unit, scale = "samples/second", 1.0
        make = _train_epoch if phase == "train" else _infer_pass
        jobs = [make(config, kinds, data, vocabs) for kinds in combos] if n else []
    names = ["+".join(k.value for k in kinds) for kinds in combos]
    if n == 0:
        return [{"representations": name, "unit": unit, "mean": "n/a", "std": "n/a", "reps": 0} for name in names]
    rows = []
    for name, times in zip(names, _timed_round_robin(jobs, config.bench_reps)):
        rates = [scale * n / t for t in times]
        rows.append({"representations": name, "unit": unit, "mean": statistics.mean(rates),
                     "std": statistics.stdev(rates), "reps": len(rates)})
    return rows


def _fresh_model(config: RunConfig, kinds, vocabs: Vocabularies):
    from .neural import Model, ModelConfig
    return Model(ModelConfig(len(vocabs.labels), len(vocabs.tokens), {k: len(v) for k, v in vocabs.paths.items()},
                             config.dim, kinds, config.dropout, config.dtype, config.seed))


def _train_epoch(config: RunConfig, kinds, data: Sequence[Sample], vocabs: Vocabularies) -> Callable[[], int]:
    from .neural import AdamState, adam_step, backward, batch_loss
    usable = [s for s in data if s.label in vocabs.labels]

    def work() -> int:
        model, state = _fresh_model(config, kinds, vocabs), AdamState()
        for batch in iter_batches(usable, vocabs, kinds, config.batch_size, config.limits):
            result = forward(model, batch, training=True)
            batch_loss(result, batch.labels)
            adam_step(model.params, backward(model, batch, result), state, lr=config.lr)
        return len(usable)
    return work


def _infer_pass(config: RunConfig, kinds, data: Sequence[Sample], vocabs: Vocabularies) -> Callable[[], int]:
    model = _fresh_model(config, kinds, vocabs)

    def work() -> int:
        for batch in iter_batches(data, vocabs, kinds, config.batch_size, config.limits):
            forward(model, batch)
        return len(data)
    return work


def bench_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["representations", "unit", "mean", "std", "reps"])
    for r in rows:
        fmt = (lambda v: v if isinstance(v, str) else f"{v:.3f}")
        writer.writerow([r["representations"], r["unit"], fmt(r["mean"]), fmt(r["std"]), r["reps"]])
    return buf.getvalue()


def cmd_bench(args, config: RunConfig) -> int:
    out = Path(args.out)
    sources = splits = vocabs = None
    if args.phase == "extract":
        if not args.input:
            raise UsageError("bench --phase extract needs --input")
        src = Path(args.input)
        if not src.is_dir():
            raise DataError(f"input directory {src} does not exist")
        sources = load_sources(src, config.task)
    else:
        data = Path(args.data)
        splits, vocabs = _load_splits(data), _load_vocab(data)
    run = Run(out, config, "bench")
    rows = benchmark(args.phase, config, sources, splits, vocabs)
    text = bench_csv(rows)
    (out / f"bench_{args.phase}.csv").write_text(text, encoding="utf-8")
    for r in rows:
        run.metric(f"{r['representations']}_mean", r["mean"] if isinstance(r["mean"], str) else r["mean"])
    print(text, end="")
    run.close(f"{args.phase} throughput over {config.bench_reps} repetitions after one warmup\n{text}")
    return EXIT_OK


def cmd_synth(args, config: RunConfig) -> int:
    if not 1 <= args.classes <= len(PROBLEMS):
        raise UsageError(f"--classes must be between 1 and {len(PROBLEMS)}")
    write_corpus(args.out, args.classes, args.per_class, config.seed)
    print(f"wrote {args.classes * args.per_class} files under {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help=f"override one configuration key (also settable as {ENV_PREFIX}KEY)")
    common.add_argument("--representations", help="comma-separated subset of ast,cfg,pdg (ast required)")
    common.add_argument("--seed", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="multirep", description="Path-context code embeddings over AST, CFG and PDG.")
    parser.add_argument("--version", action="version", version=f"multirep {version()}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", parents=[common], help="build dataset splits and vocabularies from sources")
    p.add_argument("--input", required=True, help="directory of .c or .dot files (class = parent directory)")
    p.add_argument("--out", required=True, help="dataset directory")
    p.add_argument("--workers", type=int, help="extraction processes (default: CPU count)")
    p.set_defaults(func=cmd_extract)

    for name, func, text in (("train", cmd_train, "train a model on an extracted dataset"),
                             ("eval", cmd_eval, "evaluate a trained model"),
                             ("embed", cmd_embed, "export code vectors")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--data", required=True, help="dataset directory written by extract")
        p.add_argument("--out", required=True, help="run directory")
        if name != "train":
            p.add_argument("--checkpoint", help="model checkpoint (default: <out>/model.ckpt)")
            p.add_argument("--split", choices=SPLITS, default="test")
        p.set_defaults(func=func)

    for name, func, text in (("clones", cmd_clones, "score clone pairs at a fixed threshold and by sweep"),
                             ("sweep", cmd_sweep, "F1 over a threshold grid")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--out", required=True, help="run directory")
        p.add_argument("--vectors", help="code vector file (default: <out>/vectors.tsv)")
        p.add_argument("--preset", help="clone pair protocol: desk or paper-ojclone")
        p.set_defaults(func=func)

    p = sub.add_parser("bench", parents=[common], help="throughput per representation combination")
    p.add_argument("--phase", choices=("extract", "train", "infer"), required=True)
    p.add_argument("--input", help="source directory (extract phase)")
    p.add_argument("--data", help="dataset directory (train and infer phases)")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--reps", type=int, help="timed repetitions (at least 3)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic OJ-style corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--per-class", type=int, default=100)
    p.set_defaults(func=cmd_synth)
    return parser


def _overrides(args) -> dict[str, str]:
    values = {}
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        values[key] = value
    for key, attr in (("representations", "representations"), ("seed", "seed"), ("workers", "workers"),
                      ("clone_preset", "preset"), ("bench_reps", "reps")):
        value = getattr(args, attr, None)
        if value is not None:
            values[key] = str(value)
    return values


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger().setLevel(logging.INFO)
    for h in logging.getLogger().handlers:
        h.setLevel(logging.INFO if args.verbose else logging.WARNING)
    try:
        config = resolve_config(args.config, _overrides(args))
        return args.func(args, config)
    except (UsageError, ConfigError) as exc:
        print(f"multirep: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FormatError, ClassTooSmall, ChecksumMismatch, VocabMismatch, ValueError, OSError) as exc:
        print(f"multirep: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericFault as exc:
        print(f"multirep: numeric fault: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
