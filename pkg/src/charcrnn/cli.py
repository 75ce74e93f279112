"""Command-line entry point for reproducible runs.

Commands: stats | train | eval | sweep | bench | gradcheck. Settings
resolve as defaults < config file (`key=value` lines, # comments) <
flags, and every run echoes the fully resolved settings before any
other output. Exit codes: 0 success, 1 failed check, 2 usage or input
error.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from .alphabet import build_alphabet, encode
from .cells import CELL_KINDS, param_count
from .corpus import CorpusError, SplitPlan, load_corpus, split, stats, stats_csv, stats_table
from .evalbench import bench_cells, bench_csv, evaluate, metrics_csv
from .model import ConfigError, CRNNConfig, init_params
from .model import loss as batch_loss
from .rng import named_rng
from .tensor import grad_check
from .train import (
    CheckpointError,
    TrainPlan,
    load_checkpoint,
    save_checkpoint,
    sweep_alpha,
    train,
    trace_csv,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2

_KEY_TYPES = {
    "filters": int,
    "hidden": int,
    "window": int,
    "pool": int,
    "seq_len": int,
    "alpha": float,
    "cell": str,
    "seed": int,
    "steps": int,
    "batch_size": int,
    "eval_every": int,
    "clip": float,
    "lr": float,
    "train_count": int,
    "test_count": int,
}

_DEFAULTS = {
    "filters": 400,
    "hidden": 400,
    "window": 20,
    "pool": 2,
    "seq_len": 500,
    "alpha": 0.7,
    "cell": "gru",
    "seed": 0,
    "steps": 1000,
    "batch_size": 50,
    "eval_every": 0,
    "clip": 5.0,
    "lr": 0.01,
    "train_count": None,
    "test_count": None,
}


def _parse_config_file(path):
    values = {}
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not eq:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            if key not in _KEY_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _KEY_TYPES[key](value)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}")
    return values


def _resolve(args):
    values = dict(_DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path:
        values.update(_parse_config_file(config_path))
    for key in _KEY_TYPES:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return values


def _echo(settings, out=None):
    out = out if out is not None else sys.stdout
    print("# resolved-config", file=out)
    for key in sorted(settings):
        print(f"{key}={settings[key]}", file=out)
    print(file=out)


def _model_config(values, num_classes):
    return CRNNConfig(
        num_classes=num_classes,
        filters=values["filters"],
        hidden=values["hidden"],
        window=values["window"],
        pool=values["pool"],
        seq_len=values["seq_len"],
        alpha=values["alpha"],
        cell=values["cell"],
        seed=values["seed"],
    ).validate()


def _train_plan(values):
    return TrainPlan(
        steps=values["steps"],
        batch_size=values["batch_size"],
        seed=values["seed"],
        eval_every=values["eval_every"],
        clip=values["clip"],
    ).validate()


def _split_counts(values, size):
    test_count = values["test_count"]
    if test_count is None:
        test_count = max(1, size // 10)
    train_count = values["train_count"]
    if train_count is None:
        train_count = size - test_count
    return train_count, test_count


def _metrics_table(report):
    lines = ["class  precision  recall  f1"]
    for c, (p, r, f1) in enumerate(report.per_class):
        lines.append(f"{c:<5}  {p:9.4f}  {r:6.4f}  {f1:6.4f}")
    lines.append(
        f"macro  {report.macro_precision:9.4f}  {report.macro_recall:6.4f}  "
        f"{report.macro_f1:6.4f}"
    )
    return "\n".join(lines)


def _print_metrics(report, fmt):
    print(metrics_csv(report) if fmt == "csv" else _metrics_table(report))


# ---------------------------------------------------------------------------
# commands


def cmd_stats(args):
    _resolve(args)  # validates any --config file even though stats ignores it
    corpus = load_corpus(args.corpus)
    _echo({"corpus": args.corpus, "format": args.format})
    row = stats(corpus)
    print(stats_csv([row]) if args.format == "csv" else stats_table([row]))
    return EXIT_OK


def cmd_train(args):
    values = _resolve(args)
    corpus = load_corpus(args.corpus)
    config = _model_config(values, corpus.class_count)
    plan = _train_plan(values)
    train_count, test_count = _split_counts(values, len(corpus))
    split_plan = SplitPlan(
        train_count=train_count,
        test_count=test_count,
        batch_size=values["batch_size"],
        seed=values["seed"],
    )
    out_dir = Path(args.out_dir)
    _echo({**values, "corpus": args.corpus, "out_dir": str(out_dir),
           "train_count": train_count, "test_count": test_count})

    train_c, test_c = split(corpus, split_plan)
    params, trace = train(config, train_c, plan, test=test_c, lr=values["lr"])

    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = out_dir / "model.ckpt"
    save_checkpoint(config, params, ckpt_path)
    trace_path = out_dir / "trace.csv"
    trace_path.write_text(trace_csv(trace), encoding="utf-8")

    report = evaluate(config, params, test_c)
    print(f"checkpoint={ckpt_path}")
    print(f"trace={trace_path}")
    _print_metrics(report, args.format)
    return EXIT_OK


def cmd_eval(args):
    config, params = load_checkpoint(args.checkpoint)
    corpus = load_corpus(args.corpus)
    _echo({"checkpoint": args.checkpoint, "corpus": args.corpus, "format": args.format,
           "cell": config.cell, "alpha": config.alpha, "num_classes": config.num_classes})
    if corpus.class_count != config.num_classes:
        raise ConfigError(
            f"checkpoint was trained for {config.num_classes} classes "
            f"but the corpus has {corpus.class_count}"
        )
    report = evaluate(config, params, corpus)
    _print_metrics(report, args.format)
    return EXIT_OK


def cmd_sweep(args):
    values = _resolve(args)
    if args.alphas:
        alphas = [float(a) for a in args.alphas.split(",") if a.strip()]
    else:
        alphas = [round(0.1 * i, 1) for i in range(1, 10)]
    corpus = load_corpus(args.corpus)
    config = _model_config(values, corpus.class_count)
    plan = _train_plan(values)
    train_count, test_count = _split_counts(values, len(corpus))
    split_plan = SplitPlan(
        train_count=train_count,
        test_count=test_count,
        batch_size=values["batch_size"],
        seed=values["seed"],
    )
    _echo({**values, "corpus": args.corpus, "alphas": ",".join(str(a) for a in alphas),
           "train_count": train_count, "test_count": test_count})

    train_c, test_c = split(corpus, split_plan)
    rows, best = sweep_alpha(config, train_c, test_c, alphas, plan, lr=values["lr"])
    print("alpha,precision,recall,f1")
    for row in sorted(rows, key=lambda r: -r.f1):
        print(f"{row.alpha},{row.precision:.6f},{row.recall:.6f},{row.f1:.6f}")
    print(f"best_alpha={best.alpha}")
    return EXIT_OK


def cmd_bench(args):
    values = _resolve(args)
    cells = [c.strip() for c in args.cells.split(",")] if args.cells else list(CELL_KINDS)
    for c in cells:
        if c not in CELL_KINDS:
            raise ConfigError(f"unknown cell {c!r}, expected one of {CELL_KINDS}")
    steps = args.steps if args.steps is not None else 30
    corpus = load_corpus(args.corpus)
    config = _model_config(values, max(2, corpus.class_count))
    _echo({**values, "corpus": args.corpus, "cells": ",".join(cells), "steps": steps})

    for kind in cells:
        count = param_count(kind, config.filters, config.hidden)
        print(f"param_count[{kind}]={count}")
    results = bench_cells(
        config,
        corpus,
        cells,
        steps=steps,
        batch_size=min(values["batch_size"], len(corpus)),
        lr=values["lr"],
        clip=values["clip"],
        seed=values["seed"],
    )
    print(bench_csv(results))
    return EXIT_OK


def _gradcheck_batch(config, seed, batch_size=3):
    rng = named_rng(seed, "gradcheck-data")
    chars = build_alphabet().chars
    batch = []
    for i in range(batch_size):
        text = "".join(chars[int(rng.integers(len(chars)))] for _ in range(config.seq_len))
        batch.append((encode(text, config.seq_len), i % config.num_classes))
    return batch


def cmd_gradcheck(args):
    values = _resolve(args)
    cells = [c.strip() for c in args.cells.split(",")] if args.cells else list(CELL_KINDS)
    for c in cells:
        if c not in CELL_KINDS:
            raise ConfigError(f"unknown cell {c!r}, expected one of {CELL_KINDS}")
    _echo({"cells": ",".join(cells), "tol": args.tol, "h": args.h,
           "samples": args.samples, "seed": values["seed"]})

    failed = False
    for kind in cells:
        config = CRNNConfig(
            num_classes=3, filters=8, hidden=8, window=5, pool=2,
            seq_len=40, alpha=0.5, cell=kind, seed=values["seed"],
        ).validate()
        params = init_params(config)
        batch = _gradcheck_batch(config, values["seed"])
        report = grad_check(
            lambda: batch_loss(config, params, batch),
            params.blocks(),
            h=args.h,
            tol=args.tol,
            samples_per_block=args.samples,
            rng=named_rng(values["seed"], "gradcheck-sample"),
        )
        worst = max(report.per_block, key=report.per_block.get)
        verdict = "PASS" if report.passed else "FAIL"
        print(f"{kind}: max_rel_err={report.max_rel_err:.3e} worst_block={worst} {verdict}")
        if not report.passed:
            failed = True
    return EXIT_CHECK_FAILED if failed else EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="charcrnn",
        description="Character-level convolutional-recurrent text classifier.",
    )
    sub = parser.add_subparsers(dest="command")

    def shared(p, needs_corpus=True):
        if needs_corpus:
            p.add_argument("corpus", help="TSV corpus path (label<TAB>text per line)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--config", default=None, help="key=value settings file")
        p.add_argument("--out-dir", default=".", help="directory for outputs")
        p.add_argument("--format", choices=("table", "csv"), default="table")

    def model_flags(p):
        p.add_argument("--filters", type=int, default=None)
        p.add_argument("--hidden", type=int, default=None)
        p.add_argument("--window", type=int, default=None)
        p.add_argument("--pool", type=int, default=None)
        p.add_argument("--seq-len", type=int, default=None)
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--cell", choices=CELL_KINDS, default=None)

    def train_flags(p):
        p.add_argument("--steps", type=int, default=None)
        p.add_argument("--batch-size", type=int, default=None)
        p.add_argument("--eval-every", type=int, default=None)
        p.add_argument("--clip", type=float, default=None)
        p.add_argument("--lr", type=float, default=None)
        p.add_argument("--train-count", type=int, default=None)
        p.add_argument("--test-count", type=int, default=None)

    p = sub.add_parser("stats", help="corpus statistics")
    shared(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train a model and write checkpoint + trace")
    shared(p)
    model_flags(p)
    train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a corpus")
    p.add_argument("checkpoint")
    shared(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="aggregation-weight sweep")
    shared(p)
    model_flags(p)
    train_flags(p)
    p.add_argument("--alphas", default=None, help="comma-separated alphas (default 0.1..0.9)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="cell runtime benchmark")
    shared(p)
    model_flags(p)
    train_flags(p)
    p.add_argument("--cells", default=None, help="comma-separated subset of lstm,gru,mgu")
    p.set_defaults(func=cmd_bench)
    # bench reuses --steps but defaults to 30 timed steps, not the
    # training default of 1000; handled in cmd_bench.

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    shared(p, needs_corpus=False)
    p.add_argument("--cells", default=None)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--h", type=float, default=1e-4)
    p.add_argument("--samples", type=int, default=25, help="elements probed per block")
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if not getattr(args, "func", None):
        parser.print_help()
        return EXIT_USAGE
    try:
        return args.func(args)
    except FloatingPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except (CorpusError, ConfigError, CheckpointError, FileNotFoundError,
            IsADirectoryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
