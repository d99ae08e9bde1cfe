"""``stayforge`` command-line entry point.

Exit codes: 0 success, 1 domain error, 2 I/O or parse error, 3 internal error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")
MAX_SEED = 2**64 - 1


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value <= MAX_SEED:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"fraction must be in (0, 1), got {text}")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _named_path(text: str) -> tuple[str, Path]:
    name, sep, path = text.partition("=")
    if not sep or not name or not path:
        raise argparse.ArgumentTypeError(f"expected NAME=PATH, got {text!r}")
    return name, Path(path)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=argparse.SUPPRESS, help="RNG seed (u64, default 0)")
    common.add_argument("--out", type=Path, default=argparse.SUPPRESS, help="output directory (default: out)")
    common.add_argument("--scale", type=float, default=argparse.SUPPRESS, help="hidden-width divisor (default 10)")
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="stayforge", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic imbalanced dataset")
    p.add_argument("--rows", type=_positive, default=2000)
    p.add_argument("--continuous", type=int, default=20)
    p.add_argument("--binary", type=int, default=40)
    p.add_argument("--ratio", type=float, default=5.0, help="majority:minority ratio")
    p.add_argument("--signal-columns", type=int, default=6)
    p.add_argument("--signal-strength", type=float, default=2.0)
    p.add_argument("--missing-fraction", type=float, default=0.05)

    p = sub.add_parser("pivot", parents=[common], help="pivot long-format event files into a labeled dataset")
    p.add_argument("--events", type=_named_path, action="append", required=True, metavar="NAME=CSV")
    p.add_argument("--encounters", type=Path, required=True, help="CSV: patient_id,admission,discharge")

    p = sub.add_parser("preprocess", parents=[common], help="drop sparse and zero-variance columns")
    p.add_argument("--input", type=Path, required=True, help="dataset stem (path without .csv)")
    p.add_argument("--sparse-threshold", type=float, default=0.5)

    p = sub.add_parser("split", parents=[common], help="stratified train/validation/test split + KNN imputation")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--test-fraction", type=_fraction, default=0.2)
    p.add_argument("--validation-fraction", type=_fraction, default=0.2)
    p.add_argument("--knn-k", type=_positive, default=5)
    p.add_argument("--no-impute", action="store_true")

    p = sub.add_parser("resample", parents=[common], help="build one of the five training sets")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--strategy", default="raw", help="raw|class_weighted|random_oversample|random_undersample|smote_nc[:k]")

    def training_flags(p):
        p.add_argument("--train", type=Path, required=True)
        p.add_argument("--validation", type=Path, required=True)
        p.add_argument("--strategy", default="raw")
        p.add_argument("--batch-size", type=_positive, default=32)
        p.add_argument("--max-epochs", type=_positive, default=100)
        p.add_argument("--patience", type=_positive, default=10)

    p = sub.add_parser("sweep", parents=[common], help="Bayesian hyperparameter search on validation F1")
    training_flags(p)
    p.add_argument("--budget", type=_positive, default=50)
    p.add_argument("--initial-random", type=int, default=10)
    p.add_argument("--candidates", type=_positive, default=1000)
    p.add_argument("--resume", type=Path, help="ledger from an interrupted sweep")
    p.add_argument("--record-wall-time", action="store_true", help="add wall_time_s to ledger lines")

    p = sub.add_parser("train", parents=[common], help="train one configuration and save a checkpoint")
    training_flags(p)
    p.add_argument("--config", type=Path, required=True, help="best.json from sweep or a bare config JSON")

    p = sub.add_parser("evaluate", parents=[common], help="test-set metrics, ROC and confusion matrix")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--test", type=Path, required=True)
    p.add_argument("--threshold", type=float, default=0.5)

    p = sub.add_parser("report", parents=[common], help="feature ranking, PCA, plots and model comparison")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--top-k", type=_positive, default=20)
    p.add_argument("--run", type=_named_path, action="append", default=[], metavar="NAME=EVAL_DIR")
    return parser


def _dataset_inputs(*stems) -> list[Path]:
    from .io import dataset_paths

    out = []
    for s in stems:
        if s is not None:
            out.extend(dataset_paths(s))
    return out


def run(args: argparse.Namespace) -> list[Path]:
    """Execute one subcommand; returns its input files for the manifest."""
    from . import pipeline
    from .nn import TrainSettings
    from .resample import ResampleStrategy
    from .synth import SynthSpec

    out: Path = args.out
    cmd = args.command
    if cmd == "synth":
        spec = SynthSpec(
            n_rows=args.rows,
            n_continuous=args.continuous,
            n_categorical_binary=args.binary,
            imbalance_ratio=args.ratio,
            signal_columns=args.signal_columns,
            signal_strength=args.signal_strength,
            missing_fraction=args.missing_fraction,
            seed=args.seed,
        )
        pipeline.synth_stage(spec, out)
        return []
    if cmd == "pivot":
        files = dict(args.events)
        pipeline.pivot_stage(files, args.encounters, out)
        return [*files.values(), args.encounters]
    if cmd == "preprocess":
        pipeline.preprocess_stage(args.input, out, args.sparse_threshold)
        return _dataset_inputs(args.input)
    if cmd == "split":
        pipeline.split_stage(
            args.input, out, args.seed, args.test_fraction, args.validation_fraction, args.knn_k, not args.no_impute
        )
        return _dataset_inputs(args.input)
    if cmd == "resample":
        pipeline.resample_stage(args.input, out, ResampleStrategy.parse(args.strategy), args.seed)
        return _dataset_inputs(args.input)
    if cmd in ("sweep", "train"):
        settings = TrainSettings(args.batch_size, args.max_epochs, args.patience, args.scale)
        strategy = ResampleStrategy.parse(args.strategy)
        inputs = _dataset_inputs(args.train, args.validation)
        if cmd == "sweep":
            pipeline.sweep_stage(
                args.train,
                args.validation,
                out,
                strategy,
                args.seed,
                budget=args.budget,
                initial_random=args.initial_random,
                settings=settings,
                resume=args.resume,
                candidates=args.candidates,
                record_time=args.record_wall_time,
            )
            return inputs + ([args.resume] if args.resume else [])
        pipeline.train_stage(args.train, args.validation, args.config, out, strategy, args.seed, settings)
        return inputs + [args.config]
    if cmd == "evaluate":
        pipeline.evaluate_stage(args.model, args.test, out, args.threshold)
        return [args.model, *_dataset_inputs(args.test)]
    if cmd == "report":
        runs = dict(args.run)
        pipeline.report_stage(args.dataset, out, args.top_k, runs)
        return _dataset_inputs(args.dataset) + [Path(d) / "metrics.json" for d in runs.values()]
    raise AssertionError(f"unhandled command {cmd}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    for key, default in (("seed", 0), ("out", Path("out")), ("scale", 10.0), ("verbose", 0)):
        if not hasattr(args, key):
            setattr(args, key, default)
    threads = os.environ.get("STAYFORGE_THREADS")
    if threads:
        for var in THREAD_VARS:
            os.environ.setdefault(var, threads)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )

    from .errors import StayforgeError

    started = datetime.now(timezone.utc)
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        inputs = run(args)
        from .pipeline import write_manifest

        flags = {k: v for k, v in vars(args).items() if k not in ("command", "verbose")}
        write_manifest(args.out, args.command, flags, args.seed, inputs, started)
    except StayforgeError as exc:
        print(f"stayforge {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"stayforge {args.command}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        logging.getLogger("stayforge").exception("internal error")
        print(f"stayforge {args.command}: internal error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
