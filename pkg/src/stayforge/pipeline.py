"""File-level pipeline stages. Each stage reads and writes dataset file pairs in an output directory."""

from __future__ import annotations

import json
import logging
import math
import platform
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, svg
from .bayes import SearchSpace, TrialRecord, read_ledger, run_sweep
from .data import SplitBundle, inner_merge, pivot_events, three_way_split, LabeledDataset
from .errors import CheckpointMismatchError
from .io import (
    file_digest,
    read_dataset,
    read_encounters,
    read_events,
    read_json,
    write_csv,
    write_dataset,
    write_json,
    atomic_write_text,
)
from .metrics import MetricsReport, evaluate_scores, pca_dataset, roc_curve, top_k_features
from .nn import HyperConfig, TrainSettings, forward, load_checkpoint, save_checkpoint, train
from .preprocess import PreprocessReport, clean_dataset, encounter_table, impute_bundle
from .resample import ResampleStrategy, apply_strategy
from .synth import SynthSpec, generate, signal_column_names

log = logging.getLogger(__name__)

DATASET = "dataset"
SPLITS = ("train", "validation", "test")


def write_manifest(out: Path, command: str, flags: dict, seed: int | None, inputs: Sequence[Path], started: datetime) -> Path:
    """Run record stored beside the outputs; the only file carrying timestamps."""
    digests = {}
    for p in inputs:
        p = Path(p)
        if p.is_file():
            digests[str(p)] = file_digest(p)
    manifest = {
        "command": command,
        "flags": {k: (str(v) if isinstance(v, Path) else v) for k, v in flags.items()},
        "seed": seed,
        "inputs": digests,
        "tool_version": __version__,
        "python": sys.version.split()[0],
        "platform": platform.platform(),
        "numpy": np.__version__,
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
    }
    path = Path(out) / "manifest.json"
    atomic_write_text(path, json.dumps(manifest, indent=2, default=str) + "\n")
    return path


def synth_stage(spec: SynthSpec, out: Path) -> LabeledDataset:
    ds = generate(spec)
    write_dataset(ds, out / DATASET)
    write_json(out / "signal_columns.json", signal_column_names(spec))
    return ds


def pivot_stage(event_files: dict[str, Path], encounters: Path, out: Path) -> LabeledDataset:
    """Pivot each long-format event file, merge with encounter features, attach labels."""
    enc, labels, los = encounter_table(read_encounters(encounters))
    tables = [enc] + [pivot_events(read_events(p)) for p in event_files.values()]
    names = ["encounter", *event_files]
    merged = inner_merge(tables, names)
    y = np.array([labels[r] for r in merged.row_ids], dtype=np.int64)
    ds = LabeledDataset(merged, y)
    write_dataset(ds, out / DATASET)
    write_csv(out / "los.csv", ["row_id", "los_days", "severe"], ([r, los[r], labels[r]] for r in merged.row_ids))
    return ds


def preprocess_stage(source: Path, out: Path, sparse_threshold: float = 0.5) -> tuple[LabeledDataset, PreprocessReport]:
    ds, report = clean_dataset(read_dataset(source), sparse_threshold)
    write_dataset(ds, out / DATASET)
    write_json(out / "preprocess_report.json", report.to_dict())
    return ds, report


def split_stage(
    source: Path,
    out: Path,
    seed: int,
    test_fraction: float = 0.2,
    validation_fraction: float = 0.2,
    k: int = 5,
    impute: bool = True,
) -> tuple[SplitBundle, PreprocessReport]:
    """Test split, validation split from the remainder, then per-split KNN imputation."""
    ds = read_dataset(source)
    bundle = three_way_split(ds, test_fraction, validation_fraction, seed)
    report = PreprocessReport()
    if impute:
        bundle, report = impute_bundle(bundle, k)
    for name in SPLITS:
        write_dataset(getattr(bundle, name), out / name)
    summary = {
        name: dict(zip(("negative", "positive"), getattr(bundle, name).class_counts())) for name in SPLITS
    }
    write_json(out / "split_report.json", {"class_counts": summary, "imputation": report.to_dict()})
    return bundle, report


def resample_stage(source: Path, out: Path, strategy: ResampleStrategy, seed: int) -> tuple[LabeledDataset, float]:
    ds, weight = apply_strategy(read_dataset(source), strategy, seed)
    write_dataset(ds, out / DATASET)
    n_neg, n_pos = ds.class_counts()
    write_json(out / "resample.json", {"strategy": str(strategy), "positive_weight": weight, "negative": n_neg, "positive": n_pos})
    return ds, weight


def _objective(train_ds, val_ds, strategy, seed, settings):
    def objective(cfg: HyperConfig) -> float:
        _, report = train(train_ds, val_ds, cfg, strategy, seed, settings)
        return report.best_val_f1

    return objective


def sweep_stage(
    train_path: Path,
    validation_path: Path,
    out: Path,
    strategy: ResampleStrategy,
    seed: int,
    budget: int = 50,
    initial_random: int = 10,
    settings: TrainSettings = TrainSettings(),
    resume: Path | None = None,
    candidates: int = 1000,
    space: SearchSpace = SearchSpace(),
    record_time: bool = False,
) -> tuple[TrialRecord, list[TrialRecord]]:
    train_ds = read_dataset(train_path)
    val_ds = read_dataset(validation_path)
    ledger_path = out / "ledger.jsonl"
    prior = read_ledger(resume) if resume is not None else []
    best, trials = run_sweep(
        space,
        _objective(train_ds, val_ds, strategy, seed, settings),
        budget=budget,
        initial_random=min(initial_random, budget),
        seed=seed,
        ledger_path=ledger_path,
        resume=prior,
        candidates=candidates,
        record_time=record_time,
    )
    write_json(
        out / "best.json",
        {
            "strategy": str(strategy),
            "trial_index": best.trial_index,
            "objective": best.objective,
            "config": best.config.to_dict(),
            "train_settings": asdict(settings),
        },
    )
    return best, trials


def load_best_config(path: Path, space: SearchSpace | None = None) -> HyperConfig:
    blob = read_json(path)
    cfg = HyperConfig.from_dict(blob["config"] if "config" in blob else blob)
    if space is not None:
        space.validate(cfg)
    return cfg


def train_stage(
    train_path: Path,
    validation_path: Path,
    config_path: Path,
    out: Path,
    strategy: ResampleStrategy,
    seed: int,
    settings: TrainSettings = TrainSettings(),
):
    train_ds = read_dataset(train_path)
    val_ds = read_dataset(validation_path)
    cfg = load_best_config(config_path)
    model, report = train(train_ds, val_ds, cfg, strategy, seed, settings)
    meta = {
        "feature_names": list(train_ds.features.column_names),
        "strategy": str(strategy),
        "seed": seed,
        "train_settings": asdict(settings),
    }
    save_checkpoint(out / "model.npz", model, cfg, meta)
    write_json(out / "train_report.json", report.to_dict())
    return model, cfg, report


def evaluate_stage(model_path: Path, test_path: Path, out: Path, threshold: float = 0.5) -> MetricsReport:
    model, cfg, meta = load_checkpoint(model_path)
    test = read_dataset(test_path)
    names = list(test.features.column_names)
    if meta.get("feature_names") not in (None, names):
        raise CheckpointMismatchError(
            f"{model_path}: model expects {len(meta['feature_names'])} features "
            f"{meta['feature_names'][:3]}..., test set has {len(names)} {names[:3]}..."
        )
    if model.input_dim != len(names):
        raise CheckpointMismatchError(f"model input width {model.input_dim} != {len(names)} test columns")
    scores = forward(model, cfg, test.features.dense())
    report = evaluate_scores(scores, test.labels, threshold)
    write_json(out / "metrics.json", report.to_dict())
    fpr, tpr, thr = roc_curve(scores, test.labels)
    write_csv(out / "roc.csv", ["fpr", "tpr", "threshold"], zip(fpr.tolist(), tpr.tolist(), ["inf" if math.isinf(t) else t for t in thr.tolist()]))
    write_csv(
        out / "confusion.csv",
        ["actual", "predicted_not_severe", "predicted_severe"],
        [["not_severe", report.tn, report.fp], ["severe", report.fn, report.tp]],
    )
    write_csv(out / "scores.csv", ["row_id", "score", "label"], zip(test.row_ids, scores.tolist(), test.labels.tolist()))
    return report


def _read_roc(path: Path) -> list[tuple[float, float]]:
    lines = path.read_text().splitlines()[1:]
    return [(float(a), float(b)) for a, b, _ in (ln.split(",") for ln in lines if ln)]


def report_stage(
    dataset_path: Path,
    out: Path,
    k: int = 20,
    runs: dict[str, Path] | None = None,
) -> dict:
    """Feature ranking, PCA, plots, and (given evaluated runs) a model comparison."""
    ds = read_dataset(dataset_path)
    k = min(k, ds.features.n_cols)
    ranked = top_k_features(ds, k)
    write_csv(out / "feature_importance.csv", ["rank", "feature", "mutual_information"], ((i + 1, n, s) for i, (n, s) in enumerate(ranked)))
    atomic_write_text(
        out / "mutual_information.svg",
        svg.bar_chart([n for n, _ in ranked], [s for _, s in ranked], f"Mutual information, top {k} features", "nats", horizontal=True),
    )
    n_neg, n_pos = ds.class_counts()
    atomic_write_text(out / "los_classes.svg", svg.bar_chart(["< 7 days", ">= 7 days"], [n_neg, n_pos], "Length-of-stay classes", "patients"))

    summary: dict = {"top_features": ranked}
    try:
        pca = pca_dataset(ds)
    except Exception as exc:  # noqa: BLE001 - PCA is optional when too few continuous columns
        log.warning("skipping PCA: %s", exc)
    else:
        coords = pca.coordinates
        write_csv(out / "pca.csv", ["x", "y", "label"], zip(coords[:, 0].tolist(), coords[:, 1].tolist(), ds.labels.tolist()))
        r1, r2 = pca.explained_variance_ratio.tolist()
        atomic_write_text(
            out / "pca.svg",
            svg.scatter_chart(coords[:, 0], coords[:, 1], ds.labels, "Two-component PCA", f"PC1 ({r1:.1%})", f"PC2 ({r2:.1%})"),
        )
        summary["pca_explained_variance"] = [r1, r2]

    if runs:
        metrics = {}
        curves = {}
        for name, run_dir in runs.items():
            run_dir = Path(run_dir)
            metrics[name] = read_json(run_dir / "metrics.json")
            curves[name] = _read_roc(run_dir / "roc.csv")
        atomic_write_text(out / "roc.svg", svg.roc_chart(curves, "ROC, all models"))
        first = next(iter(runs))
        m = metrics[first]
        atomic_write_text(out / "confusion.svg", svg.confusion_chart(m["tp"], m["fp"], m["fn"], m["tn"], f"Confusion matrix ({first})"))
        comparison = compare_runs(metrics)
        write_json(out / "comparison.json", comparison)
        atomic_write_text(out / "comparison.md", comparison_markdown(comparison))
        summary["comparison"] = comparison
    return summary


def compare_runs(metrics: dict[str, dict]) -> dict:
    cols = ("f1", "accuracy", "precision", "recall", "auc")
    table = {name: {c: m[c] for c in cols} for name, m in metrics.items()}
    notes = []
    if "raw" in table and "random_undersample" in table:
        raw_r, under_r = table["raw"]["recall"], table["random_undersample"]["recall"]
        verdict = "underperforms" if under_r < raw_r else "does not underperform"
        notes.append(
            f"random_undersample {verdict} raw on recall ({under_r:.4f} vs {raw_r:.4f})"
        )
    best = max(table, key=lambda n: table[n]["f1"])
    notes.append(f"best test F1: {best} ({table[best]['f1']:.4f})")
    return {"metrics": table, "notes": notes}


def comparison_markdown(comparison: dict) -> str:
    cols = ("f1", "accuracy", "precision", "recall", "auc")
    lines = ["| model | " + " | ".join(cols) + " |", "|---" * (len(cols) + 1) + "|"]
    for name, row in comparison["metrics"].items():
        lines.append(f"| {name} | " + " | ".join(f"{100 * row[c]:.2f}%" for c in cols) + " |")
    lines.append("")
    lines.extend(f"- {n}" for n in comparison["notes"])
    return "\n".join(lines) + "\n"
