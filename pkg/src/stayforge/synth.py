"""Synthetic EHR-like imbalanced datasets with planted signal."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit, logit

from .data import DataMatrix, FeatureKind, LabeledDataset
from .errors import InvalidSpecError

BINARY_BASE_RATE = 0.2


@dataclass(frozen=True)
class SynthSpec:
    n_rows: int = 2000
    n_continuous: int = 20
    n_categorical_binary: int = 40
    imbalance_ratio: float = 5.0
    signal_columns: int = 6
    signal_strength: float = 2.0
    missing_fraction: float = 0.05
    seed: int = 0

    def validate(self) -> None:
        total = self.n_continuous + self.n_categorical_binary
        problems = []
        if self.n_rows < 2:
            problems.append("n_rows must be >= 2")
        if self.n_continuous < 0 or self.n_categorical_binary < 0 or total == 0:
            problems.append("need at least one feature column")
        if not self.imbalance_ratio >= 1.0:
            problems.append("imbalance_ratio must be >= 1")
        if not 0.0 <= self.missing_fraction <= 0.9:
            problems.append("missing_fraction must be in [0, 0.9]")
        if not 0 <= self.signal_columns <= total:
            problems.append("signal_columns must be between 0 and the column count")
        if self.signal_strength < 0:
            problems.append("signal_strength must be >= 0")
        if problems:
            raise InvalidSpecError("; ".join(problems))
        n_min, n_maj = class_sizes(self)
        if n_min < 1 or n_maj < 1:
            raise InvalidSpecError(f"{self.n_rows} rows at ratio {self.imbalance_ratio} leave a class empty")

    def to_dict(self) -> dict:
        return asdict(self)


def class_sizes(spec: SynthSpec) -> tuple[int, int]:
    """(minority, majority) counts: minority = round-half-up(n / (1 + ratio))."""
    n_min = int(math.floor(spec.n_rows / (1.0 + spec.imbalance_ratio) + 0.5))
    return n_min, spec.n_rows - n_min


def _signal_split(spec: SynthSpec) -> tuple[int, int]:
    n_cont = min(spec.n_continuous, (spec.signal_columns + 1) // 2)
    n_bin = spec.signal_columns - n_cont
    if n_bin > spec.n_categorical_binary:
        n_cont += n_bin - spec.n_categorical_binary
        n_bin = spec.n_categorical_binary
    return n_cont, n_bin


def column_names(spec: SynthSpec) -> tuple[list[str], list[str]]:
    return (
        [f"lab_{j:03d}" for j in range(spec.n_continuous)],
        [f"dx_{j:03d}" for j in range(spec.n_categorical_binary)],
    )


def signal_column_names(spec: SynthSpec) -> list[str]:
    """Names of the columns whose distribution depends on the label."""
    cont, binary = column_names(spec)
    n_cont, n_bin = _signal_split(spec)
    return cont[:n_cont] + binary[:n_bin]


def generate(spec: SynthSpec) -> LabeledDataset:
    """Draw a dataset with exact class counts and label-dependent signal columns.

    Continuous signal columns shift their mean by ``signal_strength`` for the
    minority (severe) class; binary signal columns shift the log-odds of a
    1 by the same amount. MISSING cells are spread uniformly over the
    continuous block.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n = spec.n_rows
    n_min, _ = class_sizes(spec)
    labels = np.zeros(n, dtype=np.int64)
    labels[rng.permutation(n)[:n_min]] = 1

    n_sig_cont, n_sig_bin = _signal_split(spec)
    cont = rng.standard_normal((n, spec.n_continuous))
    cont[:, :n_sig_cont] += spec.signal_strength * labels[:, None]

    rates = rng.uniform(0.05, 0.5, size=spec.n_categorical_binary)
    rates[:n_sig_bin] = BINARY_BASE_RATE
    log_odds = np.broadcast_to(logit(rates), (n, spec.n_categorical_binary)).copy()
    log_odds[:, :n_sig_bin] += spec.signal_strength * labels[:, None]
    binary = (rng.random((n, spec.n_categorical_binary)) < expit(log_odds)).astype(np.float64)

    n_missing = int(round(spec.missing_fraction * n * spec.n_continuous))
    if n_missing:
        cells = rng.choice(n * spec.n_continuous, size=n_missing, replace=False)
        cont.reshape(-1)[cells] = np.nan

    cont_names, bin_names = column_names(spec)
    features = DataMatrix(
        column_names=cont_names + bin_names,
        column_kinds=[FeatureKind.CONTINUOUS] * spec.n_continuous
        + [FeatureKind.CATEGORICAL] * spec.n_categorical_binary,
        values=np.hstack([cont, binary]),
        row_ids=[f"P{i:06d}" for i in range(n)],
        categories={name: ("0", "1") for name in bin_names},
    )
    return LabeledDataset(features, labels)
