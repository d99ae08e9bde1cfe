"""The five training-set constructions: raw, class-weighted, random over/undersampling, SMOTE-NC."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .data import FeatureKind, LabeledDataset
from .errors import DegenerateClassBalanceError, InsufficientMinorityError

log = logging.getLogger(__name__)


class Strategy(str, enum.Enum):
    RAW = "raw"
    CLASS_WEIGHTED = "class_weighted"
    RANDOM_OVERSAMPLE = "random_oversample"
    RANDOM_UNDERSAMPLE = "random_undersample"
    SMOTE_NC = "smote_nc"


@dataclass(frozen=True)
class ResampleStrategy:
    kind: Strategy
    k: int = 5  # SMOTE-NC neighbors

    def __post_init__(self):
        object.__setattr__(self, "kind", Strategy(self.kind))
        if self.kind is Strategy.SMOTE_NC and self.k < 1:
            raise ValueError("SMOTE-NC needs k >= 1")

    @classmethod
    def parse(cls, text: str) -> "ResampleStrategy":
        name, _, k = text.partition(":")
        return cls(Strategy(name), int(k) if k else 5)

    def __str__(self) -> str:
        return self.kind.value


ALL_STRATEGIES = tuple(ResampleStrategy(s) for s in Strategy)


def _classes(train: LabeledDataset) -> tuple[int, int, np.ndarray, np.ndarray]:
    """(minority label, majority label, minority indices, majority indices)."""
    neg = np.flatnonzero(train.labels == 0)
    pos = np.flatnonzero(train.labels == 1)
    if neg.size == 0 or pos.size == 0:
        raise DegenerateClassBalanceError(
            f"both classes required, got {neg.size} negative / {pos.size} positive"
        )
    if pos.size <= neg.size:
        return 1, 0, pos, neg
    return 0, 1, neg, pos


def class_weight(train: LabeledDataset) -> float:
    """n_negative / n_positive, the multiplier on positive-example loss."""
    _classes(train)
    n_neg, n_pos = train.class_counts()
    return n_neg / n_pos


def _append_rows(
    train: LabeledDataset, values: np.ndarray, label: int, ids: list[str]
) -> LabeledDataset:
    feats = train.features
    merged = feats.with_values(np.vstack([feats.values, values]), list(feats.row_ids) + ids)
    labels = np.concatenate([train.labels, np.full(len(ids), label)])
    return LabeledDataset(merged, labels)


def random_oversample(train: LabeledDataset, seed: int) -> LabeledDataset:
    """Duplicate minority rows (with replacement) until the classes are even."""
    min_label, _, min_idx, maj_idx = _classes(train)
    n_new = maj_idx.size - min_idx.size
    if n_new == 0:
        return train
    rng = np.random.default_rng(seed)
    picks = min_idx[rng.integers(0, min_idx.size, size=n_new)]
    ids = [f"{train.row_ids[p]}#os{i}" for i, p in enumerate(picks)]
    return _append_rows(train, train.features.values[picks], min_label, ids)


def random_undersample(train: LabeledDataset, seed: int) -> LabeledDataset:
    """Drop majority rows (without replacement) until the classes are even."""
    _, _, min_idx, maj_idx = _classes(train)
    if maj_idx.size == min_idx.size:
        return train
    rng = np.random.default_rng(seed)
    keep = rng.choice(maj_idx, size=min_idx.size, replace=False)
    return train.select_rows(np.sort(np.concatenate([min_idx, keep])))


@dataclass(frozen=True)
class SmoteProvenance:
    """Per synthetic row: index of the seed row, chosen neighbor, and the k neighbors (all
    indices into the input dataset)."""

    seed_rows: np.ndarray
    neighbor_rows: np.ndarray
    neighborhoods: np.ndarray


def smote_nc_with_provenance(
    train: LabeledDataset, k: int = 5, seed: int = 0
) -> tuple[LabeledDataset, SmoteProvenance]:
    min_label, _, min_idx, maj_idx = _classes(train)
    if min_idx.size < 2:
        raise InsufficientMinorityError(f"SMOTE-NC needs >= 2 minority rows, got {min_idx.size}")
    feats = train.features
    X = feats.dense()[min_idx]
    cont = np.array(feats.indices_of_kind(FeatureKind.CONTINUOUS), dtype=np.intp)
    disc = np.array(feats.indices_of_kind(FeatureKind.CATEGORICAL, FeatureKind.INDICATOR), dtype=np.intp)

    if cont.size:
        penalty = float(np.median(X[:, cont].std(axis=0))) ** 2
    else:
        log.warning("no continuous columns; SMOTE-NC falls back to Hamming-distance voting")
        penalty = 1.0
    sq = np.empty((len(X), len(X)))
    for i in range(len(X)):
        row = ((X[:, cont] - X[i, cont]) ** 2).sum(axis=1)
        if disc.size:
            row = row + penalty * (X[:, disc] != X[i, disc]).sum(axis=1)
        sq[i] = row
    np.fill_diagonal(sq, np.inf)

    k_eff = min(k, len(X) - 1)
    neighbors = np.argsort(sq, axis=1, kind="stable")[:, :k_eff]

    n_new = maj_idx.size - min_idx.size
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, len(X), size=n_new)
    pick = rng.integers(0, k_eff, size=n_new)
    gaps = rng.random(n_new)
    nbr = neighbors[seeds, pick]

    synth = X[seeds].copy()
    if cont.size:
        s_c, n_c = X[seeds][:, cont], X[nbr][:, cont]
        synth[:, cont] = s_c + gaps[:, None] * (n_c - s_c)
    for start in range(0, n_new if disc.size else 0, 256):
        rows = np.arange(start, min(start + 256, n_new))
        hoods = X[neighbors[seeds[rows]]][:, :, disc]  # (rows, k, n_disc)
        # votes[i, a, j]: how many neighbors share neighbor a's value in column j
        votes = (hoods[:, :, None, :] == hoods[:, None, :, :]).sum(axis=2)
        winners = np.where(votes == votes.max(axis=1, keepdims=True), hoods, np.nan)
        lo, hi = np.nanmin(winners, axis=1), np.nanmax(winners, axis=1)
        synth[np.ix_(rows, disc)] = lo
        for i, jj in zip(*np.nonzero(lo != hi)):
            tied = np.unique(winners[i, :, jj][~np.isnan(winners[i, :, jj])])
            synth[rows[i], disc[jj]] = tied[rng.integers(0, tied.size)]

    ids = [f"smote{i}" for i in range(n_new)]
    prov = SmoteProvenance(min_idx[seeds], min_idx[nbr], min_idx[neighbors[seeds]])
    return _append_rows(train, synth, min_label, ids), prov


def smote_nc(train: LabeledDataset, k: int = 5, seed: int = 0) -> LabeledDataset:
    """Append interpolated minority rows until the classes are even.

    Distances follow SMOTE-NC: squared Euclidean on continuous columns plus,
    per categorical mismatch, the squared median of the minority set's
    continuous standard deviations. Categorical and indicator values take
    the majority vote of the seed row's k minority neighbors.
    """
    out, _ = smote_nc_with_provenance(train, k, seed)
    return out


def apply_strategy(
    train: LabeledDataset, strategy: ResampleStrategy, seed: int
) -> tuple[LabeledDataset, float]:
    """Training set and positive-class loss weight for ``strategy``."""
    kind = strategy.kind
    if kind is Strategy.RAW:
        return train, 1.0
    if kind is Strategy.CLASS_WEIGHTED:
        return train, class_weight(train)
    if kind is Strategy.RANDOM_OVERSAMPLE:
        return random_oversample(train, seed), 1.0
    if kind is Strategy.RANDOM_UNDERSAMPLE:
        return random_undersample(train, seed), 1.0
    return smote_nc(train, strategy.k, seed), 1.0
