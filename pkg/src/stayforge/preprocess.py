"""Column filtering, temporal features, length-of-stay targets and KNN imputation."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from datetime import date, datetime, timezone
from typing import Sequence

import numpy as np

from .data import DataMatrix, FeatureKind, LabeledDataset, SplitBundle
from .errors import InvalidDateError, NegativeStayError, UnimputableColumnError

log = logging.getLogger(__name__)

EPOCH = date(1970, 1, 1)
SEVERE_DAYS = 7.0
INDICATOR_SUFFIX = "__imputed"


@dataclass
class PreprocessReport:
    dropped_sparse: list[str] = field(default_factory=list)
    dropped_zero_variance: list[str] = field(default_factory=list)
    imputed_cells: int = 0
    indicator_columns_added: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _utc(ts: datetime | date) -> datetime:
    if not isinstance(ts, datetime):
        return datetime(ts.year, ts.month, ts.day, tzinfo=timezone.utc)
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def derive_temporal(admission: datetime | date) -> tuple[int, int]:
    """(day of year in 1..366, whole days since 1970-01-01 UTC)."""
    ts = _utc(admission)
    if ts.year < 1970:
        raise InvalidDateError(f"admission {ts.isoformat()} precedes 1970")
    return ts.timetuple().tm_yday, (ts.date() - EPOCH).days


def compute_los(admission: datetime | date, discharge: datetime | date) -> float:
    """Stay length in fractional days."""
    delta = _utc(discharge) - _utc(admission)
    if delta.total_seconds() < 0:
        raise NegativeStayError(f"discharge {discharge} precedes admission {admission}")
    return delta.total_seconds() / 86400.0


def discretize_los(days: float) -> int:
    # 7.0 exactly counts as severe
    if days < 0:
        raise NegativeStayError(f"negative stay length {days}")
    return int(days >= SEVERE_DAYS)


def encounter_table(
    encounters: Sequence[tuple[str, datetime, datetime]],
) -> tuple[DataMatrix, dict[str, int], dict[str, float]]:
    """Temporal features per patient plus their severity labels and LOS.

    Only the first encounter of each patient is used.
    """
    rows: dict[str, tuple[int, int]] = {}
    labels: dict[str, int] = {}
    los: dict[str, float] = {}
    for pid, admit, discharge in encounters:
        if pid in rows:
            continue
        rows[pid] = derive_temporal(admit)
        los[pid] = compute_los(admit, discharge)
        labels[pid] = discretize_los(los[pid])
    values = np.array([rows[p] for p in rows], dtype=float).reshape(len(rows), 2)
    m = DataMatrix(
        ["day_of_year", "ordinal_days"],
        [FeatureKind.CONTINUOUS, FeatureKind.CONTINUOUS],
        values,
        list(rows),
    )
    return m, labels, los


def _protected(m: DataMatrix) -> np.ndarray:
    return np.array([k is FeatureKind.LABEL for k in m.column_kinds], dtype=bool)


def drop_sparse_columns(m: DataMatrix, threshold: float = 0.5) -> tuple[DataMatrix, list[str]]:
    """Remove columns whose MISSING fraction strictly exceeds ``threshold``."""
    if m.n_rows == 0:
        return m, []
    frac = m.missing_mask.mean(axis=0)
    drop = (frac > threshold) & ~_protected(m)
    dropped = [n for n, d in zip(m.column_names, drop) if d]
    return m.drop_columns(dropped), dropped


def drop_zero_variance(m: DataMatrix) -> tuple[DataMatrix, list[str]]:
    """Remove columns whose observed values are all identical (or absent)."""
    protected = _protected(m)
    dropped = []
    for j, name in enumerate(m.column_names):
        if protected[j]:
            continue
        col = m.values[:, j]
        obs = col[~np.isnan(col)]
        if obs.size == 0 or np.all(obs == obs[0]):
            dropped.append(name)
    return m.drop_columns(dropped), dropped


def _mode(values: np.ndarray) -> float:
    uniq, counts = np.unique(values, return_counts=True)
    # np.unique sorts, so argmax picks the lowest code among ties
    return float(uniq[np.argmax(counts)])


def knn_impute(
    m: DataMatrix,
    k: int = 5,
    donors: DataMatrix | None = None,
    indicator_for: Sequence[str] | None = None,
) -> tuple[DataMatrix, PreprocessReport]:
    """Fill MISSING cells from the k nearest donor rows that observe the column.

    Distances are Euclidean over the columns both rows observe, scaled by
    sqrt(d / d_shared). Continuous columns take the neighbor mean, discrete
    columns the neighbor mode (ties to the lowest code). Donors default to
    ``m`` itself; pass the training matrix to impute holdout rows without
    leakage.

    An ``<name>__imputed`` indicator column is appended for every column in
    ``indicator_for`` (default: every column of ``m`` with a MISSING cell).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if donors is None:
        donors = m
    elif donors.column_names != m.column_names:
        raise ValueError("donor matrix must have the same columns")

    X = m.values
    D = donors.values
    miss = np.isnan(X)
    d_obs = ~np.isnan(D)
    n, d = X.shape
    discrete = np.array([kind.is_discrete for kind in m.column_kinds], dtype=bool)

    cols_missing = np.flatnonzero(miss.any(axis=0))
    for j in cols_missing:
        if not d_obs[:, j].any():
            raise UnimputableColumnError(f"column {m.column_names[j]!r} has no observed donor values")

    out = X.copy()
    warned = False
    D0 = np.where(d_obs, D, 0.0)
    for r in np.flatnonzero(miss.any(axis=1)):
        x_obs = ~miss[r]
        shared = d_obs & x_obs
        n_shared = shared.sum(axis=1)
        diff = np.where(shared, D0 - np.where(x_obs, X[r], 0.0), 0.0)
        sq = np.einsum("ij,ij->i", diff, diff)
        with np.errstate(divide="ignore", invalid="ignore"):
            dist = np.where(n_shared > 0, np.sqrt(sq * d / np.maximum(n_shared, 1)), np.inf)
        order = np.argsort(dist, kind="stable")
        for j in np.flatnonzero(miss[r]):
            cand = order[d_obs[order, j]]
            if cand.size < k and not warned:
                log.warning("only %d donor rows for k=%d; using all donors", cand.size, k)
                warned = True
            vals = D[cand[:k], j]
            out[r, j] = _mode(vals) if discrete[j] else float(np.mean(vals))

    if indicator_for is None:
        sources = [m.column_names[j] for j in cols_missing]
    else:
        sources = list(indicator_for)
    ind_names = [s + INDICATOR_SUFFIX for s in sources]
    ind_values = np.column_stack([miss[:, m.column_index(s)] for s in sources]).astype(float) if sources else np.zeros((n, 0))
    imputed = m.with_values(out).append_columns(ind_names, [FeatureKind.INDICATOR] * len(sources), ind_values)
    report = PreprocessReport(imputed_cells=int(miss.sum()), indicator_columns_added=len(sources))
    return imputed, report


def clean_columns(m: DataMatrix, sparse_threshold: float = 0.5) -> tuple[DataMatrix, PreprocessReport]:
    """drop_sparse_columns followed by drop_zero_variance."""
    m, sparse = drop_sparse_columns(m, sparse_threshold)
    m, constant = drop_zero_variance(m)
    return m, PreprocessReport(dropped_sparse=sparse, dropped_zero_variance=constant)


def clean_dataset(ds: LabeledDataset, sparse_threshold: float = 0.5) -> tuple[LabeledDataset, PreprocessReport]:
    features, report = clean_columns(ds.features, sparse_threshold)
    return ds.with_features(features), report


def impute_bundle(bundle: SplitBundle, k: int = 5) -> tuple[SplitBundle, PreprocessReport]:
    """Impute each split using training rows as the only donors.

    Holdout splits receive exactly the training split's indicator columns
    so all three share one schema.
    """
    train_feats = bundle.train.features
    train_imp, report = knn_impute(train_feats, k)
    sources = [n[: -len(INDICATOR_SUFFIX)] for n in train_imp.column_names[train_feats.n_cols:]]
    parts = [bundle.train.with_features(train_imp)]
    for part in (bundle.validation, bundle.test):
        imp, sub = knn_impute(part.features, k, donors=train_feats, indicator_for=sources)
        report.imputed_cells += sub.imputed_cells
        parts.append(part.with_features(imp))
    return SplitBundle(*parts), report
