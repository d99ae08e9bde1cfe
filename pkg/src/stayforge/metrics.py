"""Classification metrics, ROC/AUC, mutual-information ranking and PCA."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .data import FeatureKind, LabeledDataset
from .errors import InsufficientDimensionsError, UndefinedAUCError

N_MI_BINS = 10


@dataclass
class MetricsReport:
    tp: int
    fp: int
    fn: int
    tn: int
    f1: float
    accuracy: float
    precision: float
    recall: float
    auc: float
    roc: list[tuple[float, float]] = field(default_factory=list)

    def to_dict(self, include_roc: bool = False) -> dict:
        d = asdict(self)
        if not include_roc:
            d.pop("roc")
        else:
            d["roc"] = [list(p) for p in self.roc]
        return d


def _as_binary(a, name: str) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 1 or not np.all((a == 0) | (a == 1)):
        raise ValueError(f"{name} must be a 1-D array of 0/1")
    return a.astype(np.int64)


def confusion(pred, truth) -> tuple[int, int, int, int]:
    """(tp, fp, fn, tn) with label 1 (severe) as the positive class."""
    pred, truth = _as_binary(pred, "pred"), _as_binary(truth, "truth")
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.size} predictions, {truth.size} labels")
    tp = int(np.sum((pred == 1) & (truth == 1)))
    fp = int(np.sum((pred == 1) & (truth == 0)))
    fn = int(np.sum((pred == 0) & (truth == 1)))
    tn = int(np.sum((pred == 0) & (truth == 0)))
    return tp, fp, fn, tn


def f1_from_pr(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def scalar_metrics(tp: int, fp: int, fn: int, tn: int) -> tuple[float, float, float, float]:
    """(precision, recall, f1, accuracy); zero denominators give 0."""
    n = tp + fp + fn + tn
    if n <= 0:
        raise ValueError("no samples")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return precision, recall, f1_from_pr(precision, recall), (tp + tn) / n


def f1_score(pred, truth) -> float:
    return scalar_metrics(*confusion(pred, truth))[2]


def roc_curve(scores, truth) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(fpr, tpr, thresholds) over every distinct score, highest first.

    Equal scores form a single step. The first point is (0, 0) at
    threshold +inf.
    """
    scores = np.asarray(scores, dtype=np.float64)
    truth = _as_binary(truth, "truth")
    if scores.shape != truth.shape:
        raise ValueError("scores and truth differ in length")
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError("ROC needs both classes present")
    order = np.argsort(-scores, kind="stable")
    s, t = scores[order], truth[order]
    last_of_group = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tps = np.cumsum(t)[last_of_group]
    fps = (last_of_group + 1) - tps
    fpr = np.r_[0.0, fps / n_neg]
    tpr = np.r_[0.0, tps / n_pos]
    thresholds = np.r_[np.inf, s[last_of_group]]
    return fpr, tpr, thresholds


def roc_auc(scores, truth) -> tuple[list[tuple[float, float]], float]:
    fpr, tpr, _ = roc_curve(scores, truth)
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return list(zip(fpr.tolist(), tpr.tolist())), auc


def evaluate_scores(scores, truth, threshold: float = 0.5) -> MetricsReport:
    scores = np.asarray(scores, dtype=np.float64)
    pred = (scores >= threshold).astype(np.int64)
    tp, fp, fn, tn = confusion(pred, truth)
    precision, recall, f1, accuracy = scalar_metrics(tp, fp, fn, tn)
    roc, auc = roc_auc(scores, truth)
    return MetricsReport(tp, fp, fn, tn, f1, accuracy, precision, recall, auc, roc)


def equal_frequency_bins(x, n_bins: int = N_MI_BINS) -> np.ndarray:
    """Bin index per value using quantile edges; equal values share a bin."""
    x = np.asarray(x, dtype=np.float64)
    edges = np.quantile(x, np.arange(1, n_bins) / n_bins)
    return np.searchsorted(edges, x, side="right")


def _plugin_mi(a: np.ndarray, b: np.ndarray) -> float:
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1.0)
    pxy = table / table.sum()
    px = pxy.sum(axis=1, keepdims=True)
    py = pxy.sum(axis=0, keepdims=True)
    nz = pxy > 0
    mi = float(np.sum(pxy[nz] * np.log(pxy[nz] / (px @ py)[nz])))
    return max(mi, 0.0)


def mutual_information(feature, labels, continuous: bool = False) -> float:
    """Plug-in mutual information in nats.

    Continuous features are first cut into 10 equal-frequency bins.
    """
    feature = np.asarray(feature, dtype=np.float64)
    labels = np.asarray(labels)
    if feature.size < 2 or feature.shape != labels.shape:
        raise ValueError("need >= 2 rows of equal length")
    if np.unique(labels).size < 2:
        return 0.0
    if continuous:
        feature = equal_frequency_bins(feature)
    return _plugin_mi(feature, labels)


def feature_scores(ds: LabeledDataset) -> list[tuple[str, float]]:
    feats = ds.features
    X = feats.dense()
    return [
        (name, mutual_information(X[:, j], ds.labels, continuous=kind is FeatureKind.CONTINUOUS))
        for j, (name, kind) in enumerate(zip(feats.column_names, feats.column_kinds))
    ]


def top_k_features(ds: LabeledDataset, k: int = 20) -> list[tuple[str, float]]:
    """Columns ranked by mutual information with the label; ties by name."""
    if k > ds.features.n_cols:
        raise ValueError(f"k={k} exceeds {ds.features.n_cols} feature columns")
    ranked = sorted(feature_scores(ds), key=lambda p: (-p[1], p[0]))
    return ranked[:k]


@dataclass
class PCAResult:
    coordinates: np.ndarray  # n x 2
    explained_variance_ratio: np.ndarray  # length 2
    components: np.ndarray  # 2 x d
    column_names: list[str]


def pca_project(X, column_names: list[str] | None = None) -> PCAResult:
    """Project onto the top two principal directions.

    Each component is signed so its largest-magnitude loading is positive.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] < 2:
        raise InsufficientDimensionsError("PCA needs at least 2 continuous columns")
    if X.shape[0] < 3:
        raise InsufficientDimensionsError("PCA needs at least 3 rows")
    centered = X - X.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:2].copy()
    for i in range(comps.shape[0]):
        if comps[i, np.argmax(np.abs(comps[i]))] < 0:
            comps[i] = -comps[i]
    var = s**2
    total = var.sum()
    ratio = var[:2] / total if total > 0 else np.zeros(2)
    names = list(column_names) if column_names is not None else [f"x{j}" for j in range(X.shape[1])]
    return PCAResult(centered @ comps.T, ratio, comps, names)


def pca_dataset(ds: LabeledDataset) -> PCAResult:
    cols = ds.features.indices_of_kind(FeatureKind.CONTINUOUS)
    if len(cols) < 2:
        raise InsufficientDimensionsError(f"{len(cols)} continuous columns; PCA needs 2")
    X = ds.features.dense()[:, cols]
    return pca_project(X, [ds.features.column_names[j] for j in cols])
