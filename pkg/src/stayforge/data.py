"""Dataset representation, event pivoting, table merging and stratified splits."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateSplitError,
    EmptyInputError,
    InvalidFractionError,
    InvariantViolation,
    MissingValueError,
    SchemaConflictError,
)

# MISSING cells are stored as NaN; real values are never NaN.
MISSING = float("nan")


class FeatureKind(str, enum.Enum):
    CONTINUOUS = "continuous"
    CATEGORICAL = "categorical"
    INDICATOR = "indicator"
    LABEL = "label"

    @property
    def is_discrete(self) -> bool:
        return self in (FeatureKind.CATEGORICAL, FeatureKind.INDICATOR)


@dataclass(frozen=True)
class DataMatrix:
    """An n x d numeric grid with per-column names and kinds.

    Categorical columns hold dense integer codes; ``categories`` maps a
    column name to its code -> string table (index = code). Columns
    without an entry use their numeric codes as labels.
    """

    column_names: tuple[str, ...]
    column_kinds: tuple[FeatureKind, ...]
    values: np.ndarray
    row_ids: tuple[str, ...]
    categories: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim == 1 and values.size == 0:
            values = values.reshape(len(self.row_ids), len(self.column_names))
        if values.ndim != 2:
            raise InvariantViolation(f"values must be 2-D, got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_names", tuple(self.column_names))
        object.__setattr__(self, "column_kinds", tuple(FeatureKind(k) for k in self.column_kinds))
        object.__setattr__(self, "row_ids", tuple(str(r) for r in self.row_ids))
        object.__setattr__(self, "categories", {k: tuple(v) for k, v in self.categories.items()})

        n, d = values.shape
        if len(self.column_names) != d or len(self.column_kinds) != d:
            raise InvariantViolation(
                f"{d} columns but {len(self.column_names)} names / {len(self.column_kinds)} kinds"
            )
        if len(self.row_ids) != n:
            raise InvariantViolation(f"{n} rows but {len(self.row_ids)} row ids")
        if len(set(self.row_ids)) != n:
            raise InvariantViolation("row ids are not unique")
        if len(set(self.column_names)) != d:
            raise InvariantViolation("column names are not unique")
        for j, kind in enumerate(self.column_kinds):
            if kind is FeatureKind.INDICATOR:
                col = values[:, j]
                obs = col[~np.isnan(col)]
                if not np.all((obs == 0) | (obs == 1)):
                    raise InvariantViolation(f"indicator column {self.column_names[j]!r} not 0/1")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.values)

    def has_missing(self) -> bool:
        return bool(self.missing_mask.any())

    def dense(self) -> np.ndarray:
        """Values as a float array; raises if any cell is MISSING."""
        if self.has_missing():
            raise MissingValueError(
                f"{int(self.missing_mask.sum())} MISSING cells; impute before numeric use"
            )
        return self.values

    def column_index(self, name: str) -> int:
        try:
            return self.column_names.index(name)
        except ValueError:
            raise KeyError(name) from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_index(name)]

    def indices_of_kind(self, *kinds: FeatureKind) -> list[int]:
        return [j for j, k in enumerate(self.column_kinds) if k in kinds]

    def select_columns(self, indices: Sequence[int]) -> "DataMatrix":
        indices = list(indices)
        names = [self.column_names[j] for j in indices]
        return DataMatrix(
            column_names=names,
            column_kinds=[self.column_kinds[j] for j in indices],
            values=self.values[:, indices].reshape(self.n_rows, len(indices)),
            row_ids=self.row_ids,
            categories={k: v for k, v in self.categories.items() if k in names},
        )

    def drop_columns(self, names: Iterable[str]) -> "DataMatrix":
        drop = set(names)
        return self.select_columns([j for j, c in enumerate(self.column_names) if c not in drop])

    def select_rows(self, indices: Sequence[int]) -> "DataMatrix":
        indices = np.asarray(indices, dtype=np.intp)
        return DataMatrix(
            column_names=self.column_names,
            column_kinds=self.column_kinds,
            values=self.values[indices].reshape(len(indices), self.n_cols),
            row_ids=[self.row_ids[i] for i in indices],
            categories=self.categories,
        )

    def with_values(self, values: np.ndarray, row_ids: Sequence[str] | None = None) -> "DataMatrix":
        return DataMatrix(
            column_names=self.column_names,
            column_kinds=self.column_kinds,
            values=values,
            row_ids=self.row_ids if row_ids is None else row_ids,
            categories=self.categories,
        )

    def append_columns(
        self, names: Sequence[str], kinds: Sequence[FeatureKind], values: np.ndarray
    ) -> "DataMatrix":
        values = np.asarray(values, dtype=np.float64).reshape(self.n_rows, len(names))
        return DataMatrix(
            column_names=self.column_names + tuple(names),
            column_kinds=self.column_kinds + tuple(kinds),
            values=np.hstack([self.values, values]),
            row_ids=self.row_ids,
            categories=self.categories,
        )


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix plus binary labels (1 = severe stay)."""

    features: DataMatrix
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).copy()
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        if labels.ndim != 1 or labels.shape[0] != self.features.n_rows:
            raise InvariantViolation(
                f"{labels.shape[0]} labels for {self.features.n_rows} feature rows"
            )
        if not np.all((labels == 0) | (labels == 1)):
            raise InvariantViolation("labels must be 0 or 1")
        if FeatureKind.LABEL in self.features.column_kinds:
            raise InvariantViolation("features must not contain the label column")

    def __len__(self) -> int:
        return self.features.n_rows

    @property
    def row_ids(self) -> tuple[str, ...]:
        return self.features.row_ids

    def class_counts(self) -> tuple[int, int]:
        n_pos = int(self.labels.sum())
        return len(self.labels) - n_pos, n_pos

    def select_rows(self, indices: Sequence[int]) -> "LabeledDataset":
        indices = np.asarray(indices, dtype=np.intp)
        return LabeledDataset(self.features.select_rows(indices), self.labels[indices])

    def with_features(self, features: DataMatrix) -> "LabeledDataset":
        return LabeledDataset(features, self.labels)


@dataclass(frozen=True)
class SplitBundle:
    train: LabeledDataset
    validation: LabeledDataset
    test: LabeledDataset

    def __post_init__(self):
        ids = [set(part.row_ids) for part in (self.train, self.validation, self.test)]
        if ids[0] & ids[1] or ids[0] & ids[2] or ids[1] & ids[2]:
            raise InvariantViolation("split parts share row ids")


def pivot_events(events: Iterable[tuple[str, str]]) -> DataMatrix:
    """One row per patient, one 0/1 presence column per distinct code.

    Columns are ordered lexicographically by code, rows by the first
    appearance of each patient id.
    """
    events = [(str(p), str(c)) for p, c in events]
    if not events:
        raise EmptyInputError("no events to pivot")
    patients: dict[str, int] = {}
    for pid, _ in events:
        patients.setdefault(pid, len(patients))
    codes = sorted({c for _, c in events})
    code_idx = {c: j for j, c in enumerate(codes)}
    values = np.zeros((len(patients), len(codes)))
    for pid, code in events:
        values[patients[pid], code_idx[code]] = 1.0
    return DataMatrix(
        column_names=codes,
        column_kinds=[FeatureKind.CATEGORICAL] * len(codes),
        values=values,
        row_ids=list(patients),
        categories={c: ("0", "1") for c in codes},
    )


def inner_merge(tables: Sequence[DataMatrix], names: Sequence[str] | None = None) -> DataMatrix:
    """Keep patients present in every table and concatenate their columns.

    When ``names`` is given, each column is prefixed ``<table>.<column>``.
    Rows follow the first table's order.
    """
    if not tables:
        raise EmptyInputError("inner_merge needs at least one table")
    if names is not None and len(names) != len(tables):
        raise ValueError("one name per table required")

    def prefixed(i: int, col: str) -> str:
        return col if names is None else f"{names[i]}.{col}"

    all_names: list[str] = []
    kinds: list[FeatureKind] = []
    categories: dict[str, tuple[str, ...]] = {}
    for i, t in enumerate(tables):
        for col, kind in zip(t.column_names, t.column_kinds):
            new = prefixed(i, col)
            if new in all_names:
                raise SchemaConflictError(f"duplicate column {new!r} after merge")
            all_names.append(new)
            kinds.append(kind)
            if col in t.categories:
                categories[new] = t.categories[col]

    common = set(tables[0].row_ids)
    for t in tables[1:]:
        common &= set(t.row_ids)
    row_ids = [r for r in tables[0].row_ids if r in common]

    blocks = []
    for t in tables:
        pos = {r: i for i, r in enumerate(t.row_ids)}
        idx = np.array([pos[r] for r in row_ids], dtype=np.intp)
        blocks.append(t.values[idx].reshape(len(row_ids), t.n_cols))
    values = np.hstack(blocks) if blocks else np.zeros((len(row_ids), 0))
    return DataMatrix(all_names, kinds, values, row_ids, categories)


def stratified_split(
    ds: LabeledDataset, holdout_fraction: float, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Split into (remainder, holdout), preserving per-class proportions.

    Each class contributes round-half-up(n_c * fraction) rows to the
    holdout, drawn without replacement. Both parts keep input row order.
    """
    if not 0.0 < holdout_fraction < 1.0:
        raise InvalidFractionError(f"holdout fraction must be in (0, 1), got {holdout_fraction}")
    rng = np.random.default_rng(seed)
    in_holdout = np.zeros(len(ds), dtype=bool)
    for cls in (0, 1):
        members = np.flatnonzero(ds.labels == cls)
        if members.size == 0:
            raise DegenerateSplitError(f"class {cls} has no rows")
        n_hold = int(np.floor(members.size * holdout_fraction + 0.5))
        if n_hold >= members.size:
            raise DegenerateSplitError(
                f"class {cls} would lose all {members.size} rows from the remainder"
            )
        chosen = rng.choice(members, size=n_hold, replace=False)
        in_holdout[chosen] = True
    return ds.select_rows(np.flatnonzero(~in_holdout)), ds.select_rows(np.flatnonzero(in_holdout))


def three_way_split(
    ds: LabeledDataset, test_fraction: float = 0.2, validation_fraction: float = 0.2, seed: int = 0
) -> SplitBundle:
    """Test split first, then validation taken from the remainder."""
    seq = np.random.SeedSequence(seed)
    test_seed, val_seed = (int(s.generate_state(1, np.uint64)[0]) for s in seq.spawn(2))
    remainder, test = stratified_split(ds, test_fraction, test_seed)
    train, validation = stratified_split(remainder, validation_fraction, val_seed)
    return SplitBundle(train, validation, test)
