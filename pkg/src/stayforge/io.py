"""Dataset file pair (``<name>.csv`` + ``<name>.schema.json``) and long-format inputs.

The CSV has a header row. Its first column is always ``row_id`` (opaque
patient identifier, not listed in the schema); every other cell is
numeric and an empty cell means MISSING. The schema is a JSON array of
``{"name", "kind", "categories"?}`` objects in column order; exactly
one entry has kind ``label`` for labeled datasets.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .data import DataMatrix, FeatureKind, LabeledDataset
from .errors import ParseError, SchemaMismatchError

ROW_ID = "row_id"


def dataset_paths(stem: str | os.PathLike) -> tuple[Path, Path]:
    stem = Path(stem)
    if stem.suffix == ".csv":
        stem = stem.with_suffix("")
    return stem.with_name(stem.name + ".csv"), stem.with_name(stem.name + ".schema.json")


def format_number(v: float) -> str:
    if np.isnan(v):
        return ""
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str | os.PathLike, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=False) + "\n")


def read_json(path: str | os.PathLike):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise ParseError(f"{path}: file not found") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None


def write_csv(path: str | os.PathLike, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(c if isinstance(c, str) else format_number(c) for c in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def file_digest(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_matrix(m: DataMatrix, stem: str | os.PathLike) -> tuple[Path, Path]:
    csv_path, schema_path = dataset_paths(stem)
    schema = []
    for name, kind in zip(m.column_names, m.column_kinds):
        entry = {"name": name, "kind": kind.value}
        if name in m.categories:
            entry["categories"] = list(m.categories[name])
        schema.append(entry)
    rows = ([rid, *vals] for rid, vals in zip(m.row_ids, m.values.tolist()))
    write_csv(csv_path, [ROW_ID, *m.column_names], rows)
    write_json(schema_path, schema)
    return csv_path, schema_path


def write_dataset(ds: LabeledDataset, stem: str | os.PathLike, label_name: str = "severe") -> tuple[Path, Path]:
    m = ds.features.append_columns([label_name], [FeatureKind.LABEL], ds.labels.astype(float))
    return write_matrix(m, stem)


def read_matrix(stem: str | os.PathLike) -> DataMatrix:
    csv_path, schema_path = dataset_paths(stem)
    schema = read_json(schema_path)
    if not isinstance(schema, list):
        raise ParseError(f"{schema_path}: schema must be a JSON array")
    names, kinds, categories = [], [], {}
    for i, entry in enumerate(schema):
        try:
            names.append(str(entry["name"]))
            kinds.append(FeatureKind(entry["kind"]))
        except (KeyError, TypeError, ValueError):
            raise ParseError(f"{schema_path}: bad schema entry {i}: {entry!r}") from None
        if entry.get("categories") is not None:
            categories[names[-1]] = tuple(str(c) for c in entry["categories"])

    try:
        fh = open(csv_path, newline="")
    except FileNotFoundError:
        raise ParseError(f"{csv_path}: file not found") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{csv_path}: empty file")
        if header[0] != ROW_ID:
            raise ParseError(f"{csv_path}:1: first column must be {ROW_ID!r}")
        if header[1:] != names:
            raise SchemaMismatchError(
                f"{csv_path}: CSV columns do not match {schema_path.name} "
                f"({len(header) - 1} vs {len(names)} columns)"
            )
        row_ids, rows = [], []
        for row_index, row in enumerate(reader):
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{csv_path}:{line}: row {row_index} has {len(row)} cells, expected {len(header)}"
                )
            try:
                rows.append([float(c) if c.strip() else np.nan for c in row[1:]])
            except ValueError as exc:
                raise ParseError(f"{csv_path}:{line}: row {row_index}: {exc}") from None
            row_ids.append(row[0])
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    return DataMatrix(names, kinds, values, row_ids, categories)


def read_dataset(stem: str | os.PathLike) -> LabeledDataset:
    m = read_matrix(stem)
    label_cols = m.indices_of_kind(FeatureKind.LABEL)
    if len(label_cols) != 1:
        raise SchemaMismatchError(f"{stem}: expected exactly one label column, found {len(label_cols)}")
    j = label_cols[0]
    labels = m.values[:, j]
    if np.isnan(labels).any() or not np.all((labels == 0) | (labels == 1)):
        raise ParseError(f"{stem}: label column {m.column_names[j]!r} must be 0/1 with no gaps")
    features = m.select_columns([i for i in range(m.n_cols) if i != j])
    return LabeledDataset(features, labels.astype(np.int64))


def read_events(path: str | os.PathLike) -> list[tuple[str, str]]:
    """Long-format events CSV with columns ``patient_id,code``."""
    path = Path(path)
    try:
        fh = open(path, newline="")
    except FileNotFoundError:
        raise ParseError(f"{path}: file not found") from None
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"patient_id", "code"} <= set(reader.fieldnames):
            raise ParseError(f"{path}:1: header must contain patient_id,code")
        events = []
        for row_index, row in enumerate(reader):
            pid, code = row.get("patient_id"), row.get("code")
            if not pid or not code:
                raise ParseError(f"{path}:{reader.line_num}: row {row_index} missing patient_id or code")
            events.append((pid.strip(), code.strip()))
    return events


def parse_timestamp(text: str) -> datetime:
    """ISO-8601 timestamp; naive values are taken as UTC."""
    ts = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


def read_encounters(path: str | os.PathLike) -> list[tuple[str, datetime, datetime]]:
    """Encounters CSV with columns ``patient_id,admission,discharge`` (ISO timestamps)."""
    path = Path(path)
    try:
        fh = open(path, newline="")
    except FileNotFoundError:
        raise ParseError(f"{path}: file not found") from None
    with fh:
        reader = csv.DictReader(fh)
        need = {"patient_id", "admission", "discharge"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise ParseError(f"{path}:1: header must contain patient_id,admission,discharge")
        out = []
        for row_index, row in enumerate(reader):
            try:
                out.append(
                    (row["patient_id"].strip(), parse_timestamp(row["admission"]), parse_timestamp(row["discharge"]))
                )
            except (ValueError, AttributeError) as exc:
                raise ParseError(f"{path}:{reader.line_num}: row {row_index}: {exc}") from None
    return out
