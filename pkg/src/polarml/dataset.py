"""State-year panel tables: ingestion, seeded holdout splits and min-max scaling.

A table holds ``m`` rows keyed by ``(state, year)``, an ``m x n`` feature
matrix and, for labeled tables, the House and Senate polarization vectors.
Rows are always kept sorted by year, then state name.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DataError, SchemaError
from .rng import stream

LABEL_COLUMNS = ("house_polarization", "senate_polarization")
TASKS = ("house", "senate")


class RowKey(NamedTuple):
    state: str
    year: int


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _same(a, b):
    if a is None or b is None:
        return a is None and b is None
    return a.shape == b.shape and bool(np.array_equal(a, b))


@dataclass(frozen=True, eq=False)
class DatasetTable:
    rows: tuple
    features: np.ndarray
    feature_names: tuple
    house_labels: np.ndarray | None = None
    senate_labels: np.ndarray | None = None
    # False when the source file was not already in (year, state) order
    source_sorted: bool = field(default=True, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(RowKey(str(s), int(y)) for s, y in self.rows))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        feats = _frozen(self.features)
        if feats.ndim != 2:
            feats = _frozen(feats.reshape(len(self.rows), -1))
        object.__setattr__(self, "features", feats)
        m, n = feats.shape
        if m != len(self.rows):
            raise DataError(f"{len(self.rows)} row keys but {m} feature rows")
        if n != len(self.feature_names):
            raise DataError(f"{len(self.feature_names)} feature names but {n} feature columns")
        if len(set(self.rows)) != m:
            dup = next(k for k in self.rows if self.rows.count(k) > 1)
            raise DataError(f"duplicate key ({dup.state!r}, {dup.year})")
        if any(not k.state for k in self.rows):
            raise DataError("empty state name")
        if not np.all(np.isfinite(feats)):
            raise DataError("feature matrix contains missing or non-finite values")
        if (self.house_labels is None) != (self.senate_labels is None):
            raise DataError("either both or neither label vectors must be present")
        for name in ("house_labels", "senate_labels"):
            lab = getattr(self, name)
            if lab is None:
                continue
            lab = _frozen(lab)
            if lab.shape != (m,):
                raise DataError(f"{name} has shape {lab.shape}, expected ({m},)")
            if not np.all(np.isfinite(lab)) or np.any(lab <= 0):
                raise DataError(f"{name} must be strictly positive")
            object.__setattr__(self, name, lab)

    def __eq__(self, other):
        if not isinstance(other, DatasetTable):
            return NotImplemented
        return (self.rows == other.rows and self.feature_names == other.feature_names
                and _same(self.features, other.features)
                and _same(self.house_labels, other.house_labels)
                and _same(self.senate_labels, other.senate_labels))

    __hash__ = None

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def n(self) -> int:
        return len(self.feature_names)

    @property
    def has_labels(self) -> bool:
        return self.house_labels is not None

    def label(self, task: str) -> np.ndarray:
        if task not in TASKS:
            raise ValueError(f"unknown task {task!r}; expected one of {TASKS}")
        if not self.has_labels:
            raise DataError("table has no labels")
        return self.house_labels if task == "house" else self.senate_labels

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.feature_names.index(name)
        except ValueError:
            raise SchemaError(f"no feature named {name!r}") from None
        return self.features[:, j]

    def select(self, names: Sequence[str]) -> "DatasetTable":
        """Restrict to the named feature columns, in the given order."""
        idx = []
        for name in names:
            if name not in self.feature_names:
                raise SchemaError(f"no feature named {name!r}", column=name)
            idx.append(self.feature_names.index(name))
        return DatasetTable(self.rows, self.features[:, idx], tuple(names),
                            self.house_labels, self.senate_labels)

    def subset(self, indices) -> "DatasetTable":
        idx = np.asarray(indices, dtype=int)
        lab = (lambda v: None if v is None else v[idx])
        return DatasetTable(tuple(self.rows[i] for i in idx), self.features[idx],
                            self.feature_names, lab(self.house_labels), lab(self.senate_labels))

    def without_labels(self) -> "DatasetTable":
        return DatasetTable(self.rows, self.features, self.feature_names)


def _sort_order(rows):
    return sorted(range(len(rows)), key=lambda i: (rows[i].year, rows[i].state))


def load_table(path, schema: Sequence[str] | None = None,
               labels_expected: bool | None = True) -> DatasetTable:
    """Read a delimited panel file into a validated :class:`DatasetTable`.

    Parameters
    ----------
    path : path-like
        UTF-8 CSV with header ``state, year, <features...>[, house_polarization,
        senate_polarization]``.
    schema : sequence of str, optional
        Expected feature names, in order. When omitted the header defines them.
    labels_expected : bool or None
        ``True`` requires both label columns, ``False`` forbids them, ``None``
        accepts either layout.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError("file not found", path=path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError("missing header row", path=path) from None
        body = [(reader.line_num, r) for r in reader if any(c.strip() for c in r)]

    if header[:2] != ["state", "year"]:
        raise SchemaError("header must start with 'state,year'", path=path, row=1)
    rest = header[2:]
    labeled = rest[-2:] == list(LABEL_COLUMNS)
    feature_cols = rest[:-2] if labeled else rest
    for lab in LABEL_COLUMNS:
        if lab in feature_cols:
            raise SchemaError("label columns must be the last two, house then senate",
                              path=path, row=1, column=lab)
    if labels_expected is True and not labeled:
        raise SchemaError("label columns expected but absent", path=path, row=1)
    if labels_expected is False and labeled:
        raise SchemaError("label columns present in an unlabeled table", path=path, row=1)
    if schema is not None:
        schema = list(schema)
        extra = [c for c in feature_cols if c not in schema]
        missing = [c for c in schema if c not in feature_cols]
        if extra:
            raise SchemaError("unexpected feature column", path=path, row=1, column=extra[0])
        if missing:
            raise SchemaError("missing feature column", path=path, row=1, column=missing[0])
        if feature_cols != schema:
            raise SchemaError("feature columns out of order", path=path, row=1)
    if len(set(header)) != len(header):
        raise SchemaError("duplicate column names in header", path=path, row=1)
    if not body:
        raise DataError("no rows", path=path)

    rows, feats, labels = [], [], []
    seen = {}
    for line, cells in body:
        if len(cells) != len(header):
            raise DataError(f"expected {len(header)} cells, found {len(cells)}", path=path, row=line)
        state = cells[0].strip()
        if not state:
            raise DataError("empty state name", path=path, row=line, column="state")
        try:
            year = int(cells[1])
        except ValueError:
            raise DataError(f"non-integer year {cells[1]!r}", path=path, row=line,
                            column="year") from None
        values = []
        for name, cell in zip(header[2:], cells[2:]):
            cell = cell.strip()
            try:
                v = float(cell)
            except ValueError:
                v = math.nan
            if not math.isfinite(v):
                what = "missing value" if not cell else f"non-numeric value {cell!r}"
                raise DataError(what, path=path, row=line, column=name)
            values.append(v)
        key = RowKey(state, year)
        if key in seen:
            raise DataError(f"duplicate key ({state!r}, {year}), first seen on line {seen[key]}",
                            path=path, row=line)
        seen[key] = line
        if labeled:
            h, s = values[-2:]
            for name, v in zip(LABEL_COLUMNS, (h, s)):
                if v <= 0:
                    raise DataError(f"label must be positive, got {v}", path=path, row=line,
                                    column=name)
            labels.append((h, s))
            values = values[:-2]
        rows.append(key)
        feats.append(values)

    order = _sort_order(rows)
    already = order == list(range(len(rows)))
    feats_arr = np.array(feats, dtype=float).reshape(len(rows), len(feature_cols))[order]
    h = s = None
    if labeled:
        lab = np.array(labels, dtype=float)[order]
        h, s = lab[:, 0], lab[:, 1]
    return DatasetTable(tuple(rows[i] for i in order), feats_arr, tuple(feature_cols), h, s,
                        source_sorted=already)


def write_table(table: DatasetTable, path, precision: int | None = None) -> None:
    """Serialize ``table`` in the same layout :func:`load_table` reads.

    With ``precision=None`` floats are written with ``repr`` so that reading the
    file back reproduces every value bit for bit.
    """
    fmt = repr if precision is None else (lambda v: f"{v:.{precision}f}")
    header = ["state", "year", *table.feature_names]
    if table.has_labels:
        header += list(LABEL_COLUMNS)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, key in enumerate(table.rows):
            vals = [float(v) for v in table.features[i]]
            if table.has_labels:
                vals += [float(table.house_labels[i]), float(table.senate_labels[i])]
            w.writerow([key.state, key.year, *(fmt(v) for v in vals)])


@dataclass(frozen=True)
class DataSplit:
    train_indices: tuple
    validation_indices: tuple
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "train_indices", tuple(int(i) for i in self.train_indices))
        object.__setattr__(self, "validation_indices",
                           tuple(int(i) for i in self.validation_indices))


def split_train_validation(table: DatasetTable | int, train_fraction: float = 0.8,
                           seed: int = 0) -> DataSplit:
    """Shuffle row indices with a seeded Fisher-Yates pass and cut off the training head.

    ``table`` may also be a plain row count. The training set holds
    ``round(train_fraction * m)`` indices.
    """
    m = table if isinstance(table, int) else table.m
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n_train = round(train_fraction * m)
    if m < 2 or n_train < 1 or n_train >= m:
        raise ValueError(f"cannot split {m} rows with train_fraction={train_fraction}")
    perm = stream(seed, "split").permutation(m)
    return DataSplit(perm[:n_train], perm[n_train:], seed)


@dataclass(frozen=True, eq=False)
class ScalerParams:
    feature_names: tuple
    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "mins", _frozen(self.mins))
        object.__setattr__(self, "maxs", _frozen(self.maxs))
        if not (len(self.feature_names) == self.mins.size == self.maxs.size):
            raise ValueError("scaler parameter count does not match feature count")
        if np.any(self.mins > self.maxs):
            raise ValueError("scaler min exceeds max")

    def __eq__(self, other):
        if not isinstance(other, ScalerParams):
            return NotImplemented
        return (self.feature_names == other.feature_names and _same(self.mins, other.mins)
                and _same(self.maxs, other.maxs))

    __hash__ = None

    def to_dict(self) -> dict:
        return {name: {"min": float(lo), "max": float(hi)}
                for name, lo, hi in zip(self.feature_names, self.mins, self.maxs)}

    @classmethod
    def from_dict(cls, doc: dict) -> "ScalerParams":
        names = list(doc)
        return cls(names, [doc[k]["min"] for k in names], [doc[k]["max"] for k in names])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ScalerParams":
        return cls.from_dict(json.loads(text))


def fit_minmax(table: DatasetTable, split: DataSplit | None = None) -> ScalerParams:
    """Per-feature extrema over the training rows (all rows when ``split`` is None)."""
    X = table.features if split is None else table.features[list(split.train_indices)]
    if X.shape[0] == 0:
        raise ValueError("cannot fit a scaler on zero training rows")
    return ScalerParams(table.feature_names, X.min(axis=0), X.max(axis=0))


def apply_minmax(X, params: ScalerParams) -> np.ndarray:
    """Affine map onto [0, 1] using training extrema.

    Out-of-range rows are not clamped. Constant training columns map to 0.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.mins.size:
        raise ValueError(f"expected {params.mins.size} columns, got shape {X.shape}")
    span = params.maxs - params.mins
    safe = np.where(span > 0, span, 1.0)
    out = (X - params.mins) / safe
    out[:, span == 0] = 0.0
    return out


def invert_minmax(Xs, params: ScalerParams) -> np.ndarray:
    Xs = np.asarray(Xs, dtype=float)
    return Xs * (params.maxs - params.mins) + params.mins
