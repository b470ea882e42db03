"""Dataset representation, CSV ingestion, and min-max normalization.

A :class:`Dataset` is an immutable bundle of string point ids and a float64
feature matrix, optionally carrying the per-feature (min, max) pairs of the
scaling that produced it. CSV emission is canonical: integral values are
written without a decimal part, everything else with 17 significant digits,
so a parse of the emitted bytes recovers the stored doubles exactly.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from typing import BinaryIO, TextIO, Union

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_feature_matrix

__all__ = [
    "ColumnSchema",
    "DataPoint",
    "Dataset",
    "MinMaxNormalizer",
    "denormalize",
    "emit_csv",
    "format_value",
    "ingest_csv",
    "normalize",
]

CsvSource = Union[str, os.PathLike, bytes, BinaryIO, TextIO]


@dataclass(frozen=True)
class ColumnSchema:
    """Names the id column and the numeric feature columns of a CSV source."""

    id_column: str
    feature_columns: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "feature_columns", tuple(self.feature_columns))
        if not self.id_column:
            raise ValueError("schema requires an id column name")
        if len(self.feature_columns) == 0:
            raise ValueError("schema requires at least one feature column")


@dataclass(frozen=True)
class DataPoint:
    id: str
    features: np.ndarray


@dataclass(frozen=True)
class Dataset:
    """Immutable collection of identified feature vectors.

    ``normalization`` is ``None`` for raw data, otherwise the per-feature
    (min, max) pairs used by the scaling that produced the values.
    """

    ids: tuple[str, ...]
    features: np.ndarray
    normalization: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        arr = as_feature_matrix(self.features, name="features")
        object.__setattr__(self, "features", arr)
        if len(self.ids) != arr.shape[0]:
            raise ValueError(
                f"{len(self.ids)} ids for {arr.shape[0]} feature rows"
            )
        if self.normalization is not None:
            norm = tuple((float(lo), float(hi)) for lo, hi in self.normalization)
            object.__setattr__(self, "normalization", norm)
            if len(norm) != arr.shape[1]:
                raise ValueError("normalization record does not match dimension")
            if arr.min() < 0.0 or arr.max() > 1.0:
                raise ValueError("normalized features must lie in [0, 1]")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def points(self) -> tuple[DataPoint, ...]:
        return tuple(
            DataPoint(i, row) for i, row in zip(self.ids, self.features)
        )


def _read_text(source: CsvSource) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return fh.read().decode("utf-8")
    data = source.read()
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data


def ingest_csv(source: CsvSource, schema: ColumnSchema) -> Dataset:
    """Parse a headered CSV into a raw Dataset, features in schema order.

    Rejects missing schema columns, rows of the wrong arity, and feature
    cells that do not parse to a finite number; errors name the offending
    row (file line number, header = line 1) and column.
    """
    text = _read_text(source)
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        raise ValueError("empty CSV source: no header row")

    positions = {name: i for i, name in enumerate(header)}
    missing = [
        c for c in (schema.id_column, *schema.feature_columns) if c not in positions
    ]
    if missing:
        raise ValueError(f"columns missing from header: {', '.join(missing)}")
    id_pos = positions[schema.id_column]
    feat_pos = [positions[c] for c in schema.feature_columns]

    ids: list[str] = []
    rows: list[list[float]] = []
    for row in reader:
        line = reader.line_num
        if len(row) != len(header):
            raise ValueError(
                f"row {line}: expected {len(header)} fields, got {len(row)}"
            )
        values = []
        for col, pos in zip(schema.feature_columns, feat_pos):
            cell = row[pos]
            try:
                value = float(cell)
            except ValueError:
                raise ValueError(
                    f"row {line}, column '{col}': not a number: {cell!r}"
                ) from None
            if not math.isfinite(value):
                raise ValueError(
                    f"row {line}, column '{col}': non-finite value: {cell!r}"
                )
            values.append(value)
        ids.append(row[id_pos])
        rows.append(values)

    if not rows:
        raise ValueError("empty CSV source: no data rows")
    return Dataset(ids=tuple(ids), features=np.array(rows, dtype=np.float64))


def format_value(v: float) -> str:
    """Canonical CSV rendering of a double; round-trips through float()."""
    v = float(v)
    if v.is_integer():
        return str(int(v))
    return format(v, ".17g")


def emit_csv(ds: Dataset, schema: ColumnSchema) -> str:
    """Render a Dataset back to CSV text under the given column names."""
    if len(schema.feature_columns) != ds.d:
        raise ValueError(
            f"schema names {len(schema.feature_columns)} features, dataset has {ds.d}"
        )
    lines = [",".join((schema.id_column, *schema.feature_columns))]
    for pid, row in zip(ds.ids, ds.features):
        lines.append(",".join((pid, *(format_value(v) for v in row))))
    return "\n".join(lines) + "\n"


def _scale(values: np.ndarray, mins: np.ndarray, maxs: np.ndarray) -> np.ndarray:
    spans = maxs - mins
    safe = np.where(spans > 0.0, spans, 1.0)
    return (values - mins) / safe


def normalize(ds: Dataset) -> Dataset:
    """Min-max scale every feature to [0, 1], recording the (min, max) used.

    Constant columns map to 0.0 and keep their (min, max) pair, so the
    stored record always inverts the transform.
    """
    if ds.normalization is not None:
        raise ValueError("dataset is already normalized")
    mins = ds.features.min(axis=0)
    maxs = ds.features.max(axis=0)
    scaled = _scale(ds.features, mins, maxs)
    record = tuple((float(lo), float(hi)) for lo, hi in zip(mins, maxs))
    return Dataset(ids=ds.ids, features=scaled, normalization=record)


def denormalize(ds: Dataset) -> Dataset:
    """Invert :func:`normalize` using the stored (min, max) record."""
    if ds.normalization is None:
        raise ValueError("dataset carries no normalization record")
    mins = np.array([lo for lo, _ in ds.normalization])
    maxs = np.array([hi for _, hi in ds.normalization])
    raw = ds.features * (maxs - mins) + mins
    return Dataset(ids=ds.ids, features=raw, normalization=None)


class MinMaxNormalizer(BaseEstimator, TransformerMixin):
    """Per-feature min-max scaler to [0, 1]; constant features map to 0.0."""

    def fit(self, X, y=None):
        X = as_feature_matrix(X)
        self.data_min_ = X.min(axis=0)
        self.data_max_ = X.max(axis=0)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "data_min_")
        X = as_feature_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, normalizer was fit on {self.n_features_in_}"
            )
        return _scale(X, self.data_min_, self.data_max_)

    def inverse_transform(self, X):
        check_is_fitted(self, "data_min_")
        X = np.asarray(X, dtype=np.float64)
        return X * (self.data_max_ - self.data_min_) + self.data_min_
