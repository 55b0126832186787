"""Feature/label containers and their CSV format.

CSV layout: a header ``f0,...,f{d-1}`` optionally followed by ``label``,
then one row per point.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputError


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray | None = None

    def __post_init__(self) -> None:
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise InputError(f"dataset needs at least one row and one column, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise InputError("dataset contains non-finite values")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        if self.y is not None:
            y = np.asarray(self.y)
            if y.shape != (X.shape[0],):
                raise InputError(f"labels have shape {y.shape}, expected ({X.shape[0]},)")
            y.setflags(write=False)
            object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]


def _parse_label(text: str):
    value = float(text)
    return int(value) if value.is_integer() and "." not in text and "e" not in text.lower() else value


def parse_csv(text: str) -> Dataset:
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r]
    if not rows:
        raise InputError("empty CSV")
    header = [h.strip() for h in rows[0]]
    has_label = header[-1] == "label"
    features = header[:-1] if has_label else header
    if not features or features != [f"f{i}" for i in range(len(features))]:
        raise InputError(f"bad CSV header {header!r}; expected f0,...,f{{d-1}}[,label]")
    if len(rows) < 2:
        raise InputError("CSV has no data rows")
    d = len(features)
    X = np.empty((len(rows) - 1, d))
    labels = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise InputError(f"line {i}: expected {len(header)} fields, got {len(row)}")
        try:
            X[i - 2] = [float(v) for v in row[:d]]
            if has_label:
                labels.append(_parse_label(row[d].strip()))
        except ValueError as exc:
            raise InputError(f"line {i}: {exc}") from exc
    y = None
    if has_label:
        y = np.array(labels, dtype=int if all(isinstance(v, int) for v in labels) else float)
    return Dataset(X, y)


def read_csv(path) -> Dataset:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    return parse_csv(text)


def format_csv(data: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = [f"f{i}" for i in range(data.dim)]
    if data.y is not None:
        header.append("label")
    w.writerow(header)
    for i in range(data.n):
        row = [repr(float(v)) for v in data.X[i]]
        if data.y is not None:
            v = data.y[i]
            row.append(str(int(v)) if np.issubdtype(data.y.dtype, np.integer) else repr(float(v)))
        w.writerow(row)
    return buf.getvalue()


def write_csv(data: Dataset, path) -> None:
    Path(path).write_text(format_csv(data), encoding="utf-8")


def rows_present(points, raw, rtol: float = 1e-9) -> bool:
    """True when a row of ``points`` reproduces a row of ``raw`` up to round-off."""
    points = np.asarray(points, dtype=float)
    raw = np.asarray(raw, dtype=float)
    if points.size == 0 or raw.size == 0 or points.shape[1] != raw.shape[1]:
        return False
    scale = 1.0 + float(np.abs(raw).max())
    dist, _ = cKDTree(raw).query(points, k=1)
    return bool(np.any(dist <= rtol * scale))
