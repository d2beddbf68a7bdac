"""Curve containers and the curves CSV format.

File layout (UTF-8, comma separated, no header)::

    t_1,t_2,...,t_m          <- time grid
    y,x_1,x_2,...,x_m        <- one row per curve (label column optional)

Labels are 1-based in files and 0-based in memory.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CurveFormatError, DataError

__all__ = [
    "TimeGrid",
    "LabeledCurveSet",
    "read_curves_csv",
    "write_curves_csv",
    "split_by_class",
]


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing sampling instants shared by every curve."""

    points: np.ndarray

    def __post_init__(self):
        pts = _frozen(self.points)
        if pts.ndim != 1 or pts.size < 2:
            raise DataError("time grid needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise DataError("time grid contains non-finite values")
        bad = np.nonzero(np.diff(pts) <= 0)[0]
        if bad.size:
            j = int(bad[0])
            raise DataError(
                f"time grid is not strictly increasing at positions {j + 1},{j + 2}"
            )
        object.__setattr__(self, "points", pts)

    @property
    def m(self) -> int:
        return self.points.size

    def normalized(self) -> np.ndarray:
        """Grid mapped affinely onto [0, 1]."""
        t = self.points
        return (t - t[0]) / (t[-1] - t[0])

    def __len__(self):
        return self.m

    def __eq__(self, other):
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash(self.points.tobytes())


@dataclass(frozen=True, eq=False)
class LabeledCurveSet:
    """``n`` curves sampled on one grid, each with a class label.

    Parameters
    ----------
    grid : TimeGrid
    values : array of shape (n, m)
    labels : int array of shape (n,), 0-based class indices
    num_classes : int, optional
        Defaults to ``max(labels) + 1``.
    """

    grid: TimeGrid
    values: np.ndarray
    labels: np.ndarray
    num_classes: int | None = None

    def __post_init__(self):
        if not isinstance(self.grid, TimeGrid):
            object.__setattr__(self, "grid", TimeGrid(self.grid))
        values = _frozen(self.values)
        if values.ndim == 1:
            values = _frozen(values[None, :])
        if values.ndim != 2 or values.shape[0] < 1:
            raise DataError("curve set needs a 2-D array with at least one curve")
        if values.shape[1] != self.grid.m:
            raise DataError(
                f"curves have {values.shape[1]} samples but the grid has {self.grid.m}"
            )
        finite = np.isfinite(values)
        if not finite.all():
            i, j = np.argwhere(~finite)[0]
            raise DataError(f"non-finite value in curve {i + 1} at sample {j + 1}")
        labels = np.asarray(self.labels)
        if labels.shape != (values.shape[0],):
            raise DataError("labels and curves must have equal length")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == np.round(labels)):
                raise DataError("labels must be integers")
        labels = _frozen(labels, dtype=np.int64)
        if labels.min() < 0:
            raise DataError("labels must be non-negative (0-based)")
        G = self.num_classes
        if G is None:
            G = int(labels.max()) + 1
        elif labels.max() >= G:
            raise DataError(f"label {labels.max() + 1} exceeds num_classes={G}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "num_classes", int(G))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def subset(self, index) -> "LabeledCurveSet":
        index = np.asarray(index)
        return LabeledCurveSet(
            self.grid, self.values[index], self.labels[index], self.num_classes
        )

    def __eq__(self, other):
        if not isinstance(other, LabeledCurveSet):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.num_classes == other.num_classes
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.labels, other.labels)
        )


def _parse_float(text, row, col):
    try:
        v = float(text)
    except ValueError:
        raise CurveFormatError(f"row {row}, column {col}: cannot parse {text!r}") from None
    if not math.isfinite(v):
        raise DataError(f"row {row}, column {col}: non-finite value {text!r}")
    return v


def read_curves_csv(path, has_labels: bool = True) -> LabeledCurveSet:
    """Read a curves file; see the module docstring for the layout.

    Without labels every curve is put in a single class (label 0).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise CurveFormatError(f"{path}: need a grid row and at least one curve row")
    grid = TimeGrid([_parse_float(c, 1, j + 1) for j, c in enumerate(rows[0])])
    width = grid.m + (1 if has_labels else 0)
    values, labels = [], []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise CurveFormatError(
                f"{path}: row {r} has {len(row)} fields, expected {width}"
            )
        if has_labels:
            lab = _parse_float(row[0], r, 1)
            if lab != int(lab) or lab < 1:
                raise CurveFormatError(f"{path}: row {r} has invalid label {row[0]!r}")
            labels.append(int(lab) - 1)
            row = row[1:]
        else:
            labels.append(0)
        off = 2 if has_labels else 1
        values.append([_parse_float(c, r, j + off) for j, c in enumerate(row)])
    return LabeledCurveSet(grid, np.array(values), np.array(labels))


def _fmt(v: float) -> str:
    # repr is the shortest string that round-trips
    return repr(float(v))


def write_curves_csv(data: LabeledCurveSet, path, with_labels: bool = True) -> None:
    """Write ``data`` in the format read by :func:`read_curves_csv`."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([_fmt(t) for t in data.grid.points])
        for lab, row in zip(data.labels, data.values):
            cells = [_fmt(v) for v in row]
            if with_labels:
                cells.insert(0, str(int(lab) + 1))
            w.writerow(cells)


def split_by_class(data: LabeledCurveSet) -> list[tuple[int, np.ndarray]]:
    """Group curves by label, preserving order within each class.

    Returns one ``(class_index, values)`` pair per class ``0..G-1``; classes
    without curves get an empty ``(0, m)`` array.
    """
    return [(g, data.values[data.labels == g]) for g in range(data.num_classes)]
