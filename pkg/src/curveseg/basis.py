"""Regression design matrices on normalized time.

Every basis is evaluated on ``t' = (t - t_1) / (t_m - t_1)`` so that
polynomial designs stay well conditioned on long or index-valued grids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from .curves import TimeGrid
from .errors import DomainError

__all__ = [
    "PolynomialBasis",
    "SplineBasis",
    "design_row",
    "design_matrix",
    "basis_from_dict",
]


@dataclass(frozen=True)
class PolynomialBasis:
    """Monomials ``1, t, ..., t^degree``."""

    degree: int

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 0:
            raise ValueError(f"polynomial degree must be a non-negative integer, got {self.degree}")

    @property
    def dim(self) -> int:
        return self.degree + 1

    def evaluate(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.vander(t, self.dim, increasing=True)

    def to_dict(self):
        return {"kind": "polynomial", "degree": self.degree}


@dataclass(frozen=True)
class SplineBasis:
    """B-splines with uniformly spaced interior knots on [0, 1].

    ``degree=3`` gives cubic splines; the dimension is
    ``interior_knots + degree + 1``.
    """

    degree: int = 3
    interior_knots: int = 10

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("spline degree must be >= 1")
        if self.interior_knots < 0:
            raise ValueError("interior_knots must be >= 0")

    @property
    def dim(self) -> int:
        return self.interior_knots + self.degree + 1

    @property
    def knots(self) -> np.ndarray:
        k = self.degree
        inner = np.linspace(0.0, 1.0, self.interior_knots + 2)
        return np.concatenate([np.zeros(k), inner, np.ones(k)])

    def evaluate(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < 0.0) or np.any(t > 1.0) or not np.all(np.isfinite(t)):
            raise DomainError("spline basis evaluated outside the normalized domain [0, 1]")
        return BSpline.design_matrix(t, self.knots, self.degree).toarray()

    def to_dict(self):
        return {
            "kind": "spline",
            "degree": self.degree,
            "interior_knots": self.interior_knots,
        }


def basis_from_dict(d) -> PolynomialBasis | SplineBasis:
    if d["kind"] == "polynomial":
        return PolynomialBasis(int(d["degree"]))
    if d["kind"] == "spline":
        return SplineBasis(int(d["degree"]), int(d["interior_knots"]))
    raise ValueError(f"unknown basis kind {d['kind']!r}")


def design_row(basis, t: float) -> np.ndarray:
    """Basis functions at one normalized time ``t``."""
    return basis.evaluate(t)[0]


def design_matrix(basis, grid: TimeGrid | np.ndarray) -> np.ndarray:
    """``m x dim`` design matrix; a raw array is taken as already normalized."""
    t = grid.normalized() if isinstance(grid, TimeGrid) else np.asarray(grid, float)
    return basis.evaluate(t)
