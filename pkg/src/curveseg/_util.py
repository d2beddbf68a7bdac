from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .curves import LabeledCurveSet, TimeGrid

LOG_2PI = float(np.log(2.0 * np.pi))


def logsumexp(a: np.ndarray, axis: int = -1) -> np.ndarray:
    """``log(sum(exp(a)))`` along ``axis``; all ``-inf`` slices give ``-inf``."""
    amax = np.max(a, axis=axis, keepdims=True)
    amax = np.where(np.isfinite(amax), amax, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - amax), axis=axis, keepdims=True)) + amax
    return np.squeeze(out, axis=axis)


def normalized_times(grid) -> np.ndarray:
    """Normalized time of a TimeGrid; a raw array is assumed normalized already."""
    if isinstance(grid, TimeGrid):
        return grid.normalized()
    return np.asarray(grid, dtype=float)


def as_values(curves, grid=None):
    """Accept a LabeledCurveSet or a raw array and return ``(values, grid)``."""
    if isinstance(curves, LabeledCurveSet):
        return curves.values, curves.grid if grid is None else grid
    values = np.asarray(curves, dtype=float)
    if values.ndim == 1:
        values = values[None, :]
    if grid is None:
        raise ValueError("a grid is required when curves are given as an array")
    return values, grid


def derive_seed(base: int, *keys: int) -> int:
    """Deterministic 63-bit sub-seed for ``(base, *keys)``."""
    ss = np.random.SeedSequence([int(base) & 0xFFFFFFFFFFFFFFFF, *map(int, keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def parallel_map(fn, items, jobs: int = 1):
    """``list(map(fn, items))``, optionally over worker processes.

    Results are returned in input order regardless of ``jobs``.
    """
    items = list(items)
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))
