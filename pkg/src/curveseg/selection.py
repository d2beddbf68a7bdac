"""BIC model selection over (K, L, p) for one class of curves."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._util import as_values, derive_seed, normalized_times, parallel_map
from .errors import CurveSegError
from .mixrhlp import FitConfig, fit

__all__ = [
    "count_free_parameters",
    "count_regression_mixture_parameters",
    "bic",
    "SelectionGrid",
    "SelectionRow",
    "SelectionResult",
    "select",
    "write_selection_csv",
]

log = logging.getLogger(__name__)


def count_free_parameters(K: int, L, p: int) -> int:
    """Free parameters of a MixRHLP model.

    ``K - 1`` mixing weights plus, per cluster, ``(p + 4) L - 2``: ``2 (L - 1)``
    logistic weights, ``L (p + 1)`` coefficients and ``L`` variances.
    ``L`` may be a single count or one count per cluster.
    """
    Ls = [L] * K if np.isscalar(L) else list(L)
    if K < 1 or p < 0 or len(Ls) != K or min(Ls) < 1:
        raise ValueError(f"invalid model size K={K}, L={L}, p={p}")
    return (K - 1) + sum((p + 4) * l - 2 for l in Ls)


def count_regression_mixture_parameters(K: int, dim: int) -> int:
    """Free parameters of a mixture of ``K`` regressions on a ``dim``-column
    design with one variance each; ``K=1`` is the single-regression model."""
    return (K - 1) + K * (dim + 1)


def bic(loglik: float, nu: int, n: int) -> float:
    """``loglik - nu / 2 * ln(n)``; larger is better."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return loglik - 0.5 * nu * math.log(n)


@dataclass(frozen=True)
class SelectionGrid:
    k_max: int
    l_max: int
    p_max: int

    def __post_init__(self):
        if self.k_max < 1 or self.l_max < 1 or self.p_max < 0:
            raise ValueError("selection ranges must be non-empty")

    def candidates(self):
        return [
            (K, L, p)
            for K in range(1, self.k_max + 1)
            for L in range(1, self.l_max + 1)
            for p in range(self.p_max + 1)
        ]


@dataclass
class SelectionRow:
    K: int
    L: int
    p: int
    loglik: float
    nu: int
    bic: float
    converged: bool
    error: str = ""


@dataclass
class SelectionResult:
    table: list
    best: tuple

    def rows_by_bic(self):
        return sorted(self.table, key=lambda r: -r.bic if np.isfinite(r.bic) else np.inf)


def _fit_candidate(args):
    X, t, (K, L, p), config = args
    nu = count_free_parameters(K, L, p)
    try:
        _, _, rep = fit(X, K, L, p, config, grid=t)
    except CurveSegError as exc:
        return SelectionRow(K, L, p, float("nan"), nu, float("nan"), False, str(exc))
    return SelectionRow(K, L, p, rep.loglik, nu, bic(rep.loglik, nu, X.shape[0]), rep.converged)


def _best(table):
    ok = [r for r in table if np.isfinite(r.bic)]
    if not ok:
        raise CurveSegError("no candidate model could be fitted")
    # highest BIC, then fewer parameters, then smaller (K, L, p)
    r = min(ok, key=lambda r: (-r.bic, r.nu, r.K, r.L, r.p))
    return (r.K, r.L, r.p)


def select(curves, grid: SelectionGrid, config: FitConfig | None = None,
           time_grid=None) -> SelectionResult:
    """Fit every (K, L, p) in ``grid`` and pick the highest BIC.

    Candidate ``(K, L, p)`` is fitted with seed
    ``derive_seed(config.seed, K, L, p)``; candidates run on
    ``config.jobs`` processes. Failed fits are kept in the table with
    NaN scores and the error message.
    """
    config = config or FitConfig()
    X, tg = as_values(curves, time_grid)
    t = normalized_times(tg)
    sub = config.replace(jobs=1)
    tasks = [
        (X, t, c, sub.replace(seed=derive_seed(config.seed, *c))) for c in grid.candidates()
    ]
    table = parallel_map(_fit_candidate, tasks, config.jobs)
    best = _best(table)
    log.info("selected (K, L, p) = %s", best)
    return SelectionResult(table, best)


def write_selection_csv(result: SelectionResult, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["K", "L", "p", "loglik", "nu", "bic", "converged"])
        for r in result.table:
            w.writerow([r.K, r.L, r.p, repr(r.loglik), r.nu, repr(r.bic), int(r.converged)])
