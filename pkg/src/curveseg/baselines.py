"""Comparison classifiers built on plain regression densities.

* FLDA-PR / FLDA-SR: one polynomial or B-spline regression per class,
  ``x_i ~ N(T beta_g, sigma2_g I)``, fitted by least squares.
* FMDA-PRM / FMDA-SRM: a mixture of such regressions per class, fitted by
  EM with the same initialization, restart and variance-floor policy as
  MixRHLP.
* FLDA-RHLP: MixRHLP with a single cluster per class.

All of them end up in an :class:`~curveseg.fmda.FmdaModel` and are classified
by the same MAP rule.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._util import LOG_2PI, as_values, derive_seed, logsumexp, normalized_times, parallel_map
from .basis import PolynomialBasis, SplineBasis, basis_from_dict
from .curves import LabeledCurveSet, split_by_class
from .errors import ConfigurationError, NumericalError
from .fmda import FmdaModel, per_class
from .fmda import train as train_mixrhlp
from .mixrhlp import (
    SINGULAR_RCOND,
    FitConfig,
    FitReport,
    _kmeans_partition,
    _random_partition,
    variance_floor,
)
from .selection import count_regression_mixture_parameters

__all__ = [
    "SingleRegressionClassModel",
    "RegressionMixtureClassModel",
    "fit_flda_single",
    "fit_fmda_regression_mixture",
    "METHODS",
    "MethodSpec",
    "train_method",
]

log = logging.getLogger(__name__)


def _gaussian_curve_loglik(X, mean, sigma2):
    """sum_j log N(x_ij; mean_j, sigma2) for each row of X."""
    m = X.shape[1]
    rss = np.sum((X - mean) ** 2, axis=1)
    return -0.5 * m * (LOG_2PI + np.log(sigma2)) - 0.5 * rss / sigma2


@dataclass
class RegressionMixtureClassModel:
    """``sum_k alpha_k N(x; T beta_k, sigma2_k I)``."""

    basis: PolynomialBasis | SplineBasis
    alphas: np.ndarray
    betas: np.ndarray
    sigma2: np.ndarray

    kind = "regression_mixture"

    def __post_init__(self):
        self.alphas = np.atleast_1d(np.asarray(self.alphas, dtype=float))
        self.betas = np.atleast_2d(np.asarray(self.betas, dtype=float))
        self.sigma2 = np.atleast_1d(np.asarray(self.sigma2, dtype=float))

    @property
    def K(self) -> int:
        return self.alphas.size

    def mean_curves(self, grid) -> np.ndarray:
        T = self.basis.evaluate(normalized_times(grid))
        return self.betas @ T.T

    def component_log_densities(self, X, grid) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        means = self.mean_curves(grid)
        return np.column_stack(
            [_gaussian_curve_loglik(X, mu, s2) for mu, s2 in zip(means, self.sigma2)]
        )

    def _weighted(self, X, grid):
        with np.errstate(divide="ignore"):
            return np.log(self.alphas) + self.component_log_densities(X, grid)

    def log_density(self, X, grid) -> np.ndarray:
        return logsumexp(self._weighted(X, grid), axis=1)

    def cluster_posteriors(self, X, grid) -> np.ndarray:
        a = self._weighted(X, grid)
        return np.exp(a - logsumexp(a, axis=1)[:, None])

    def n_free_parameters(self) -> int:
        return count_regression_mixture_parameters(self.K, self.basis.dim)

    def to_dict(self):
        return {
            "kind": self.kind,
            "basis": self.basis.to_dict(),
            "K": self.K,
            "alphas": self.alphas.tolist(),
            "components": [
                {"beta": b.tolist(), "sigma2": float(s)} for b, s in zip(self.betas, self.sigma2)
            ],
        }

    @classmethod
    def from_dict(cls, d):
        comps = d["components"]
        return cls(
            basis_from_dict(d["basis"]),
            d["alphas"],
            [c["beta"] for c in comps],
            [c["sigma2"] for c in comps],
        )


@dataclass(init=False)
class SingleRegressionClassModel(RegressionMixtureClassModel):
    """One regression per class: ``N(x; T beta, sigma2 I)``."""

    kind = "single_regression"

    def __init__(self, basis, beta, sigma2):
        super().__init__(basis, [1.0], [beta], [sigma2])

    @property
    def beta(self) -> np.ndarray:
        return self.betas[0]

    def to_dict(self):
        return {
            "kind": self.kind,
            "basis": self.basis.to_dict(),
            "beta": self.beta.tolist(),
            "sigma2": float(self.sigma2[0]),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(basis_from_dict(d["basis"]), d["beta"], d["sigma2"])


def _ols_curve(T, xbar, w=None):
    """Minimize ``sum_j w_j (xbar_j - T_j beta)^2`` (w defaults to ones)."""
    if w is None:
        return np.linalg.lstsq(T, xbar, rcond=SINGULAR_RCOND)
    sw = np.sqrt(w)
    return np.linalg.lstsq(T * sw[:, None], sw * xbar, rcond=SINGULAR_RCOND)


def fit_flda_single(curves, basis, grid=None, floor_factor: float = 1e-6):
    """Least-squares fit of one regression to all points of all curves.

    With equal weight on every curve the stacked problem reduces to fitting
    the pointwise mean curve; the variance is the mean squared residual over
    all ``n * m`` points, floored at ``floor_factor`` times the data variance.
    """
    X, grid = as_values(curves, grid)
    T = basis.evaluate(normalized_times(grid))
    beta, _, rank, _ = _ols_curve(T, X.mean(axis=0))
    if rank < T.shape[1]:
        log.warning("rank-deficient design (rank %d < %d); minimum-norm solution", rank, T.shape[1])
    s2 = float(np.mean((X - T @ beta) ** 2))
    return SingleRegressionClassModel(basis, beta, max(s2, variance_floor(X, floor_factor)))


def _mixture_e_step(model, X, grid):
    a = model._weighted(X, grid)
    row = logsumexp(a, axis=1)
    return np.exp(a - row[:, None]), float(row.sum())


def _run_mixture_em(X, T, grid, basis, K, config, restart):
    rng = np.random.default_rng([config.seed, restart])
    floor = variance_floor(X, config.variance_floor)
    if config.cluster_init == "random":
        assign = _random_partition(X.shape[0], K, rng)
    else:
        assign = _kmeans_partition(X, K, rng)
    gamma = np.eye(K)[assign]
    model = None
    trace = []
    converged = False
    it = 0
    for it in range(0, config.max_iter + 1):
        Nk = gamma.sum(axis=0)
        betas = np.zeros((K, T.shape[1]))
        sigma2 = np.zeros(K)
        for k in range(K):
            if Nk[k] <= 1e-12 and model is not None:
                betas[k], sigma2[k] = model.betas[k], model.sigma2[k]
                continue
            xbar = gamma[:, k] @ X / Nk[k]
            betas[k] = _ols_curve(T, xbar)[0]
            rss = gamma[:, k] @ np.sum((X - T @ betas[k]) ** 2, axis=1)
            sigma2[k] = max(rss / (Nk[k] * X.shape[1]), floor)
        model = RegressionMixtureClassModel(basis, Nk / X.shape[0], betas, sigma2)
        gamma, ll = _mixture_e_step(model, X, grid)
        trace.append(ll)
        if not np.isfinite(ll):
            break
        if len(trace) > 1 and ll - trace[-2] < config.epsilon * abs(trace[-2]):
            converged = True
            break
    return model, gamma, trace, it, converged


def fit_fmda_regression_mixture(curves, basis, K: int, config: FitConfig | None = None, grid=None):
    """EM for a mixture of ``K`` regressions on ``basis``.

    The first M-step starts from a hard partition (k-means or random, per
    ``config.cluster_init``). Returns ``(model, FitReport)`` for the best of
    ``config.restarts`` runs.
    """
    config = config or FitConfig()
    X, grid = as_values(curves, grid)
    if K < 1:
        raise ConfigurationError(f"invalid K={K}")
    if X.shape[0] < K:
        raise ConfigurationError(f"{X.shape[0]} curves cannot be split into K={K} clusters")
    T = basis.evaluate(normalized_times(grid))
    best, finals = None, []
    for r in range(max(1, config.restarts)):
        model, gamma, trace, it, conv = _run_mixture_em(X, T, grid, basis, K, config, r)
        finals.append(trace[-1])
        if np.isfinite(trace[-1]) and (best is None or trace[-1] > best[2][-1]):
            best = (model, gamma, trace, it, conv, r)
    if best is None:
        raise NumericalError("all EM restarts produced a non-finite log-likelihood")
    model, gamma, trace, it, conv, r = best
    report = FitReport(
        loglik_trace=[float(v) for v in trace],
        iterations=it,
        converged=conv,
        restarts_run=len(finals),
        best_restart=r,
        seed=config.seed,
        restart_logliks=[float(v) for v in finals],
    )
    return model, report


METHODS = ("fmda-mixrhlp", "flda-pr", "flda-sr", "flda-rhlp", "fmda-prm", "fmda-srm")


@dataclass
class MethodSpec:
    """Everything needed to train one of the six classifiers.

    ``K``, ``L`` and ``p`` follow :func:`curveseg.fmda.train`; FLDA methods
    ignore ``K`` (always one cluster). Spline methods use ``spline_degree``
    and ``knots`` interior knots; polynomial ones use ``p``.
    """

    method: str = "fmda-mixrhlp"
    K: object = 1
    L: object = 1
    p: object = 0
    spline_degree: int = 3
    knots: int = 10
    config: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(
                f"unknown method {self.method!r}; choose from {', '.join(METHODS)}"
            )

    def __call__(self, data: LabeledCurveSet, seed: int | None = None) -> FmdaModel:
        cfg = self.config if seed is None else self.config.replace(seed=seed)
        return train_method(data, self.method, self.K, self.L, self.p, cfg,
                            spline_degree=self.spline_degree, knots=self.knots)


def _fit_baseline_class(args):
    X, grid, method, K, basis, config = args
    if method.startswith("flda"):
        return fit_flda_single(X, basis, grid, config.variance_floor), None
    return fit_fmda_regression_mixture(X, basis, K, config, grid)


def train_method(data: LabeledCurveSet, method: str, K=1, L=1, p=0,
                 config: FitConfig | None = None, *, spline_degree: int = 3,
                 knots: int = 10) -> FmdaModel:
    """Train any of :data:`METHODS` and return the classifier."""
    config = config or FitConfig()
    if method not in METHODS:
        raise ConfigurationError(f"unknown method {method!r}")
    G = data.num_classes
    if method == "fmda-mixrhlp":
        return train_mixrhlp(data, K, L, p, config)
    if method == "flda-rhlp":
        model = train_mixrhlp(data, 1, L, p, config)
        model.method = method
        return model
    Ks = [1] * G if method.startswith("flda") else [int(k) for k in per_class(K, G, "K")]
    ps = [int(v) for v in per_class(p, G, "p")]
    tasks = []
    for g, X in split_by_class(data):
        if X.shape[0] < max(Ks[g], 1):
            raise ConfigurationError(f"class {g + 1} has {X.shape[0]} curves, fewer than K={Ks[g]}")
        if method.endswith("sr") or method.endswith("srm"):
            basis = SplineBasis(spline_degree, knots)
        else:
            basis = PolynomialBasis(ps[g])
        cfg = config.replace(seed=derive_seed(config.seed, g), jobs=1)
        tasks.append((X, data.grid, method, Ks[g], basis, cfg))
    results = parallel_map(_fit_baseline_class, tasks, config.jobs)
    priors = data.class_counts() / data.n
    return FmdaModel(priors, [r[0] for r in results], data.grid, method, config,
                     [r[1] for r in results])
