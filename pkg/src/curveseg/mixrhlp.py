"""Mixture of regressions with hidden logistic processes (MixRHLP).

A class of curves is a mixture of ``K`` clusters. Within cluster ``k`` every
point ``x_ij`` is drawn from one of ``L_k`` polynomial regimes, the regime
being chosen by a logistic process over time::

    p(x_i) = sum_k alpha_k prod_j sum_l pi_kl(t_j) N(x_ij; beta_kl' t_j, sigma2_kl)

Parameters are estimated by EM; the logistic weights are updated inside
the M-step by IRLS. Times are always normalized to [0, 1].
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.cluster.vq import kmeans2

from ._util import LOG_2PI, as_values, logsumexp, normalized_times
from .basis import PolynomialBasis
from .errors import ConfigurationError, NumericalError
from .logistic import irls_fit, log_regime_probabilities, regime_probabilities

__all__ = [
    "FitConfig",
    "RegimeParams",
    "RhlpParams",
    "MixRhlpParams",
    "Posteriors",
    "FitReport",
    "curve_log_density",
    "mixture_log_density",
    "e_step",
    "m_step",
    "initialize",
    "optimal_segmentation",
    "fit",
    "hard_segmentation",
    "variance_floor",
]

log = logging.getLogger(__name__)

SINGULAR_RCOND = 1e-10


@dataclass
class FitConfig:
    """Optimization settings shared by every EM-based fit."""

    seed: int = 0
    restarts: int = 5
    epsilon: float = 1e-6
    max_iter: int = 200
    irls_tol: float = 1e-8
    irls_max_iter: int = 50
    variance_floor: float = 1e-6
    cluster_init: str = "kmeans"
    segment_init: str = "dp"
    jobs: int = 1

    def __post_init__(self):
        if self.restarts < 1 or self.max_iter < 1 or self.irls_max_iter < 1 or self.jobs < 1:
            raise ConfigurationError("restarts, max_iter, irls_max_iter and jobs must be >= 1")
        if not (self.epsilon > 0 and self.irls_tol > 0 and self.variance_floor >= 0):
            raise ConfigurationError("tolerances must be positive and the floor non-negative")
        if self.cluster_init not in ("kmeans", "random"):
            raise ConfigurationError(f"unknown cluster_init {self.cluster_init!r}")
        if self.segment_init not in ("dp", "uniform"):
            raise ConfigurationError(f"unknown segment_init {self.segment_init!r}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def replace(self, **kw) -> "FitConfig":
        d = self.to_dict()
        d.update(kw)
        return FitConfig(**d)


@dataclass(frozen=True)
class RegimeParams:
    beta: np.ndarray
    sigma2: float


@dataclass
class RhlpParams:
    """One RHLP component.

    logistic : (L, 2) logistic weights, last row zero
    beta : (L, p + 1) regime polynomial coefficients (normalized time)
    sigma2 : (L,) regime noise variances
    """

    logistic: np.ndarray
    beta: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        self.logistic = np.asarray(self.logistic, dtype=float).reshape(-1, 2)
        self.beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        self.sigma2 = np.atleast_1d(np.asarray(self.sigma2, dtype=float))
        L = self.logistic.shape[0]
        if self.beta.shape[0] != L or self.sigma2.shape != (L,):
            raise ValueError("logistic, beta and sigma2 must describe the same number of regimes")

    @property
    def L(self) -> int:
        return self.logistic.shape[0]

    @property
    def degree(self) -> int:
        return self.beta.shape[1] - 1

    @property
    def regimes(self) -> list[RegimeParams]:
        return [RegimeParams(b.copy(), float(s)) for b, s in zip(self.beta, self.sigma2)]

    def regime_means(self, T: np.ndarray) -> np.ndarray:
        """(m, L) polynomial of each regime on the design ``T``."""
        return T @ self.beta.T

    def to_dict(self):
        return {
            "logistic": self.logistic.tolist(),
            "regimes": [
                {"beta": b.tolist(), "sigma2": float(s)} for b, s in zip(self.beta, self.sigma2)
            ],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["logistic"],
            [r["beta"] for r in d["regimes"]],
            [r["sigma2"] for r in d["regimes"]],
        )


def _component_joint(comp: RhlpParams, X, T, t):
    """log(pi_l(t_j) N(x_ij; ., .)) laid out as (L, n, m)."""
    mu = comp.regime_means(T).T
    logpi = log_regime_probabilities(comp.logistic, t).T
    out = np.empty((comp.L, *X.shape))
    for l in range(comp.L):
        s2 = comp.sigma2[l]
        c = logpi[l] - 0.5 * (LOG_2PI + np.log(s2))
        r = X - mu[l]
        np.multiply(r, r, out=r)
        r *= -0.5 / s2
        r += c
        out[l] = r
    return out


def _point_log_density(joint):
    """Log-sum-exp over the leading regime axis of a (L, n, m) array."""
    if joint.shape[0] == 1:
        return joint[0]
    return logsumexp(joint, axis=0)


def _design(degree, t):
    return PolynomialBasis(degree).evaluate(t)


def curve_log_density(params: RhlpParams, curve, grid):
    """Log density of curve(s) under one RHLP component.

    ``curve`` is a single curve (m,) or an array of curves (n, m); the
    result is a float or an (n,) array accordingly.
    """
    t = normalized_times(grid)
    X = np.asarray(curve, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    T = _design(params.degree, t)
    out = _point_log_density(_component_joint(params, X, T, t)).sum(axis=1)
    return float(out[0]) if single else out


@dataclass
class MixRhlpParams:
    """Parameters of one class: mixing weights and ``K`` RHLP components."""

    alphas: np.ndarray
    components: list[RhlpParams]
    basis: PolynomialBasis = None

    kind = "mixrhlp"

    def __post_init__(self):
        self.alphas = np.atleast_1d(np.asarray(self.alphas, dtype=float))
        if self.basis is None:
            self.basis = PolynomialBasis(self.components[0].degree)
        if len(self.components) != self.alphas.size or not self.components:
            raise ValueError("need one mixing weight per component and K >= 1")

    @property
    def K(self) -> int:
        return self.alphas.size

    @property
    def L(self) -> list[int]:
        return [c.L for c in self.components]

    @property
    def degree(self) -> int:
        return self.basis.degree

    def component_log_densities(self, X, grid) -> np.ndarray:
        """(n, K) log densities of each component, mixing weights excluded."""
        t = normalized_times(grid)
        X = np.atleast_2d(np.asarray(X, dtype=float))
        T = self.basis.evaluate(t)
        return np.column_stack(
            [_point_log_density(_component_joint(c, X, T, t)).sum(axis=1) for c in self.components]
        )

    def _weighted(self, X, grid):
        with np.errstate(divide="ignore"):
            return np.log(self.alphas) + self.component_log_densities(X, grid)

    def log_density(self, X, grid) -> np.ndarray:
        return logsumexp(self._weighted(X, grid), axis=1)

    def cluster_posteriors(self, X, grid) -> np.ndarray:
        a = self._weighted(X, grid)
        return np.exp(a - logsumexp(a, axis=1)[:, None])

    def mean_curves(self, grid) -> np.ndarray:
        """(K, m) conditional-expectation curves ``sum_l pi_l(t) beta_l' t``."""
        t = normalized_times(grid)
        T = self.basis.evaluate(t)
        return np.array(
            [
                np.sum(regime_probabilities(c.logistic, t) * c.regime_means(T), axis=1)
                for c in self.components
            ]
        )

    def n_free_parameters(self) -> int:
        from .selection import count_free_parameters

        return count_free_parameters(self.K, self.L, self.degree)

    def to_dict(self):
        return {
            "kind": "mixrhlp",
            "K": self.K,
            "L": self.L,
            "p": self.degree,
            "alphas": self.alphas.tolist(),
            "components": [c.to_dict() for c in self.components],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["alphas"],
            [RhlpParams.from_dict(c) for c in d["components"]],
            PolynomialBasis(int(d["p"])),
        )


def mixture_log_density(params: MixRhlpParams, curve, grid):
    """``log sum_k alpha_k p_k(curve)`` for one curve (m,) or many (n, m)."""
    X = np.asarray(curve, dtype=float)
    out = params.log_density(np.atleast_2d(X), grid)
    return float(out[0]) if X.ndim == 1 else out


@dataclass
class Posteriors:
    """E-step responsibilities.

    gamma : (n, K) cluster responsibilities
    tau : list of K arrays (n, m, L_k), regime responsibilities per cluster

    Each ``tau[k]`` is a view on an (L_k, n, m) buffer, the layout used by
    the M-step.
    """

    gamma: np.ndarray
    tau: list

    def cluster_labels(self) -> np.ndarray:
        return np.argmax(self.gamma, axis=1)


def e_step(params: MixRhlpParams, curves, grid=None):
    """Posterior cluster and regime probabilities, plus the log-likelihood.

    Returns ``(Posteriors, loglik)``.
    """
    X, grid = as_values(curves, grid)
    t = normalized_times(grid)
    T = params.basis.evaluate(t)
    with np.errstate(divide="ignore"):
        log_alpha = np.log(params.alphas)
    comp_ll = np.empty((X.shape[0], params.K))
    tau = []
    for k, comp in enumerate(params.components):
        joint = _component_joint(comp, X, T, t)
        point = _point_log_density(joint)
        if comp.L == 1:
            point = point.copy()
            joint[:] = 1.0
        else:
            joint -= point
            np.exp(joint, out=joint)
        tau.append(np.moveaxis(joint, 0, -1))
        comp_ll[:, k] = point.sum(axis=1)
    a = log_alpha + comp_ll
    row = logsumexp(a, axis=1)
    gamma = np.exp(a - row[:, None])
    return Posteriors(gamma, tau), float(row.sum())


def variance_floor(X, factor: float) -> float:
    """Absolute variance floor: ``factor`` times the variance of all points."""
    v = float(np.var(X))
    return factor * v if v > 0 else factor


def _weighted_lstsq(T, w, xbar):
    """Minimize ``sum_j w_j (xbar_j - T_j beta)^2``; returns (beta, full_rank)."""
    sw = np.sqrt(w)
    beta, _, rank, _ = np.linalg.lstsq(T * sw[:, None], sw * xbar, rcond=SINGULAR_RCOND)
    return beta, rank == T.shape[1]


def m_step(
    post: Posteriors,
    curves,
    grid=None,
    prev: MixRhlpParams = None,
    *,
    floor: float = 0.0,
    irls_tol: float = 1e-8,
    irls_max_iter: int = 50,
    warnings: list | None = None,
) -> MixRhlpParams:
    """Maximize the expected complete-data log-likelihood.

    Mixing weights are the mean responsibilities, regime coefficients solve
    weighted least squares with weights ``gamma_ik * tau_kijl``, variances are
    the weighted mean squared residuals (never below ``floor``), and the
    logistic weights come from IRLS warm-started at ``prev``.

    Rank-deficient weighted designs are solved by a truncated SVD (cutoff
    ``1e-10 * s_max``); a note is appended to ``warnings`` if given.
    """
    X, grid = as_values(curves, grid)
    t = normalized_times(grid)
    basis = prev.basis
    T = basis.evaluate(t)
    notes = warnings if warnings is not None else []
    alphas = post.gamma.mean(axis=0)
    components = []
    for k, (comp, tau_k) in enumerate(zip(prev.components, post.tau)):
        R = np.moveaxis(tau_k, -1, 0) * post.gamma[:, k, None]
        S0 = R.sum(axis=1).T
        S1 = (R * X).sum(axis=1).T
        beta = comp.beta.copy()
        sigma2 = comp.sigma2.copy()
        for l in range(comp.L):
            total = S0[:, l].sum()
            if total <= 1e-12:
                notes.append(f"component {k + 1} regime {l + 1}: no weight, parameters kept")
                continue
            w = S0[:, l]
            xbar = np.divide(S1[:, l], w, out=np.zeros_like(w), where=w > 0)
            b, full = _weighted_lstsq(T, w, xbar)
            if not full:
                notes.append(f"component {k + 1} regime {l + 1}: rank-deficient design")
            resid = X - (T @ b)[None, :]
            s2 = float(np.sum(R[l] * resid**2) / total)
            beta[l] = b
            sigma2[l] = max(s2, floor)
        res = irls_fit(S0, t, comp.logistic, tol=irls_tol, max_iter=irls_max_iter)
        if res.gradient_steps:
            notes.append(f"component {k + 1}: IRLS fell back to gradient steps")
        components.append(RhlpParams(res.weights, beta, sigma2))
    return MixRhlpParams(alphas, components, basis)


def _segment_costs(y, t, linear):
    """Least-squares cost of fitting ``y[a:b]`` by a constant or a line.

    Returns an (m + 1, m + 1) matrix indexed by ``[a, b]``; invalid cells
    (``b <= a``) are ``inf``.
    """
    def cums(v):
        return np.concatenate([[0.0], np.cumsum(v)])

    S1, Sy, Syy = cums(np.ones_like(y)), cums(y), cums(y * y)
    D = lambda S: S[None, :] - S[:, None]  # noqa: E731
    n, sy, syy = D(S1), D(Sy), D(Syy)
    with np.errstate(divide="ignore", invalid="ignore"):
        cost = syy - sy**2 / n
        if linear:
            St, Stt, Sty = cums(t), cums(t * t), cums(t * y)
            st, stt, sty = D(St), D(Stt), D(Sty)
            vt = stt - st**2 / n
            cov = sty - st * sy / n
            cost = cost - np.where(vt > 1e-14, cov**2 / vt, 0.0)
    cost = np.where(n > 0, np.maximum(cost, 0.0), np.inf)
    return cost


def optimal_segmentation(y, t, L: int, linear: bool = False, min_len: int = 1):
    """Boundaries ``0 = e_0 < ... < e_L = m`` minimizing the piecewise
    constant (or linear) least-squares cost of ``y``, by dynamic programming."""
    m = y.size
    min_len = max(1, min(min_len, m // L))
    cost = _segment_costs(y, t, linear)
    idx = np.arange(m + 1)
    too_short = (idx[None, :] - idx[:, None]) < min_len
    cost = np.where(too_short, np.inf, cost)
    best = cost[0].copy()
    back = np.zeros((L, m + 1), dtype=int)
    for l in range(1, L):
        tot = best[:, None] + cost
        back[l] = np.argmin(tot, axis=0)
        best = tot[back[l], idx]
    edges = [m]
    for l in range(L - 1, 0, -1):
        edges.append(int(back[l, edges[-1]]))
    edges.append(0)
    return np.array(edges[::-1])


def _random_partition(n, K, rng):
    assign = np.empty(n, dtype=int)
    assign[rng.permutation(n)] = np.arange(n) % K
    return assign


def _kmeans_partition(X, K, rng):
    if K == 1:
        return np.zeros(X.shape[0], dtype=int)
    with warnings.catch_warnings():
        # empty clusters are handled below
        warnings.simplefilter("ignore", UserWarning)
        _, assign = kmeans2(X, K, minit="++", seed=rng, iter=20)
    if np.bincount(assign, minlength=K).min() == 0:
        return _random_partition(X.shape[0], K, rng)
    return assign


def initialize(X, t, K: int, L: Sequence[int], p: int, rng, floor: float,
               cluster_init: str = "kmeans", segment_init: str = "dp") -> MixRhlpParams:
    """Starting parameters for EM.

    Curves are partitioned into ``K`` clusters, by k-means (``"kmeans"``) or a
    random balanced assignment (``"random"``). In each cluster the grid is cut
    into ``L_k`` contiguous segments, either uniformly (``"uniform"``) or by
    the best piecewise fit of the cluster mean curve (``"dp"``); every segment
    gets an OLS polynomial and its residual variance. Logistic weights start
    at zero.
    """
    n, m = X.shape
    if cluster_init == "kmeans":
        assign = _kmeans_partition(X, K, rng)
    elif cluster_init == "random":
        assign = _random_partition(n, K, rng)
    else:
        raise ConfigurationError(f"unknown cluster_init {cluster_init!r}")
    basis = PolynomialBasis(p)
    T = basis.evaluate(t)
    components = []
    for k in range(K):
        Xk = X[assign == k]
        Lk = L[k]
        if segment_init == "dp":
            edges = optimal_segmentation(Xk.mean(axis=0), t, Lk, linear=p > 0, min_len=p + 2)
        elif segment_init == "uniform":
            edges = np.linspace(0, m, Lk + 1).round().astype(int)
        else:
            raise ConfigurationError(f"unknown segment_init {segment_init!r}")
        beta = np.zeros((Lk, p + 1))
        sigma2 = np.zeros(Lk)
        for l in range(Lk):
            a, b = edges[l], max(edges[l + 1], edges[l] + 1)
            seg = Xk[:, a:b]
            beta[l] = np.linalg.lstsq(T[a:b], seg.mean(axis=0), rcond=SINGULAR_RCOND)[0]
            sigma2[l] = max(float(np.mean((seg - T[a:b] @ beta[l]) ** 2)), floor)
        components.append(RhlpParams(np.zeros((Lk, 2)), beta, sigma2))
    alphas = np.bincount(assign, minlength=K) / n
    return MixRhlpParams(alphas, components, basis)


@dataclass
class FitReport:
    loglik_trace: list
    iterations: int
    converged: bool
    restarts_run: int
    best_restart: int
    seed: int
    restart_logliks: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def loglik(self) -> float:
        return self.loglik_trace[-1]

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _normalize_L(K, L):
    if np.isscalar(L):
        L = [int(L)] * K
    L = [int(v) for v in L]
    if len(L) != K:
        raise ConfigurationError(f"got {len(L)} regime counts for K={K} clusters")
    return L


def _run_em(X, t, K, L, p, config, restart):
    rng = np.random.default_rng([config.seed, restart])
    floor = variance_floor(X, config.variance_floor)
    notes: list = []
    params = initialize(X, t, K, L, p, rng, floor, config.cluster_init, config.segment_init)
    post, ll = e_step(params, X, t)
    trace = [ll]
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        params = m_step(
            post,
            X,
            t,
            params,
            floor=floor,
            irls_tol=config.irls_tol,
            irls_max_iter=config.irls_max_iter,
            warnings=notes,
        )
        post, new = e_step(params, X, t)
        trace.append(new)
        if not np.isfinite(new):
            break
        if new - ll < config.epsilon * abs(ll):
            converged = True
            break
        ll = new
    return params, post, trace, it, converged, sorted(set(notes))


def fit(curves, K: int, L, p: int, config: FitConfig | None = None, grid=None):
    """Fit a MixRHLP model by EM with random restarts.

    Parameters
    ----------
    curves : LabeledCurveSet or array (n, m)
        Curves of a single class (labels are ignored).
    K : int
        Number of clusters.
    L : int or sequence of K ints
        Regimes per cluster.
    p : int
        Polynomial degree of every regime.
    config : FitConfig, optional
    grid : TimeGrid or normalized array, required for raw arrays.

    Returns
    -------
    (MixRhlpParams, Posteriors, FitReport)
        The restart with the highest final log-likelihood (ties go to the
        lower restart index).
    """
    config = config or FitConfig()
    X, grid = as_values(curves, grid)
    t = normalized_times(grid)
    n = X.shape[0]
    if K < 1 or p < 0:
        raise ConfigurationError(f"invalid model size K={K}, p={p}")
    L = _normalize_L(K, L)
    if min(L) < 1:
        raise ConfigurationError("every cluster needs at least one regime")
    if n < K:
        raise ConfigurationError(f"{n} curves cannot be split into K={K} clusters")
    best = None
    finals = []
    for r in range(max(1, config.restarts)):
        params, post, trace, it, conv, notes = _run_em(X, t, K, L, p, config, r)
        final = trace[-1]
        finals.append(final)
        if not np.isfinite(final):
            log.warning("restart %d diverged", r)
            continue
        if best is None or final > best[2][-1]:
            best = (params, post, trace, it, conv, notes, r)
    if best is None:
        raise NumericalError("all EM restarts produced a non-finite log-likelihood")
    params, post, trace, it, conv, notes, r = best
    report = FitReport(
        loglik_trace=[float(v) for v in trace],
        iterations=it,
        converged=conv,
        restarts_run=len(finals),
        best_restart=r,
        seed=config.seed,
        restart_logliks=[float(v) for v in finals],
        warnings=notes,
    )
    log.info("MixRHLP K=%d L=%s p=%d: loglik %.6g after %d iterations", K, L, p, trace[-1], it)
    return params, post, report


def hard_segmentation(params: RhlpParams, grid) -> np.ndarray:
    """Most probable regime (0-based) at every grid point; ties go to the lower index."""
    return np.argmax(regime_probabilities(params.logistic, normalized_times(grid)), axis=1)
