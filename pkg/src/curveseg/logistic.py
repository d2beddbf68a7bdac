"""Hidden logistic process: time-varying softmax regime probabilities.

Regime ``l`` at normalized time ``t`` has probability
``softmax_l(w[l, 0] + w[l, 1] * t)``. The last row of ``w`` is the
reference component and is pinned to zero, leaving ``2 (L - 1)`` free
parameters.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .curves import TimeGrid
from .errors import NumericalError

__all__ = [
    "regime_probabilities",
    "log_regime_probabilities",
    "canonical_weights",
    "logistic_objective",
    "logistic_gradient",
    "irls_fit",
    "IrlsResult",
]

log = logging.getLogger(__name__)

MAX_HALVINGS = 30
RIDGE = 1e-10


def _times(t):
    if isinstance(t, TimeGrid):
        return t.normalized()
    return np.asarray(t, dtype=float)


def _logits(w, t):
    w = np.asarray(w, dtype=float)
    return w[:, 0] + np.multiply.outer(t, w[:, 1])


def log_regime_probabilities(w, t) -> np.ndarray:
    """Log of :func:`regime_probabilities`, stable for saturated weights."""
    z = _logits(w, _times(t))
    zmax = z.max(axis=-1, keepdims=True)
    z = z - zmax
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def regime_probabilities(w, t) -> np.ndarray:
    """Regime probabilities at time(s) ``t``.

    Parameters
    ----------
    w : array (L, 2)
        Rows are (intercept, slope) per regime.
    t : float or array (m,) or TimeGrid
        Normalized time(s). A TimeGrid is normalized first.

    Returns
    -------
    array (L,) for scalar ``t``, otherwise (m, L).
    """
    z = _logits(w, _times(t))
    z = np.exp(z - z.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def canonical_weights(w) -> np.ndarray:
    """Equivalent weights with the last row moved to zero."""
    w = np.asarray(w, dtype=float)
    return w - w[-1]


def logistic_objective(w, weights, t) -> float:
    """``sum_{j,l} weights[j, l] * log pi_l(t_j; w)``."""
    return float(np.sum(weights * log_regime_probabilities(w, t)))


def _grad_hess(w, W, t, X, XX):
    P = regime_probabilities(w, t)
    N = W.sum(axis=1)
    L = w.shape[0]
    g = ((W - N[:, None] * P)[:, :-1]).T @ X
    Pf = P[:, :-1]
    C = -Pf[:, :, None] * Pf[:, None, :]
    C[:, np.arange(L - 1), np.arange(L - 1)] += Pf
    C *= N[:, None, None]
    # (a, b, c, d) -> (a, c, b, d)
    H = -np.tensordot(C, XX, axes=(0, 0)).transpose(0, 2, 1, 3)
    return g.ravel(), H.reshape(2 * (L - 1), 2 * (L - 1))


def _regressors(t):
    X = np.column_stack([np.ones_like(t), t])
    return X, X[:, :, None] * X[:, None, :]


def logistic_gradient(w, weights, t) -> np.ndarray:
    """Gradient of :func:`logistic_objective` w.r.t. the free rows of ``w``.

    Returned with shape (L - 1, 2); ``w`` is assumed canonical.
    """
    t = _times(t)
    g, _ = _grad_hess(np.asarray(w, float), np.asarray(weights, float), t, *_regressors(t))
    return g.reshape(-1, 2)


@dataclass
class IrlsResult:
    weights: np.ndarray
    converged: bool
    trace: list = field(default_factory=list)
    iterations: int = 0
    gradient_steps: int = 0


def irls_fit(weights, t, w_init=None, tol: float = 1e-8, max_iter: int = 50) -> IrlsResult:
    """Maximize the weighted multinomial logistic objective by Newton-Raphson.

    Parameters
    ----------
    weights : array (n, m, L) or (m, L)
        Non-negative regime weights per time point; leading axes are summed.
    t : array (m,) or TimeGrid
    w_init : array (L, 2), optional
        Warm start; zero when omitted. It is brought to canonical form.
    tol : float
        Stop when the objective increases by less than
        ``tol * max(1, |objective|)``.
    max_iter : int

    Each Newton step is halved (up to 30 times) until the objective does not
    decrease, so the returned trace is non-decreasing. When the Hessian is
    singular a gradient step is used instead and counted in
    ``gradient_steps``.
    """
    W = np.asarray(weights, dtype=float)
    if W.ndim > 2:
        W = W.reshape(-1, *W.shape[-2:]).sum(axis=0)
    if np.any(W < 0):
        raise ValueError("regime weights must be non-negative")
    if tol <= 0:
        raise ValueError("tol must be positive")
    t = _times(t)
    m, L = W.shape
    w = np.zeros((L, 2)) if w_init is None else canonical_weights(w_init).copy()
    if L == 1:
        return IrlsResult(np.zeros((1, 2)), True, [0.0], 0, 0)

    X, XX = _regressors(t)
    Q = logistic_objective(w, W, t)
    if not np.isfinite(Q):
        raise NumericalError("logistic objective is not finite at the initial weights")
    trace = [Q]
    converged = False
    grad_steps = 0
    # fixed ascent step for the gradient fallback: 1 / (curvature bound)
    fixed_step = 1.0 / max(float(np.sum(W.sum(axis=1) * (1.0 + t**2))), 1e-300)
    it = 0
    for it in range(1, max_iter + 1):
        g, H = _grad_hess(w, W, t, X, XX)
        direction = None
        A = -H
        scale = float(np.max(np.diag(A)))
        if scale > 0 and np.isfinite(scale):
            # relative ridge keeps blocks of saturated regimes solvable
            try:
                c = np.linalg.cholesky(A + RIDGE * scale * np.eye(A.shape[0]))
                d = np.linalg.solve(c.T, np.linalg.solve(c, g))
                if np.all(np.isfinite(d)):
                    direction = d
            except np.linalg.LinAlgError:
                pass
        if direction is None:
            direction = fixed_step * g
            grad_steps += 1
        step = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            cand = w.copy()
            cand[:-1] += (step * direction).reshape(-1, 2)
            Qc = logistic_objective(cand, W, t)
            if np.isnan(Qc):
                raise NumericalError("logistic objective became NaN during IRLS")
            if Qc >= Q:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # no ascent direction left at machine precision
            converged = True
            break
        inc = Qc - Q
        w, Q = cand, Qc
        trace.append(Q)
        if inc < tol * max(1.0, abs(Q)):
            converged = True
            break
    if grad_steps:
        log.debug("IRLS used %d gradient steps (singular Hessian)", grad_steps)
    return IrlsResult(w, converged, trace, it, grad_steps)
