"""Functional mixture discriminant analysis.

One generative model per class, class priors from class proportions, and
maximum a posteriori classification of new curves. Any class-model object
exposing ``component_log_densities``, ``log_density``,
``cluster_posteriors``, ``mean_curves`` and ``to_dict`` can sit in an
:class:`FmdaModel`; MixRHLP is the default.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._util import derive_seed, logsumexp, parallel_map
from .curves import LabeledCurveSet, TimeGrid, split_by_class
from .errors import ConfigurationError, DataError
from .mixrhlp import FitConfig, FitReport, MixRhlpParams, fit

__all__ = [
    "FmdaModel",
    "train",
    "classify",
    "mean_curves",
    "save_model",
    "load_model",
    "per_class",
]

log = logging.getLogger(__name__)

MODEL_FORMAT = "curveseg-model"
MODEL_VERSION = 1


@dataclass
class FmdaModel:
    """A trained curve classifier.

    priors : (G,) class probabilities
    class_models : one density model per class
    grid : the time grid every curve must be sampled on
    method : tag of the training method (``fmda-mixrhlp``, ``flda-pr``, ...)
    """

    priors: np.ndarray
    class_models: list
    grid: TimeGrid
    method: str = "fmda-mixrhlp"
    config: FitConfig | None = None
    reports: list = field(default_factory=list)

    def __post_init__(self):
        self.priors = np.asarray(self.priors, dtype=float)
        if len(self.class_models) != self.priors.size:
            raise ValueError("need one class model per prior")

    @property
    def G(self) -> int:
        return self.priors.size

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        X2 = np.atleast_2d(X)
        if X2.shape[1] != self.grid.m:
            raise DataError(
                f"curves have {X2.shape[1]} samples but the model grid has {self.grid.m}"
            )
        return X2

    def class_log_densities(self, X) -> np.ndarray:
        """(n, G) log p(x | class g)."""
        X = self._check(X)
        return np.column_stack([cm.log_density(X, self.grid) for cm in self.class_models])

    def posteriors(self, X) -> np.ndarray:
        """(n, G) posterior class probabilities, computed in the log domain."""
        with np.errstate(divide="ignore"):
            a = np.log(self.priors) + self.class_log_densities(X)
        return np.exp(a - logsumexp(a, axis=1)[:, None])

    def predict(self, X) -> np.ndarray:
        """0-based MAP labels; ties go to the lower class index."""
        return np.argmax(self.posteriors(X), axis=1)

    def cluster_labels(self, X, g: int) -> np.ndarray:
        """Most probable cluster of each curve under class ``g``'s model."""
        return np.argmax(self.class_models[g].cluster_posteriors(self._check(X), self.grid), axis=1)

    def mean_curves(self, g: int) -> np.ndarray:
        return self.class_models[g].mean_curves(self.grid)

    def to_dict(self):
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "method": self.method,
            "grid": self.grid.points.tolist(),
            "priors": self.priors.tolist(),
            "classes": [cm.to_dict() for cm in self.class_models],
            "config": None if self.config is None else self.config.to_dict(),
            "loglik": [None if r is None else r.loglik for r in self.reports],
            "reports": [None if r is None else r.to_dict() for r in self.reports],
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != MODEL_FORMAT:
            raise DataError("not a curveseg model file")
        if d.get("version") != MODEL_VERSION:
            raise DataError(f"unsupported model version {d.get('version')}")
        return cls(
            priors=d["priors"],
            class_models=[_class_model_from_dict(c) for c in d["classes"]],
            grid=TimeGrid(d["grid"]),
            method=d["method"],
            config=None if d.get("config") is None else FitConfig.from_dict(d["config"]),
            reports=[None if r is None else FitReport.from_dict(r) for r in d.get("reports", [])],
        )


def _class_model_from_dict(d):
    kind = d["kind"]
    if kind == "mixrhlp":
        return MixRhlpParams.from_dict(d)
    from . import baselines

    if kind == "single_regression":
        return baselines.SingleRegressionClassModel.from_dict(d)
    if kind == "regression_mixture":
        return baselines.RegressionMixtureClassModel.from_dict(d)
    raise DataError(f"unknown class model kind {kind!r}")


def save_model(model: FmdaModel, path) -> None:
    text = json.dumps(model.to_dict(), indent=1, allow_nan=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_model(path) -> FmdaModel:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid model file ({exc})") from None
    return FmdaModel.from_dict(d)


def per_class(value, G: int, name: str) -> list:
    """Broadcast a scalar (or length-1 list) to ``G`` per-class values."""
    if np.isscalar(value):
        return [value] * G
    value = list(value)
    if len(value) == 1:
        return value * G
    if len(value) != G:
        raise ConfigurationError(f"{name} has {len(value)} entries for {G} classes")
    return value


def _fit_class(args):
    X, grid, g, K, L, p, config = args
    params, _, report = fit(X, K, L, p, config, grid=grid)
    return params, report


def train(data: LabeledCurveSet, K=1, L=1, p=0, config: FitConfig | None = None) -> FmdaModel:
    """Fit one MixRHLP model per class.

    ``K`` and ``p`` are an int or one value per class. ``L`` is an int, one
    value per class, or per class a list with one count per cluster. Class
    ``g`` is fitted with seed ``derive_seed(config.seed, g)``; classes run on
    ``config.jobs`` processes.
    """
    config = config or FitConfig()
    G = data.num_classes
    Ks = [int(k) for k in per_class(K, G, "K")]
    Ls = per_class(L, G, "L")
    ps = [int(v) for v in per_class(p, G, "p")]
    tasks = []
    for g, X in split_by_class(data):
        if X.shape[0] == 0:
            raise ConfigurationError(f"class {g + 1} has no training curves")
        if X.shape[0] < Ks[g]:
            raise ConfigurationError(
                f"class {g + 1} has {X.shape[0]} curves, fewer than K={Ks[g]}"
            )
        cfg = config.replace(seed=derive_seed(config.seed, g), jobs=1)
        tasks.append((X, data.grid, g, Ks[g], Ls[g], ps[g], cfg))
    results = parallel_map(_fit_class, tasks, config.jobs)
    priors = data.class_counts() / data.n
    return FmdaModel(
        priors,
        [r[0] for r in results],
        data.grid,
        "fmda-mixrhlp",
        config,
        [r[1] for r in results],
    )


def classify(model: FmdaModel, curve):
    """MAP class of one curve (m,) or many (n, m).

    Returns ``(label, posterior)``: an int and a (G,) vector for one curve,
    arrays (n,) and (n, G) otherwise. Labels are 0-based.
    """
    post = model.posteriors(curve)
    labels = np.argmax(post, axis=1)
    if np.ndim(curve) == 1:
        return int(labels[0]), post[0]
    return labels, post


def mean_curves(model: FmdaModel, g: int) -> np.ndarray:
    """(K_g, m) mean curves of class ``g``."""
    return model.mean_curves(g)
