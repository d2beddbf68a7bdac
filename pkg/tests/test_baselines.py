import math

import numpy as np
import pytest

from curveseg.baselines import (
    METHODS,
    MethodSpec,
    RegressionMixtureClassModel,
    SingleRegressionClassModel,
    fit_flda_single,
    fit_fmda_regression_mixture,
    train_method,
)
from curveseg.basis import PolynomialBasis, SplineBasis
from curveseg.curves import TimeGrid
from curveseg.errors import ConfigurationError
from curveseg.fmda import load_model, save_model, train
from curveseg.mixrhlp import FitConfig
from curveseg.selection import count_regression_mixture_parameters


def test_constant_curves():
    grid = TimeGrid(np.arange(8.0))
    model = fit_flda_single(np.full((5, 8), 5.0), PolynomialBasis(0), grid)
    assert model.beta == pytest.approx([5.0])
    assert model.sigma2[0] == 1e-6


def test_noise_free_line():
    grid = TimeGrid(np.linspace(0, 10, 21))
    t = grid.normalized()
    model = fit_flda_single(np.tile(2 * t, (3, 1)), PolynomialBasis(1), grid)
    assert np.allclose(model.beta, [0.0, 2.0], atol=1e-12)


def test_variance_is_population_residual_variance():
    rng = np.random.default_rng(0)
    grid = TimeGrid(np.arange(30.0))
    t = grid.normalized()
    X = 1 + t**2 + rng.normal(scale=0.5, size=(6, 30))
    model = fit_flda_single(X, PolynomialBasis(2), grid)
    T = np.vander(t, 3, increasing=True)
    beta = np.linalg.lstsq(np.tile(T, (6, 1)), X.ravel(), rcond=None)[0]
    assert np.allclose(model.beta, beta, atol=1e-10)
    assert model.sigma2[0] == pytest.approx(np.mean((X - T @ beta) ** 2), abs=1e-10)


def test_one_component_mixture_equals_single():
    rng = np.random.default_rng(1)
    grid = TimeGrid(np.arange(25.0))
    X = rng.normal(size=(9, 25)) + np.sin(np.arange(25) / 4)
    single = fit_flda_single(X, PolynomialBasis(3), grid)
    mix, rep = fit_fmda_regression_mixture(X, PolynomialBasis(3), 1, FitConfig(restarts=1), grid)
    assert np.allclose(mix.betas[0], single.beta, atol=1e-8)
    assert mix.sigma2[0] == pytest.approx(single.sigma2[0], abs=1e-10)


def test_two_groups_recovered():
    rng = np.random.default_rng(2)
    grid = TimeGrid(np.arange(20.0))
    n, m, sd = 15, 20, 0.5
    X = np.vstack([rng.normal(0, sd, (n, m)), rng.normal(4, sd, (n, m))])
    model, rep = fit_fmda_regression_mixture(X, PolynomialBasis(0), 2, FitConfig(restarts=2), grid)
    levels = sorted(model.betas[:, 0])
    bound = 3 * sd / math.sqrt(n * m)
    assert abs(levels[0] - X[:n].mean()) <= bound and abs(levels[1] - X[n:].mean()) <= bound
    post = model.cluster_posteriors(X, grid)
    assert np.all(post.max(axis=1) > 1 - 1e-9)
    assert np.all(np.diff(rep.loglik_trace) >= -1e-8)


def naive_mixture_log_density(model, x, grid):
    T = model.basis.evaluate(grid.normalized())
    total = 0.0
    for a, b, s2 in zip(model.alphas, model.betas, model.sigma2):
        mu = T @ b
        d = 1.0
        for xj, mj in zip(x, mu):
            d *= math.exp(-((xj - mj) ** 2) / (2 * s2)) / math.sqrt(2 * math.pi * s2)
        total += a * d
    return math.log(total)


@pytest.mark.parametrize("basis", [PolynomialBasis(2), SplineBasis(3, 2)])
def test_class_log_density_matches_naive(basis):
    rng = np.random.default_rng(3)
    grid = TimeGrid(np.arange(12.0))
    model = RegressionMixtureClassModel(
        basis, [0.3, 0.7], rng.normal(size=(2, basis.dim)), [0.8, 1.7]
    )
    X = rng.normal(size=(4, 12))
    got = model.log_density(X, grid)
    for x, g in zip(X, got):
        assert g == pytest.approx(naive_mixture_log_density(model, x, grid), abs=1e-9)


def test_parameter_counts():
    assert count_regression_mixture_parameters(2, PolynomialBasis(3).dim) == 11
    assert SingleRegressionClassModel(PolynomialBasis(3), np.zeros(4), 1.0).n_free_parameters() == 5
    assert count_regression_mixture_parameters(1, SplineBasis(3, 10).dim) == 15


def test_flda_rhlp_is_single_cluster_mixrhlp(two_class_steps):
    cfg = FitConfig(seed=3, restarts=1)
    a = train_method(two_class_steps, "flda-rhlp", 5, 3, 0, cfg)
    b = train(two_class_steps, 1, 3, 0, cfg)
    assert a.method == "flda-rhlp"
    assert [c.to_dict() for c in a.class_models] == [c.to_dict() for c in b.class_models]


@pytest.mark.parametrize("method", METHODS)
def test_every_method_trains_and_round_trips(tmp_path, two_class_steps, method):
    spec = MethodSpec(method, K=2, L=3, p=2, knots=4, config=FitConfig(restarts=1))
    model = spec(two_class_steps, 0)
    assert model.method == method
    pred = model.predict(two_class_steps.values)
    assert np.mean(pred == two_class_steps.labels) >= 0.9
    save_model(model, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert np.array_equal(back.predict(two_class_steps.values), pred)


def test_unknown_method():
    with pytest.raises(ConfigurationError, match="unknown method"):
        MethodSpec("lda")
