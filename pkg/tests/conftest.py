import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from curveseg.curves import LabeledCurveSet, TimeGrid
from curveseg.datagen import default_piecewise_spec, generate_piecewise

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def step_curves(levels, edges, n, noise, rng, m=None):
    """n noisy piecewise-constant curves; ``edges`` are segment boundaries."""
    m = m or edges[-1]
    mean = np.empty(m)
    for lv, a, b in zip(levels, edges, edges[1:]):
        mean[a:b] = lv
    return mean + noise * rng.standard_normal((n, m))


@pytest.fixture(scope="session")
def piecewise_small():
    """Default two-class fixture with 20 curves per sub-class and 100 points."""
    return generate_piecewise(default_piecewise_spec(n_per_subclass=20, m=100), 3)


@pytest.fixture
def two_class_steps():
    rng = np.random.default_rng(11)
    a = step_curves([0, 4, 1], [0, 15, 30, 40], 12, 0.5, rng)
    b = step_curves([3, 0, 2], [0, 10, 25, 40], 12, 0.5, rng)
    grid = TimeGrid(np.arange(40.0))
    return LabeledCurveSet(grid, np.vstack([a, b]), np.repeat([0, 1], 12))


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def criterion(request):
    """``criterion(number, ok, detail)`` records a result line and asserts it."""

    def report(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        request.config.stash[_ACCEPTANCE].append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
