import numpy as np
import pytest

from expcolloc.bspline import QuadraticBSpline
from expcolloc.pricer import CollocationModel, WingSpec, enforce_first_moment
from expcolloc.spline import InterpolationData, schumaker_build

# filled by tests/test_acceptance.py, printed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def random_model(rng, kind=None):
    """Random monotone, moment-enforced model: a Lam-Schumaker spline through
    increasing data, or a B-spline with random nonnegative increments, with
    random wing curvatures."""
    kind = kind or rng.choice(["schumaker", "bspline"])
    n = int(rng.integers(3, 9))
    x = np.sort(rng.uniform(-3.0, 3.0, n))
    while np.min(np.diff(x)) < 0.05:
        x = np.sort(rng.uniform(-3.0, 3.0, n))
    if kind == "schumaker":
        y = np.cumsum(rng.uniform(0.0, 0.8, n) * np.diff(x, prepend=x[0] - 1.0))
        spline = schumaker_build(InterpolationData(x, y))
    else:
        inc = rng.uniform(0.0, 0.6, n) * rng.uniform(0.2, 1.0)
        alpha = np.concatenate([[0.0], np.cumsum(inc)])
        spline = QuadraticBSpline(x, alpha).to_piecewise_quadratic()
    wings = WingSpec(
        c_left=float(-rng.uniform(0.0, 0.3) * rng.integers(0, 2)),
        c_right=float(rng.uniform(0.0, 0.45) * rng.integers(0, 2)),
    )
    forward = float(rng.uniform(0.5, 200.0))
    model = CollocationModel(spline, forward, float(rng.uniform(0.1, 5.0)), wings)
    return enforce_first_moment(model)


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)
