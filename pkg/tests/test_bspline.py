from pathlib import Path

import numpy as np
import pytest

from expcolloc.bspline import QuadraticBSpline, build_knots, from_increments, implied_abscissae
from expcolloc.errors import ConstructionError, DomainError
from expcolloc.market import MarketSlice, atm_vol, guideline_knots, load_dataset

DATA = Path(__file__).parent / "data"


def cox_de_boor(t, i, k, x):
    """Basis function ``B_{i,k}`` by the textbook recursion, right-open
    intervals except that the last nonempty interval is closed."""
    if k == 0:
        if t[i] <= x < t[i + 1]:
            return 1.0
        last = x == t[-1] and t[i] < t[i + 1] and t[i + 1] == t[-1]
        return 1.0 if last else 0.0
    out = 0.0
    if t[i + k] > t[i]:
        out += (x - t[i]) / (t[i + k] - t[i]) * cox_de_boor(t, i, k - 1, x)
    if t[i + k + 1] > t[i + 1]:
        out += (t[i + k + 1] - x) / (t[i + k + 1] - t[i + 1]) * cox_de_boor(t, i + 1, k - 1, x)
    return out


def recursive_value(spline, x):
    t = spline.knot_vector
    return sum(a * cox_de_boor(t, i, 2, x) for i, a in enumerate(spline.coefficients))


def random_bspline(rng, m):
    x = np.sort(rng.uniform(-3.0, 3.0, m + 1))
    alpha = np.cumsum(rng.uniform(0.0, 1.0, m + 2)) - 1.0
    return QuadraticBSpline(x, alpha)


@pytest.mark.parametrize("m", [1, 2, 5, 12])
def test_piecewise_form_matches_cox_de_boor(rng, m):
    spline = random_bspline(rng, m)
    pq = spline.to_piecewise_quadratic()
    xs = np.concatenate([np.linspace(spline.breakpoints[0], spline.breakpoints[-1], 97), spline.breakpoints])
    expected = np.array([recursive_value(spline, v) for v in xs])
    np.testing.assert_allclose(pq(xs), expected, rtol=0, atol=1e-13)
    # end values are the end coefficients
    np.testing.assert_allclose(pq.ordinates[[0, -1]], spline.coefficients[[0, -1]], atol=1e-14)


def test_knot_slopes_match_finite_differences(rng):
    # on quadratic pieces each difference quotient is exactly linear in h,
    # so one Richardson step removes the truncation error
    spline = random_bspline(rng, 6)
    x = spline.breakpoints
    f = lambda v: recursive_value(spline, v)

    def central(v, h):
        return (f(v + h) - f(v - h)) / (2 * h)

    def forward(v, h):
        return (f(v + h) - f(v)) / h

    def backward(v, h):
        return (f(v) - f(v - h)) / h

    h = 1e-3
    fd = [2 * central(v, h / 2) - central(v, h) for v in x[1:-1]]
    fd = [2 * forward(x[0], h / 2) - forward(x[0], h)] + fd + [2 * backward(x[-1], h / 2) - backward(x[-1], h)]
    np.testing.assert_allclose(spline.knot_slopes, fd, rtol=1e-9, atol=1e-9)


def test_piecewise_form_is_c1_and_monotone(rng):
    spline = random_bspline(rng, 8)
    pq = spline.to_piecewise_quadratic()
    h = pq.widths
    np.testing.assert_allclose(pq.b[:-1] + 2 * pq.c[:-1] * h[:-1], pq.b[1:], atol=1e-12)
    np.testing.assert_allclose(pq.knot_slopes, spline.knot_slopes, atol=1e-12)
    assert np.all(pq.knot_slopes >= 0)


def test_coefficient_count_and_validation():
    with pytest.raises(ConstructionError, match="need 4 coefficients"):
        QuadraticBSpline([0.0, 1.0, 2.0], [0.0, 1.0, 2.0])
    with pytest.raises(ConstructionError):
        QuadraticBSpline([0.0, 0.0], [0.0, 1.0, 2.0])
    spline = QuadraticBSpline([0.0, 1.0, 2.0], [0.0, 1.0, 2.0, 3.0])
    assert spline.knot_vector.size == 3 + 4
    np.testing.assert_allclose(spline.shifted(1.0).coefficients, [1.0, 2.0, 3.0, 4.0])


def test_linear_coefficients_give_a_line():
    # alpha at the Greville abscissae of a line reproduces the line
    x = np.array([0.0, 1.0, 3.0])
    t = np.concatenate([[x[0]] * 2, x, [x[-1]] * 2])
    greville = 0.5 * (t[1:-2] + t[2:-1])
    spline = QuadraticBSpline(x, 2.0 * greville + 1.0)
    pq = spline.to_piecewise_quadratic()
    np.testing.assert_allclose(pq.c, 0.0, atol=1e-15)
    np.testing.assert_allclose(pq.b, 2.0, atol=1e-15)


def test_from_increments():
    spline = from_increments([0.0, 1.0, 2.0], 0.5, [0.1, 0.2, 0.3], lambda_max=1.0)
    np.testing.assert_allclose(spline.coefficients, [0.5, 0.6, 0.8, 1.1])
    with pytest.raises(DomainError):
        from_increments([0.0, 1.0, 2.0], 0.0, [0.1, -0.2, 0.3])
    with pytest.raises(DomainError):
        from_increments([0.0, 1.0, 2.0], 0.0, [0.1, np.nan, 0.3])
    with pytest.raises(DomainError, match="cap"):
        from_increments([0.0, 1.0, 2.0], 0.0, [0.1, 2.0, 0.3], lambda_max=1.0)


def test_implied_abscissae_formula():
    market = MarketSlice(2.0, 0.5, [1.0, 2.0, 4.0], [0.2, 0.2, 0.2])
    b = 0.2 * np.sqrt(0.5)
    expected = (np.log([1.0, 2.0, 4.0]) + 0.5 * b * b - np.log(2.0)) / b
    np.testing.assert_allclose(implied_abscissae(market, b), expected, rtol=1e-15)


def test_reference_abscissae_jackel_case2():
    ref = np.genfromtxt(DATA / "reference_abscissae_case2.csv", delimiter=",", names=True, skip_header=1)
    market = load_dataset("jackel_case2").slice
    knots = guideline_knots("jackel_case2")
    np.testing.assert_allclose(build_knots("guideline", market, knots), ref["guideline"], rtol=1e-12)
    np.testing.assert_allclose(build_knots("smile", market), ref["smile"], rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(build_knots("atm", market), ref["atm"], rtol=1e-9, atol=1e-9)
    assert atm_vol(market) > 0


def test_build_knots_errors():
    tsla = load_dataset("tsla_18m").slice
    with pytest.raises(ConstructionError, match="smile knots not increasing: x\\[6\\]"):
        build_knots("smile", tsla)
    with pytest.raises(ConstructionError, match="no guideline knots"):
        build_knots("guideline", tsla)
    with pytest.raises(ValueError, match="unknown knot kind"):
        build_knots("cubic", tsla)
    x = build_knots("atm", tsla)
    assert x.size == 61 and np.all(np.diff(x) > 0)
