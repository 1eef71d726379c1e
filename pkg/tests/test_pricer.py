import math

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import random_model
from expcolloc import oracle
from expcolloc.errors import ConstructionError, DomainError, RangeError, SingularDensityError
from expcolloc.pricer import (
    CollocationModel,
    WingSpec,
    _put_direct,
    density,
    enforce_first_moment,
    extrapolation_integral,
    first_moment,
    g_inverse,
    implied_vols,
    price_call,
    price_put,
    segment_integral,
)
from expcolloc.special import LOG_SQRT_2PI, black_scholes_price, norm_cdf
from expcolloc.spline import InterpolationData, PiecewiseQuadratic, schumaker_build


def quad_segment(a, b, c, xref, lo, hi):
    def f(x):
        t = x - xref
        return math.exp(a + b * t + c * t * t - 0.5 * x * x - LOG_SQRT_2PI)

    # split at the peak of the integrand so QUADPACK sees it
    q = 1.0 - 2.0 * c
    pts = []
    if q > 0:
        peak = (b - 2.0 * c * xref) / q
        if lo < peak < hi:
            pts = [peak]
    edges = [lo] + pts + [hi]
    return sum(quad(f, u, v, epsabs=0, epsrel=1e-13, limit=200)[0] for u, v in zip(edges[:-1], edges[1:]))


@pytest.mark.parametrize(
    "a, b, c, xref, lo, hi",
    [
        (0.1, 0.3, 0.05, 0.0, -1.0, 2.0),  # q > 0
        (-0.5, 0.2, -0.4, 1.0, -3.0, 3.0),  # concave
        (0.0, 0.5, 0.75, 0.2, -1.0, 1.5),  # q < 0, Dawson branch
        (0.0, 0.5, 0.5, 0.0, -2.0, 2.0),  # q = 0
        (0.0, 0.5, 0.5 - 1e-13, 0.0, -2.0, 2.0),  # q tiny
        (0.3, 0.4, 0.0, 0.0, -math.inf, 0.5),  # linear left wing
        (0.3, 0.4, 0.3, 1.0, 1.0, math.inf),  # convex right wing
        (0.0, 2.0, 0.0, 0.0, 8.0, 9.0),  # far tail
        (1.0, 30.0, 0.1, 0.0, -1.0, 1.0),  # steep, large peak
    ],
)
def test_segment_integral_against_quadrature(a, b, c, xref, lo, hi):
    got = segment_integral(a, b, c, xref, lo, hi)
    np.testing.assert_allclose(got, quad_segment(a, b, c, xref, lo, hi), rtol=1e-12)


def test_extrapolation_integral_closed_form():
    s, x, y, lo, hi = 0.7, 0.5, 0.2, -math.inf, 0.5
    expected = math.exp(y - s * x + 0.5 * s * s) * (norm_cdf(hi - s) - norm_cdf(lo - s))
    np.testing.assert_allclose(extrapolation_integral(s, x, y, lo, hi), expected, rtol=1e-14)


def test_segment_integral_divergence_and_order():
    with pytest.raises(DomainError, match="diverges"):
        segment_integral(0.0, 0.1, 0.5, 0.0, 0.0, math.inf)
    with pytest.raises(DomainError):
        segment_integral(0.0, 0.1, 0.1, 0.0, 1.0, 0.0)
    assert segment_integral(0.0, 0.1, 0.1, 0.0, 1.0, 1.0) == 0.0


def flat_model(forward=1.0, maturity=1.0, vol=0.2, wings=None):
    """g(x) = ln F - v^2/2 + v x: lognormal, Black prices exactly."""
    v = vol * math.sqrt(maturity)
    a0 = math.log(forward) - 0.5 * v * v
    pq = PiecewiseQuadratic([-1.0, 0.0, 1.0], [a0 - v, a0], [v, v], [0.0, 0.0], a0 + v)
    return CollocationModel(pq, forward, maturity, wings or WingSpec())


def test_linear_g_reproduces_black():
    model = flat_model(100.0, 2.0, 0.3)
    k = np.array([20.0, 80.0, 100.0, 130.0, 400.0])
    np.testing.assert_allclose(price_call(model, k), black_scholes_price(100.0, k, 2.0, 0.3), rtol=1e-13)
    np.testing.assert_allclose(first_moment(model), 100.0, rtol=1e-15)
    np.testing.assert_allclose(implied_vols(model, k), 0.3, rtol=1e-11)


def test_prices_and_moment_against_oracle(rng):
    for _ in range(12):
        model = random_model(rng)
        f = model.forward
        np.testing.assert_allclose(first_moment(model), f, rtol=1e-13)
        np.testing.assert_allclose(oracle.first_moment(model), f, rtol=1e-12)
        x = np.linspace(-2.5, 2.5, 11)
        strikes = np.exp(model.g(x))
        got = price_call(model, strikes)
        expected = oracle.oracle_prices(model, strikes)
        np.testing.assert_allclose(got, expected, rtol=1e-10, atol=1e-13 * f)


def test_put_call_parity_and_direct_put(rng):
    model = random_model(rng, "bspline")
    k = model.forward * np.array([0.2, 0.6, 1.0, 1.4, 3.0])
    lhs = price_call(model, k) - price_put(model, k)
    np.testing.assert_allclose(lhs, model.forward - k, atol=1e-13 * model.forward)
    np.testing.assert_allclose(_put_direct(model, k), price_put(model, k), rtol=1e-11, atol=1e-13 * model.forward)


def test_moment_enforcement_shifts_ordinates(rng):
    model = random_model(rng, "schumaker")
    moved = model.shifted(0.3)
    back = enforce_first_moment(moved)
    np.testing.assert_allclose(back.spline.ordinates, model.spline.ordinates, atol=1e-14)
    np.testing.assert_allclose(back.moment_shift - moved.moment_shift, -0.3, atol=1e-14)


def test_call_is_decreasing_convex_and_bounded(rng):
    model = random_model(rng)
    f = model.forward
    k = f * np.geomspace(0.05, 20.0, 400)
    c = price_call(model, k)
    assert np.all(np.diff(c) <= 1e-14 * f)
    slopes = np.diff(c) / np.diff(k)
    assert np.all(np.diff(slopes) >= -1e-10)
    assert np.all(c >= np.maximum(f - k, 0.0) - 1e-13 * f)
    assert np.all(c <= f)


def test_deep_itm_call_tends_to_intrinsic(rng):
    model = random_model(rng)
    f = model.forward
    k = f * 1e-6
    np.testing.assert_allclose(price_call(model, k), f - k, rtol=1e-8)


def test_density_against_second_difference(rng):
    model = random_model(rng, "bspline")
    f = model.forward
    k = f * np.array([0.5, 0.8, 1.0, 1.3, 2.0])
    h = 1e-4 * k
    second = (price_call(model, k + h) - 2 * price_call(model, k) + price_call(model, k - h)) / h**2
    np.testing.assert_allclose(density(model, k), second, rtol=2e-5, atol=1e-7 / f)


def test_density_integrates_to_one_and_mean_forward(rng):
    model = random_model(rng, "schumaker")
    f = model.forward
    knots = np.exp(model.g(model.spline.knots))
    pieces = np.concatenate([[0.0], knots, [np.inf]])
    total = sum(
        quad(lambda k: float(density(model, k)), u, v, limit=400, epsabs=1e-14)[0]
        for u, v in zip(pieces[:-1], pieces[1:])
    )
    np.testing.assert_allclose(total, 1.0, rtol=1e-9)
    mean = sum(
        quad(lambda k: k * float(density(model, k)), u, v, limit=400, epsabs=1e-14 * f)[0]
        for u, v in zip(pieces[:-1], pieces[1:])
    )
    np.testing.assert_allclose(mean, f, rtol=1e-8)


def test_density_edges():
    model = flat_model()
    assert density(model, 0.0) == 0.0
    with pytest.raises(DomainError):
        density(model, -1.0)
    flat = schumaker_build(InterpolationData([-1.0, 0.0, 1.0, 2.0], [-0.5, 0.0, 0.0, 0.5]))
    singular = CollocationModel(flat, 1.0, 1.0)
    with pytest.raises(SingularDensityError):
        density(singular, 1.0)


def test_g_inverse_round_trip_including_wings(rng):
    model = random_model(rng)
    x = np.linspace(-6.0, 6.0, 49)
    y = model.g(x)
    keep = np.concatenate([[True], np.diff(y) > 1e-9])
    np.testing.assert_allclose(model.g(g_inverse(model, y[keep])), y[keep], atol=1e-12 * max(1.0, np.max(np.abs(y))))
    assert g_inverse(model, -np.inf) == -np.inf
    with pytest.raises(RangeError):
        g_inverse(model, np.nan)


def test_flat_wings_bound_the_exercise_boundary():
    pq = PiecewiseQuadratic([-1.0, 0.0, 1.0], [-0.2, -0.1], [0.1, 0.1], [0.0, 0.0], 0.0)
    model = CollocationModel(pq, 1.0, 1.0, WingSpec(left_slope=0.0, right_slope=0.0))
    assert g_inverse(model, 0.5) == np.inf
    assert g_inverse(model, -0.5) == -np.inf
    assert price_call(model, math.exp(0.5)) == 0.0


def test_wing_and_model_validation():
    with pytest.raises(ConstructionError, match="left curvature"):
        WingSpec(c_left=0.1)
    with pytest.raises(ConstructionError, match="right curvature"):
        WingSpec(c_right=0.5)
    with pytest.raises(ConstructionError):
        WingSpec(left_slope=-1.0)
    decreasing = PiecewiseQuadratic([0.0, 1.0], [1.0], [-1.0], [0.0], 0.0)
    with pytest.raises(ConstructionError, match="not monotone"):
        CollocationModel(decreasing, 1.0, 1.0)
    with pytest.raises(ConstructionError):
        CollocationModel(flat_model().spline, -1.0, 1.0)
    with pytest.raises(DomainError):
        price_call(flat_model(), 0.0)


def test_wing_curvature_changes_only_the_tails():
    base = flat_model(wings=WingSpec())
    fat = flat_model(wings=WingSpec(c_right=0.2))
    k = math.exp(-0.02)  # inside the spline range
    assert price_call(fat, 100.0) > price_call(base, 100.0)
    # the inner strikes still feel the extra mass through the tail integrals
    assert price_call(fat, k) > price_call(base, k)
    assert np.isfinite(first_moment(fat))


def test_worked_examples():
    np.testing.assert_allclose(segment_integral(0.0, 0.0, 0.0, 0.0, -math.inf, math.inf), 1.0, rtol=1e-15)
    np.testing.assert_allclose(
        extrapolation_integral(0.3, 0.0, 0.0, 1.0, math.inf), math.exp(0.045) * norm_cdf(-0.7), rtol=1e-12
    )
    np.testing.assert_allclose(
        segment_integral(0.1, 0.8, 0.7, 0.2, -0.5, 0.5), quad_segment(0.1, 0.8, 0.7, 0.2, -0.5, 0.5), rtol=1e-10
    )
    for args in [(0.2, 0.5, 0.0, 0.3, -1.0, 2.0), (0.0, -1.2, 0.0, 1.0, -math.inf, math.inf)]:
        a, b, c, xref, lo, hi = args
        np.testing.assert_allclose(extrapolation_integral(b, xref, a, lo, hi), segment_integral(*args), rtol=1e-14)


def test_degenerate_constant_g():
    f = 3.0
    pq = PiecewiseQuadratic([-1.0, 1.0], [math.log(2 * f)], [0.0], [0.0], math.log(2 * f))
    model = enforce_first_moment(CollocationModel(pq, f, 1.0))
    np.testing.assert_allclose(model.moment_shift, -math.log(2.0), rtol=1e-15)
    np.testing.assert_allclose(model.spline.ordinates, math.log(f), rtol=1e-15)
    k = np.array([0.5, 2.9, 3.1, 10.0])
    np.testing.assert_allclose(price_call(model, k), np.maximum(f - k, 0.0), rtol=1e-14, atol=1e-15)
    again = enforce_first_moment(model)
    assert abs(again.moment_shift - model.moment_shift) <= 1e-15


def test_g_inverse_at_the_spline_ends(rng):
    model = random_model(rng)
    sp = model.spline
    np.testing.assert_allclose(g_inverse(model, sp.a[0]), sp.knots[0], atol=1e-12)
    np.testing.assert_allclose(g_inverse(model, sp.a_end), sp.knots[-1], atol=1e-12)
    # wings continue g and g' at both ends in the default mode
    x0, xm = sp.knots[0], sp.knots[-1]
    np.testing.assert_allclose(model.g_prime([x0 - 1e-12, xm + 1e-12]), sp.knot_slopes[[0, -1]], atol=1e-10)
