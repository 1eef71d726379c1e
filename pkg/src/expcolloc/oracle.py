"""Reference values by adaptive quadrature, independent of the closed forms.

These integrate the defining expectations directly, ``E[(exp(g(X)) - K)+]``
and ``E[exp(g(X))]``, splitting at the spline knots and the exercise
boundary, which are the only points where the integrand is not smooth.
"""

import math

import numpy as np
from scipy.optimize import brentq

from .special import LOG_SQRT_2PI, integrate


def _log_weighted_asset(model):
    # x -> g(x) - x^2/2 - log(sqrt(2 pi)): log of exp(g) phi, evaluated in one exponent
    def f(x):
        return float(model.g(x)) - 0.5 * x * x - LOG_SQRT_2PI

    return f


def exercise_boundary(model, strike):
    """``x`` with ``g(x) = ln K`` by bracketing and Brent's method, or
    ``+-inf`` when the strike is beyond a flat wing."""
    target = math.log(strike)
    lo, hi = -1.0, 1.0
    while float(model.g(lo)) > target:
        lo *= 2.0
        if lo < -1e6:
            return -math.inf
    while float(model.g(hi)) < target:
        hi *= 2.0
        if hi > 1e6:
            return math.inf
    return brentq(lambda x: float(model.g(x)) - target, lo, hi, xtol=1e-15, rtol=1e-15)


def call_price(model, strike, tol=1e-12):
    """``int_{x_K}^inf (exp(g(x)) - K) phi(x) dx`` by adaptive quadrature."""
    xk = exercise_boundary(model, strike)
    if xk == math.inf:
        return 0.0
    logf = _log_weighted_asset(model)
    k = float(strike)

    def integrand(x):
        return math.exp(logf(x)) - k * math.exp(-0.5 * x * x - LOG_SQRT_2PI)

    return integrate(integrand, xk, math.inf, tol=tol, points=model.spline.knots)


def first_moment(model, tol=1e-12):
    """``E[exp(g(X))]`` by adaptive quadrature."""
    logf = _log_weighted_asset(model)
    return integrate(lambda x: math.exp(logf(x)), -math.inf, math.inf, tol=tol, points=model.spline.knots)


def oracle_prices(model, strikes, tol=1e-12):
    return np.array([call_price(model, k, tol) for k in np.atleast_1d(strikes)])
