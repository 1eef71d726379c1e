"""Normal distribution helpers, erfi, Black-76 pricing and the quadrature oracle.

Everything here is a pure function of its arguments. Array arguments are
broadcast with numpy; scalar inputs give numpy scalars back.

The infinite-domain quadrature in :func:`integrate` uses the QUADPACK
transformation for unbounded intervals (``scipy.integrate.quad`` with an
infinite limit) rather than truncation: exponential-quadratic wings with
curvature close to 1/2 decay far too slowly for a cut at ``|x| = 12``.
"""

import math
import warnings

import numpy as np
from scipy import integrate as _spi
from scipy import special as _sp

from .errors import AccuracyError, DomainError

SQRT_2PI = math.sqrt(2.0 * math.pi)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT2 = math.sqrt(2.0)

# 16-point Gauss-Legendre rule on [-1, 1], used for short intervals
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)

# largest |x| for which exp(x*x) is finite in double precision
ERFI_MAX_ARG = math.sqrt(math.log(np.finfo(float).max))


def norm_pdf(x):
    """Standard normal density."""
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / SQRT_2PI


def norm_cdf(x):
    """Standard normal cumulative distribution, with ``norm_cdf(+-inf) = 1, 0``."""
    return _sp.ndtr(np.asarray(x, dtype=float))


def log_norm_cdf(x):
    return _sp.log_ndtr(np.asarray(x, dtype=float))


def _log1mexp(t):
    # log(1 - exp(t)) for t <= 0
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(t > -math.log(2.0), np.log(-np.expm1(t)), np.log1p(-np.exp(t)))


def log_norm_cdf_diff(u, v, width=None):
    """``log(Phi(v) - Phi(u))`` for ``u <= v``, accurate in both tails.

    ``width`` optionally supplies ``v - u`` when the caller knows it more
    accurately than the rounded difference of the two arguments.

    Short intervals (relative to the local decay rate of the density) are
    integrated with Gauss-Legendre so that the difference never suffers from
    cancellation. Intervals on one side of zero use the complementary or
    left-tail logarithms; intervals straddling zero use erf, which has no
    cancellation there.
    """
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    out = np.full(u.shape, -np.inf)
    if width is None:
        width = v - u
    else:
        width = np.broadcast_to(np.asarray(width, dtype=float), u.shape)
    with np.errstate(invalid="ignore"):
        scale = width * np.maximum(1.0, np.maximum(np.abs(u), np.abs(v)))
    nonempty = width > 0

    short = nonempty & (scale <= 1.0)
    if np.any(short):
        half = 0.5 * width[short]
        t = (u[short] + half)[:, None] + half[:, None] * _GL_NODES[None, :]
        logf = -0.5 * t * t
        peak = logf.max(axis=1)
        s = np.exp(logf - peak[:, None]) @ _GL_WEIGHTS
        out[short] = peak + np.log(s * half) - LOG_SQRT_2PI

    rest = nonempty & ~short
    right = rest & (u >= 0)
    if np.any(right):
        la = _sp.log_ndtr(-u[right])
        lb = _sp.log_ndtr(-v[right])
        out[right] = la + _log1mexp(lb - la)
    left = rest & (v <= 0)
    if np.any(left):
        la = _sp.log_ndtr(v[left])
        lb = _sp.log_ndtr(u[left])
        out[left] = la + _log1mexp(lb - la)
    mid = rest & (u < 0) & (v > 0)
    if np.any(mid):
        out[mid] = np.log(0.5 * (_sp.erf(v[mid] / _SQRT2) - _sp.erf(u[mid] / _SQRT2)))
    return out[()] if out.ndim == 0 else out


def norm_cdf_diff(u, v, width=None):
    """``Phi(v) - Phi(u)`` for ``u <= v`` without cancellation."""
    return np.exp(log_norm_cdf_diff(u, v, width))


def dawson(x):
    """Dawson function ``F(x) = exp(-x^2) * int_0^x exp(t^2) dt``."""
    return _sp.dawsn(np.asarray(x, dtype=float))


def erfi_scaled(x):
    """``exp(-x^2) * erfi(x)``, finite for every real x."""
    return (2.0 / math.sqrt(math.pi)) * dawson(x)


def erfi(x):
    """Imaginary error function ``-i erf(ix)`` on the real line.

    Evaluated through the Dawson kernel. Raises ``OverflowError`` when the
    result is not representable; use :func:`erfi_scaled` for large arguments.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > ERFI_MAX_ARG):
        raise OverflowError("erfi overflows for |x| > %.6f" % ERFI_MAX_ARG)
    out = np.exp(x * x) * erfi_scaled(x)
    return out[()] if out.ndim == 0 else out


def _otm_call(forward, strike, s):
    # undiscounted call with strike >= forward, s = total vol > 0
    x = np.log(forward / strike)
    d1 = x / s + 0.5 * s
    d2 = d1 - s
    return forward * norm_cdf_diff(d2, d1, s) - (strike - forward) * norm_cdf(d2)


def black_scholes_price(forward, strike, maturity, vol, is_call=True):
    """Undiscounted Black-76 price.

    The out-of-the-money leg is evaluated directly and the in-the-money price is
    recovered from parity, so small time values keep full relative accuracy.
    """
    f, k, t, v, c = np.broadcast_arrays(
        np.asarray(forward, dtype=float),
        np.asarray(strike, dtype=float),
        np.asarray(maturity, dtype=float),
        np.asarray(vol, dtype=float),
        np.asarray(is_call, dtype=bool),
    )
    s = v * np.sqrt(t)
    out = np.where(c, np.maximum(f - k, 0.0), np.maximum(k - f, 0.0))
    live = s > 0
    if np.any(live):
        fl, kl, sl, cl = f[live], k[live], s[live], c[live]
        # out-of-the-money put is the call with forward and strike swapped
        call_side = kl >= fl
        otm = np.where(
            call_side,
            _otm_call(fl, kl, sl),
            _otm_call(kl, fl, sl),
        )
        itm = np.where(cl, ~call_side, call_side)
        intrinsic = np.where(cl, fl - kl, kl - fl)
        out[live] = otm + np.where(itm, intrinsic, 0.0)
    return out[()] if out.ndim == 0 else out


def black_scholes_vega(forward, strike, maturity, vol):
    """Derivative of the undiscounted Black-76 price with respect to vol."""
    forward = np.asarray(forward, dtype=float)
    sqt = np.sqrt(np.asarray(maturity, dtype=float))
    s = np.asarray(vol, dtype=float) * sqt
    d1 = np.log(forward / np.asarray(strike, dtype=float)) / s + 0.5 * s
    return forward * norm_pdf(d1) * sqt


def implied_vol(price, forward, strike, maturity, is_call=True):
    """Black-76 implied volatility of an undiscounted option price.

    Safeguarded Newton iteration on ``log(price)`` of the out-of-the-money
    option, as a function of total volatility ``s = vol * sqrt(T)``, with a
    bisection bracket. The starting point is ``sqrt(2 |ln(F/K)|)``, the total
    vol that maximises the vega at that moneyness, floored by the ATM
    approximation ``price * sqrt(2 pi) / sqrt(F K)``.

    Raises
    ------
    DomainError
        if the price is not strictly between the intrinsic value and the
        upper bound (F for a call, K for a put).
    """
    price, forward, strike, maturity = map(float, (price, forward, strike, maturity))
    if not (forward > 0 and strike > 0 and maturity > 0):
        raise DomainError("forward, strike and maturity must be positive")
    if is_call:
        lower, upper = max(forward - strike, 0.0), forward
    else:
        lower, upper = max(strike - forward, 0.0), strike
    if not price > lower:
        raise DomainError(
            "price %.17g is at or below the lower bound %.17g (intrinsic value)" % (price, lower)
        )
    if not price < upper:
        raise DomainError("price %.17g is at or above the upper bound %.17g" % (price, upper))

    call_side = strike >= forward
    # in-the-money input: strip the intrinsic value to get the OTM option
    target = price if is_call == call_side else price - lower
    if call_side:
        f, k = forward, strike
    else:
        f, k = strike, forward
    if not target > 0:
        raise DomainError("time value underflows for price %.17g" % price)

    log_target = math.log(target)
    x = math.log(f / k)
    s = max(math.sqrt(2.0 * abs(x)), target * SQRT_2PI / math.sqrt(f * k), 1e-8)
    lo, hi = 0.0, math.inf
    for _ in range(200):
        p = float(_otm_call(f, k, s))
        if p > target:
            hi = s
        else:
            lo = s
        if p == target:
            break
        d1 = x / s + 0.5 * s
        dp = f * math.exp(-0.5 * d1 * d1) / SQRT_2PI
        with np.errstate(all="ignore"):
            step = (math.log(p) - log_target) * p / dp if p > 0 and dp > 0 else math.nan
        s_new = s - step
        if not (lo < s_new < hi):
            s_new = 0.5 * (lo + hi) if math.isfinite(hi) else 2.0 * s
        if abs(s_new - s) <= 2e-16 * s:
            s = s_new
            break
        s = s_new
    return s / math.sqrt(maturity)


def integrate(f, lo, hi, tol=1e-10, points=(), limit=500):
    """Adaptive Gauss-Kronrod quadrature of a scalar function on ``[lo, hi]``.

    ``lo`` and ``hi`` may be infinite. ``points`` are interior break points
    (kinks, knots) at which the interval is split before integration. The
    estimate is accepted when the accumulated error bound is at most
    ``tol * max(1, |result|)``.

    Raises
    ------
    AccuracyError
        carrying the best estimate and its error bound, when the tolerance is
        not met.
    """
    lo, hi = float(lo), float(hi)
    if hi < lo:
        return -integrate(f, hi, lo, tol, points, limit)
    cuts = sorted({float(p) for p in points if lo < p < hi and math.isfinite(p)})
    edges = [lo] + cuts + [hi]
    total, error = 0.0, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _spi.IntegrationWarning)
        for a, b in zip(edges[:-1], edges[1:]):
            if a == b:
                continue
            val, err = _spi.quad(f, a, b, epsabs=0.25 * tol, epsrel=0.25 * tol, limit=limit)
            total += val
            error += err
    if not math.isfinite(total) or error > tol * max(1.0, abs(total)):
        raise AccuracyError(
            "quadrature error %.3g exceeds tolerance %.3g" % (error, tol), total, error
        )
    return total
