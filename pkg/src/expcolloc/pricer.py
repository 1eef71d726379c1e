"""Closed-form pricing under exponential spline collocation.

The asset is ``S = exp(g(X))`` with ``X`` standard normal and ``g`` a monotone
C1 piecewise quadratic, continued outside ``[x[0], x[M]]`` by
exponential-quadratic wings

    left:  g(x) = a[0] + s_L (x - x[0]) + c_left  (x - x[0])**2,  x < x[0]
    right: g(x) = a[M] + s_R (x - x[M]) + c_right (x - x[M])**2,  x > x[M]

with ``s_L = g'(x[0])``, ``s_R = g'(x[M])`` by default, ``c_left <= 0`` and
``0 <= c_right < 1/2`` (so the first moment exists). Linear wings are the case
``c = 0``.

Every price is a sum of integrals of ``exp(quadratic) * phi`` over pieces of
the real line, all computed by :func:`segment_integral`. The undiscounted
call is

    C(K) = sum over pieces of int_{max(lo, xk)}^{hi} exp(g) phi  -  K Phi(-xk),

where ``xk = g^{-1}(ln K)`` is the exercise boundary. Note the minus sign on
the strike term: C = E[(S - K) 1{X > xk}].

The implied density uses ``g^{-1}(ln K)``:  D(K) = phi(xk) / (K g'(xk)).
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from .errors import ConstructionError, DomainError, RangeError, SingularDensityError
from .special import (
    LOG_SQRT_2PI,
    _GL_NODES,
    _GL_WEIGHTS,
    dawson,
    implied_vol,
    log_norm_cdf_diff,
    norm_cdf,
    norm_pdf,
)
from .spline import PiecewiseQuadratic, audit_monotonicity

# beyond this value of (linear coefficient)^2 / |1 - 2c| the completed-square
# forms lose too many digits and the segment falls back to Gauss-Legendre
_ILL_CONDITIONED = 1e4


@dataclass(frozen=True)
class WingSpec:
    """Wing curvatures, and optional slope overrides (None keeps g' continuous)."""

    c_left: float = 0.0
    c_right: float = 0.0
    left_slope: float = None
    right_slope: float = None

    def __post_init__(self):
        if not self.c_left <= 0.0:
            raise ConstructionError("left curvature must be <= 0, got %r" % self.c_left)
        if not 0.0 <= self.c_right < 0.5:
            raise ConstructionError(
                "right curvature must be in [0, 1/2) for a finite first moment, got %r"
                % self.c_right
            )
        for s in (self.left_slope, self.right_slope):
            if s is not None and not s >= 0:
                raise ConstructionError("wing slopes must be nonnegative")


@dataclass(frozen=True, eq=False)
class CollocationModel:
    spline: PiecewiseQuadratic
    forward: float
    maturity: float
    wings: WingSpec = field(default_factory=WingSpec)
    moment_shift: float = 0.0

    def __post_init__(self):
        if not (self.forward > 0 and self.maturity > 0):
            raise ConstructionError("forward and maturity must be positive")
        report = audit_monotonicity(self.spline)
        scale = max(1.0, float(np.max(np.abs(self.spline.knot_slopes))))
        if report.worst_derivative < -1e-12 * scale:
            raise ConstructionError(
                "g is not monotone: g'=%r at x=%r"
                % (report.worst_derivative, report.worst_location)
            )

    @property
    def left_slope(self):
        s = self.wings.left_slope
        return max(float(self.spline.b[0]), 0.0) if s is None else s

    @property
    def right_slope(self):
        s = self.wings.right_slope
        return max(float(self.spline.knot_slopes[-1]), 0.0) if s is None else s

    @property
    def first_ordinate(self):
        return float(self.spline.a[0])

    def shifted(self, delta):
        return replace(
            self, spline=self.spline.shifted(delta), moment_shift=self.moment_shift + delta
        )

    def pieces(self):
        """Arrays ``(a, b, c, xref, lo, hi)`` for the left wing, every spline
        segment and the right wing, in order along the real line."""
        sp = self.spline
        x = sp.knots
        a = np.concatenate([[sp.a[0]], sp.a, [sp.a_end]])
        b = np.concatenate([[self.left_slope], sp.b, [self.right_slope]])
        c = np.concatenate([[self.wings.c_left], sp.c, [self.wings.c_right]])
        xref = np.concatenate([[x[0]], x[:-1], [x[-1]]])
        lo = np.concatenate([[-np.inf], x])
        hi = np.concatenate([x, [np.inf]])
        return a, b, c, xref, lo, hi

    def g(self, x):
        """Collocation function on the whole real line."""
        x = np.asarray(x, dtype=float)
        sp = self.spline
        x0, xm = sp.knots[0], sp.knots[-1]
        inner = sp(np.clip(x, x0, xm))
        tl = np.minimum(x - x0, 0.0)
        tr = np.maximum(x - xm, 0.0)
        left = sp.a[0] + tl * (self.left_slope + self.wings.c_left * tl)
        right = sp.a_end + tr * (self.right_slope + self.wings.c_right * tr)
        out = np.where(x < x0, left, np.where(x > xm, right, inner))
        return out[()] if out.ndim == 0 else out

    def g_prime(self, x):
        x = np.asarray(x, dtype=float)
        sp = self.spline
        x0, xm = sp.knots[0], sp.knots[-1]
        inner = sp.derivative(np.clip(x, x0, xm))
        left = self.left_slope + 2.0 * self.wings.c_left * np.minimum(x - x0, 0.0)
        right = self.right_slope + 2.0 * self.wings.c_right * np.maximum(x - xm, 0.0)
        out = np.where(x < x0, left, np.where(x > xm, right, inner))
        return out[()] if out.ndim == 0 else out


def _gl_log_integral(a, b, c, xref, lo, hi):
    # log of int_lo^hi exp(a + b t + c t^2) phi(x) dx, t = x - xref, by composite
    # Gauss-Legendre with panels short enough that the exponent varies by O(1)
    def exponent(x):
        t = x - xref
        return a + t * (b + c * t) - 0.5 * x * x - LOG_SQRT_2PI

    width = hi - lo
    slope = max(abs(b + 2 * c * (lo - xref) - lo), abs(b + 2 * c * (hi - xref) - hi))
    panels = int(min(20000, max(1, math.ceil(slope * width + abs(1 - 2 * c) * width * width))))
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    nodes = (edges[:-1] + half)[:, None] + half[:, None] * _GL_NODES[None, :]
    logf = exponent(nodes) + np.log(half)[:, None]
    return float(logsumexp(logf, b=np.broadcast_to(_GL_WEIGHTS, logf.shape)))


def log_segment_integral(a, b, c, xref, lo, hi):
    """Logarithm of :func:`segment_integral` (``-inf`` for empty intervals)."""
    args = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, c, xref, lo, hi)))
    shape = args[0].shape
    a, b, c, xref, lo, hi = (v.ravel() for v in args)
    if np.any(hi < lo):
        raise DomainError("segment_integral needs lo <= hi")
    q = 1.0 - 2.0 * c
    infinite = np.isinf(lo) | np.isinf(hi)
    nonempty = hi > lo
    if np.any(infinite & nonempty & (q <= 1e-12)):
        raise DomainError("integral diverges: infinite interval with 1 - 2c <= 0")
    beta = b - 2.0 * c * xref
    gamma = a - xref * (b - c * xref)
    with np.errstate(divide="ignore", invalid="ignore"):
        ill = beta * beta > _ILL_CONDITIONED * np.abs(q)
    out = np.full(a.shape, -np.inf)

    pos = nonempty & (q > 1e-12) & ~(ill & ~infinite)
    if np.any(pos):
        rq = np.sqrt(q[pos])
        m = beta[pos] / rq
        width = np.where(infinite[pos], np.inf, rq * (hi[pos] - lo[pos]))
        out[pos] = (
            gamma[pos]
            + 0.5 * m * m
            - np.log(rq)
            + log_norm_cdf_diff(rq * lo[pos] - m, rq * hi[pos] - m, width)
        )

    neg = nonempty & (q < -1e-12) & ~ill
    if np.any(neg):
        p = -q[neg]
        sp = np.sqrt(0.5 * p)
        shift = beta[neg] / p
        t1 = sp * (lo[neg] + shift)
        t2 = sp * (hi[neg] + shift)
        # F(t) = int_0^t exp(s^2) ds = exp(t^2) D(t), D the Dawson function
        top = np.maximum(t1 * t1, t2 * t2)
        diff = np.exp(t2 * t2 - top) * dawson(t2) - np.exp(t1 * t1 - top) * dawson(t1)
        narrow = (t2 - t1) * np.maximum(1.0, np.maximum(np.abs(t1), np.abs(t2))) <= 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = (
                gamma[neg]
                - beta[neg] * shift * 0.5
                - 0.5 * np.log(math.pi * p)
                + top
                + np.log(diff)
            )
        vals = np.where(narrow | ~(diff > 0), np.nan, vals)
        out[neg] = vals

    # everything not yet handled: near-critical curvature, ill-conditioned
    # completed squares and narrow erfi differences
    rest = nonempty & ~pos & (~neg | np.isnan(out))
    for i in np.flatnonzero(rest):
        out[i] = _gl_log_integral(a[i], b[i], c[i], xref[i], lo[i], hi[i])
    out = out.reshape(shape)
    return out[()] if out.ndim == 0 else out


def segment_integral(a, b, c, xref, lo, hi):
    """``int_lo^hi exp(a + b (x - xref) + c (x - xref)^2) phi(x) dx``.

    Closed form by completing the square: normal CDF differences when
    ``1 - 2c > 0``, Dawson/erfi differences when ``1 - 2c < 0``. All
    intermediate quantities are kept in log space. ``lo``/``hi`` may be
    infinite only when ``1 - 2c > 0``; a :class:`DomainError` is raised
    otherwise.
    """
    return np.exp(log_segment_integral(a, b, c, xref, lo, hi))


def extrapolation_integral(s, x, y, lo, hi):
    """Integral of ``exp(y + s (u - x)) phi(u)`` over ``[lo, hi]``, i.e.
    ``exp(y - s x + s^2/2) (Phi(hi - s) - Phi(lo - s))``."""
    return segment_integral(y, s, 0.0, x, lo, hi)


def _wing_inverse(d, slope, curv):
    # root t of curv t^2 + slope t = d that continues from t = 0
    disc = np.maximum(slope * slope + 4.0 * curv * d, 0.0)
    denom = slope + np.sqrt(disc)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(denom > 0, 2.0 * d / denom, np.sign(d) * np.inf)


def g_inverse(model, log_strike):
    """Exercise boundary ``x`` with ``g(x) = log_strike``.

    Returns ``-inf`` below a flat left wing and ``+inf`` above a flat right
    wing, where the option is always (never) exercised.
    """
    y = np.asarray(log_strike, dtype=float)
    if np.any(np.isnan(y)):
        raise RangeError("log strike is NaN")
    sp = model.spline
    lo_y, hi_y = sp.a[0], sp.a_end
    body = sp.inverse(np.clip(y, lo_y, hi_y))
    with np.errstate(invalid="ignore"):
        left = sp.knots[0] + _wing_inverse(y - lo_y, model.left_slope, model.wings.c_left)
        right = sp.knots[-1] + _wing_inverse(y - hi_y, model.right_slope, model.wings.c_right)
    out = np.where(y < lo_y, left, np.where(y > hi_y, right, body))
    out = np.where(np.isinf(y), y, out)
    return out[()] if out.ndim == 0 else out


def _piece_index(model, x):
    # 0 = left wing, j + 1 = spline segment j, M + 1 = right wing
    knots = model.spline.knots
    idx = np.searchsorted(knots, x, side="right")
    return np.where(x == knots[-1], knots.size - 1, idx)


def first_moment(model):
    """``E[exp(g(X))]``: wing integrals plus full segment integrals."""
    return math.exp(log_first_moment(model))


def log_first_moment(model):
    return float(logsumexp(log_segment_integral(*model.pieces())))


def enforce_first_moment(model):
    """Shift every ordinate by ``ln F - ln M1`` so that the model reprices the forward."""
    delta = math.log(model.forward) - log_first_moment(model)
    return model.shifted(delta)


def price_call(model, strike):
    """Undiscounted call price(s) for strike(s) ``K > 0``."""
    k = np.asarray(strike, dtype=float)
    if np.any(~(k > 0)):
        raise DomainError("strikes must be positive")
    pieces = model.pieces()
    full = segment_integral(*pieces)
    tail = np.append(np.cumsum(full[::-1])[::-1], 0.0)
    xk = g_inverse(model, np.log(k))
    p = _piece_index(model, xk)
    never = np.isposinf(xk)
    pc = np.minimum(p, len(full) - 1)
    a, b, c, xref, lo, hi = (v[pc] for v in pieces)
    start = np.where(never, hi, np.maximum(xk, lo))
    partial = segment_integral(a, b, c, xref, start, hi)
    out = partial + tail[np.minimum(pc + 1, len(full))] - k * norm_cdf(-xk)
    out = np.where(never, 0.0, np.maximum(out, 0.0))
    return out[()] if out.ndim == 0 else out


def price_put(model, strike):
    """Put from parity with the model forward ``M1`` (equal to F once enforced)."""
    k = np.asarray(strike, dtype=float)
    return price_call(model, k) - first_moment(model) + k


def density(model, strike):
    """Risk-neutral density of the asset price at ``strike`` (zero at ``K = 0``)."""
    k = np.asarray(strike, dtype=float)
    if np.any(~(k >= 0)):
        raise DomainError("strikes must be nonnegative")
    with np.errstate(divide="ignore"):
        xk = g_inverse(model, np.log(k))
    finite = np.isfinite(xk)
    slope = model.g_prime(np.where(finite, xk, 0.0))
    if np.any(finite & ~(slope > 0)):
        bad = np.ravel(k[finite & ~(slope > 0)] if k.ndim else k)[0]
        raise SingularDensityError(
            "g is flat at the exercise boundary for strike %r; density is unbounded" % bad
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(finite, norm_pdf(np.where(finite, xk, 0.0)) / (k * slope), 0.0)
    return out[()] if out.ndim == 0 else out


def _put_direct(model, strike):
    # K Phi(xk) - int_{-inf}^{xk} exp(g) phi, accurate for strikes far below
    # the forward where parity would cancel
    k = np.asarray(strike, dtype=float)
    pieces = model.pieces()
    full = segment_integral(*pieces)
    head = np.concatenate([[0.0], np.cumsum(full)])
    xk = g_inverse(model, np.log(k))
    p = _piece_index(model, xk)
    pc = np.clip(p, 0, len(full) - 1)
    a, b, c, xref, lo, hi = (v[pc] for v in pieces)
    end = np.clip(xk, lo, hi)
    partial = segment_integral(a, b, c, xref, lo, np.where(np.isneginf(xk), lo, end))
    out = k * norm_cdf(xk) - (head[pc] + partial)
    out = np.where(np.isneginf(xk), 0.0, np.maximum(out, 0.0))
    return out[()] if out.ndim == 0 else out


def implied_vols(model, strikes):
    """Black implied vols of model prices, NaN where the price is out of band.

    Out-of-the-money options are inverted: calls at or above the forward,
    puts below it, so deep in-the-money strikes keep full accuracy.
    """
    k = np.atleast_1d(np.asarray(strikes, dtype=float))
    is_call = k >= model.forward
    prices = np.where(is_call, price_call(model, k), _put_direct(model, k))
    out = np.full(k.shape, np.nan)
    for i, (kk, pp, cc) in enumerate(zip(k, prices, is_call)):
        try:
            out[i] = implied_vol(pp, model.forward, kk, model.maturity, bool(cc))
        except DomainError:
            pass
    return out
