"""Clamped quadratic B-splines parameterized by nonnegative increments.

Breakpoints ``x[0] < ... < x[M]`` define the knot vector

    t = (x[0], x[0], x[0], x[1], ..., x[M-1], x[M], x[M], x[M])

and ``M + 2`` coefficients ``alpha``. With triple end knots, ``alpha[0]`` is
g(x[0]) and ``alpha[-1]`` is g(x[M]). The derivative at breakpoint ``x[j]``
is

    g'(x[j]) = 2 (alpha[j+1] - alpha[j]) / (x[min(j+1, M)] - x[max(j-1, 0)]),

so the ``M + 1`` coefficient increments map one to one onto the knot slopes,
and nonnegative increments give a nondecreasing g.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConstructionError, DomainError
from .market import atm_vol
from .spline import PiecewiseQuadratic

KNOT_KINDS = ("guideline", "smile", "atm")


@dataclass(frozen=True, eq=False)
class QuadraticBSpline:
    breakpoints: np.ndarray
    coefficients: np.ndarray

    def __post_init__(self):
        x = np.array(self.breakpoints, dtype=float)
        alpha = np.array(self.coefficients, dtype=float)
        if x.ndim != 1 or x.size < 2 or np.any(np.diff(x) <= 0):
            raise ConstructionError("breakpoints must be strictly increasing, at least 2")
        if alpha.shape != (x.size + 1,):
            raise ConstructionError(
                "need %d coefficients for %d breakpoints, got %d" % (x.size + 1, x.size, alpha.size)
            )
        x.flags.writeable = False
        alpha.flags.writeable = False
        object.__setattr__(self, "breakpoints", x)
        object.__setattr__(self, "coefficients", alpha)

    @property
    def knot_vector(self):
        x = self.breakpoints
        return np.concatenate([[x[0]] * 2, x, [x[-1]] * 2])

    @property
    def increments(self):
        return np.diff(self.coefficients)

    def _slope_spans(self):
        x = self.breakpoints
        right = np.append(x[1:], x[-1])
        left = np.insert(x[:-1], 0, x[0])
        return right - left

    @property
    def knot_slopes(self):
        return 2.0 * self.increments / self._slope_spans()

    def shifted(self, delta):
        return QuadraticBSpline(self.breakpoints, self.coefficients + delta)

    def to_piecewise_quadratic(self):
        """Exact conversion to segment coefficients ``(a, b, c)``."""
        x = self.breakpoints
        alpha = self.coefficients
        slopes = self.knot_slopes
        back = np.insert(np.diff(x), 0, 0.0)  # x[j] - x[j-1], zero at j = 0
        values = alpha[:-1] + 0.5 * slopes * back
        h = np.diff(x)
        c = (slopes[1:] - slopes[:-1]) / (2.0 * h)
        return PiecewiseQuadratic(x, values[:-1], slopes[:-1], c, alpha[-1])

    def __call__(self, x):
        return self.to_piecewise_quadratic()(x)


def from_increments(breakpoints, alpha0, increments, lambda_max=None):
    """Build ``alpha = alpha0 + cumsum(increments)``.

    Increments must lie in ``[0, lambda_max]`` (no cap when ``lambda_max`` is
    None).
    """
    inc = np.asarray(increments, dtype=float)
    if np.any(inc < 0) or np.any(~np.isfinite(inc)):
        raise DomainError("increments must be finite and nonnegative")
    if lambda_max is not None and np.any(inc > lambda_max):
        raise DomainError("increment above cap %r" % lambda_max)
    alpha = float(alpha0) + np.concatenate([[0.0], np.cumsum(inc)])
    return QuadraticBSpline(breakpoints, alpha)


def implied_abscissae(market, total_vols):
    """``x = (ln K + b^2/2 - ln F) / b`` with ``b = sigma sqrt(T)`` per strike."""
    b = np.broadcast_to(np.asarray(total_vols, dtype=float), market.strikes.shape)
    return (np.log(market.strikes) + 0.5 * b * b - np.log(market.forward)) / b


def build_knots(kind, market, guideline_knots=None):
    """Breakpoints for the B-spline parameterization.

    ``"atm"`` uses the at-the-money total vol for every strike, ``"smile"``
    each strike's own vol, ``"guideline"`` returns the supplied fixture knots
    verbatim.
    """
    if kind == "guideline":
        if guideline_knots is None:
            raise ConstructionError("no guideline knots available for this dataset")
        x = np.array(guideline_knots, dtype=float)
    elif kind == "atm":
        x = implied_abscissae(market, atm_vol(market) * np.sqrt(market.maturity))
    elif kind == "smile":
        x = implied_abscissae(market, market.vols * np.sqrt(market.maturity))
    else:
        raise ValueError("unknown knot kind %r, expected one of %s" % (kind, KNOT_KINDS))
    bad = np.flatnonzero(np.diff(x) <= 0)
    if bad.size:
        i = int(bad[0])
        raise ConstructionError(
            "%s knots not increasing: x[%d]=%r >= x[%d]=%r" % (kind, i, x[i], i + 1, x[i + 1])
        )
    return x
