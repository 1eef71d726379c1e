"""Piecewise quadratic C1 functions and Schumaker shape-preserving interpolation.

A :class:`PiecewiseQuadratic` stores knots ``x[0] < ... < x[M]`` and on each
segment ``[x[j], x[j+1]]`` the coefficients of

    g(x) = a[j] + b[j] (x - x[j]) + c[j] (x - x[j])**2 .

The value at the last knot is kept separately as ``a_end`` so that the
ordinates ``a[0..M-1], a_end`` line up with the knots.

:func:`schumaker_build` inserts at most one knot per data interval. The slopes
it is fed decide whether the result is monotone: :func:`schumaker_derivatives`
reproduces the original arc-length weighted estimates, which can break
monotonicity on monotone data, while :func:`lam_harmonic_derivatives` keeps
every slope in ``[0, 2 min(s[i-1], s[i])]`` and hence always yields a monotone
spline on nondecreasing data.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConstructionError, DomainError, RangeError


@dataclass(frozen=True)
class InterpolationData:
    """Interpolation nodes ``(x[i], y[i])``, ``i = 0..N``."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        y = np.array(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise ConstructionError("need two equal-length 1-d arrays with at least 2 points")
        if np.any(np.diff(x) <= 0):
            i = int(np.argmax(np.diff(x) <= 0))
            raise ConstructionError(
                "abscissae not strictly increasing at %d: %r >= %r" % (i, x[i], x[i + 1])
            )
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class MonotonicityReport:
    monotone: bool
    worst_derivative: float
    worst_location: float


@dataclass(frozen=True, eq=False)
class PiecewiseQuadratic:
    """C1 piecewise quadratic on ``[knots[0], knots[-1]]``."""

    knots: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    a_end: float

    def __post_init__(self):
        arrays = {}
        for name in ("knots", "a", "b", "c"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            arrays[name] = arr
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "a_end", float(self.a_end))
        m = arrays["knots"].size - 1
        if m < 1 or any(arrays[k].shape != (m,) for k in ("a", "b", "c")):
            raise ConstructionError("need M+1 knots and M segment coefficients")
        if np.any(np.diff(arrays["knots"]) <= 0):
            raise ConstructionError("knots must be strictly increasing")

    @property
    def num_segments(self):
        return self.a.size

    @property
    def widths(self):
        return np.diff(self.knots)

    @property
    def ordinates(self):
        """Values at all knots, ``g(knots[j])``."""
        return np.append(self.a, self.a_end)

    @property
    def knot_slopes(self):
        """Derivatives at all knots, the last one taken from the last segment."""
        h = self.widths
        return np.append(self.b, self.b[-1] + 2.0 * self.c[-1] * h[-1])

    def shifted(self, delta):
        """Copy with every ordinate moved by ``delta``."""
        return PiecewiseQuadratic(self.knots, self.a + delta, self.b, self.c, self.a_end + delta)

    def segment_index(self, x):
        """Segment holding ``x``: right-open intervals, last knot in last segment."""
        x = np.asarray(x, dtype=float)
        lo, hi = self.knots[0], self.knots[-1]
        if np.any((x < lo) | (x > hi)) or np.any(np.isnan(x)):
            bad = x[(x < lo) | (x > hi) | np.isnan(x)] if x.ndim else x
            raise RangeError(
                "x=%r outside spline range [%r, %r]" % (np.ravel(bad)[0], lo, hi)
            )
        j = np.searchsorted(self.knots, x, side="right") - 1
        return np.minimum(j, self.num_segments - 1)

    def __call__(self, x):
        return self.evaluate(x)

    def evaluate(self, x):
        j = self.segment_index(x)
        t = np.asarray(x, dtype=float) - self.knots[j]
        return self.a[j] + t * (self.b[j] + self.c[j] * t)

    def derivative(self, x):
        j = self.segment_index(x)
        t = np.asarray(x, dtype=float) - self.knots[j]
        return self.b[j] + 2.0 * self.c[j] * t

    def inverse(self, y):
        """Solve ``g(x) = y`` for a monotone nondecreasing spline.

        The segment is located by binary search on the ordinates, then the
        segment quadratic is solved in the cancellation-free form
        ``t = 2 d / (b + sqrt(b^2 + 4 c d))``, which is the root that grows
        continuously from ``t = 0`` and reduces to ``d / b`` when ``c = 0``.
        On an exactly flat stretch the left end is returned.
        """
        slopes = self.knot_slopes
        if np.min(np.append(slopes, self.b)) < -1e-12 * max(1.0, np.max(np.abs(slopes))):
            raise DomainError("inverse requires a monotone nondecreasing spline")
        y = np.asarray(y, dtype=float)
        ords = self.ordinates
        if np.any((y < ords[0]) | (y > ords[-1])) or np.any(np.isnan(y)):
            raise RangeError("y outside spline range [%r, %r]" % (ords[0], ords[-1]))
        # first knot whose ordinate reaches y, so flat runs resolve to their left end
        j = np.clip(np.searchsorted(ords, y, side="left") - 1, 0, self.num_segments - 1)
        d = y - self.a[j]
        b, c = self.b[j], self.c[j]
        disc = np.maximum(b * b + 4.0 * c * d, 0.0)
        denom = b + np.sqrt(disc)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(denom > 0, 2.0 * d / denom, 0.0)
        t = np.clip(t, 0.0, self.widths[j])
        return self.knots[j] + t


def secant_slopes(data):
    return np.diff(data.y) / np.diff(data.x)


def schumaker_derivatives(data):
    """Slope estimates of the original Schumaker construction.

    Interior slopes are arc-length weighted means of the adjacent secants (zero
    when the secants change sign); the end slopes are ``(3 s - d) / 2`` with
    ``s`` the end secant and ``d`` the neighbouring estimate. Nothing keeps the
    slopes inside the monotone region, which is the point of having it.
    """
    h = np.diff(data.x)
    dy = np.diff(data.y)
    s = dy / h
    arc = np.hypot(h, dy)
    d = np.zeros(data.x.size)
    left, right = s[:-1], s[1:]
    wl, wr = arc[:-1], arc[1:]
    d[1:-1] = np.where(left * right > 0, (wl * left + wr * right) / (wl + wr), 0.0)
    if s.size == 1:
        d[:] = s[0]
    else:
        d[0] = 0.5 * (3.0 * s[0] - d[1])
        d[-1] = 0.5 * (3.0 * s[-1] - d[-2])
    return d


def lam_harmonic_derivatives(data, weighted=True):
    """Harmonic-mean slope estimates that keep the Schumaker spline monotone.

    Interior points get zero when the adjacent secants do not have the same
    strict sign, otherwise their harmonic mean. With ``weighted=True`` the
    means use the interval-length weights ``(2 h[i] + h[i-1], h[i] + 2 h[i-1])``
    and are clipped to ``2 min(s[i-1], s[i])``; the plain mean already lies in
    that range. End points take ``2 s - d`` (the slope that makes the end
    interval a single quadratic), clipped to ``[0, 2 s]``.

    Decreasing data is handled by symmetry (signs flipped).
    """
    h = np.diff(data.x)
    s = np.diff(data.y) / h
    d = np.zeros(data.x.size)
    if s.size == 1:
        d[:] = s[0]
        return d
    left, right = s[:-1], s[1:]
    same = left * right > 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if weighted:
            wl = 2.0 * h[1:] + h[:-1]
            wr = h[1:] + 2.0 * h[:-1]
            hm = (wl + wr) / (wl / left + wr / right)
        else:
            hm = 2.0 * left * right / (left + right)
    sign = np.sign(left)
    cap = 2.0 * np.minimum(np.abs(left), np.abs(right))
    d[1:-1] = np.where(same, sign * np.minimum(np.abs(hm), cap), 0.0)
    for end, sec, nb in ((0, s[0], d[1]), (-1, s[-1], d[-2])):
        v = 2.0 * sec - nb
        lo, hi = sorted((0.0, 2.0 * sec))
        d[end] = min(max(v, lo), hi)
    return d


def schumaker_build(data, derivatives=None):
    """C1 quadratic spline through ``data`` with the given knot slopes.

    When ``d[i] + d[i+1] = 2 s[i]`` (to rounding) the interval carries a single
    quadratic; otherwise one knot is inserted following Schumaker's placement
    rule (midpoint when both slopes sit on the same side of the secant, else
    the point that balances the two deviations). Any knot strictly inside the
    interval gives a valid C1 interpolant, so a degenerate placement falls back
    to the midpoint.

    ``derivatives`` defaults to :func:`lam_harmonic_derivatives`.
    """
    if derivatives is None:
        derivatives = lam_harmonic_derivatives(data)
    d = np.asarray(derivatives, dtype=float)
    x, y = data.x, data.y
    if d.shape != x.shape:
        raise ConstructionError("need one derivative per data point")
    h = np.diff(x)
    s = np.diff(y) / h

    knots, aa, bb, cc = [], [], [], []
    for i in range(h.size):
        x0, hi, y0, d0, d1, si = x[i], h[i], y[i], d[i], d[i + 1], s[i]
        scale = abs(d0) + abs(d1) + 2.0 * abs(si)
        if abs(d0 + d1 - 2.0 * si) <= 1e-13 * scale:
            knots.append(x0)
            aa.append(y0)
            bb.append(d0)
            cc.append(0.5 * (d1 - d0) / hi)
            continue
        u, v = d0 - si, d1 - si
        if u * v >= 0:
            xi = x0 + 0.5 * hi
        elif abs(u) > abs(v):
            xi = x[i + 1] + u * hi / (d1 - d0)
        else:
            xi = x0 + v * hi / (d1 - d0)
        alpha = xi - x0
        beta = x[i + 1] - xi
        if not (alpha > 1e-12 * hi and beta > 1e-12 * hi):
            xi = x0 + 0.5 * hi
            alpha = beta = 0.5 * hi
        lam = alpha / hi
        sbar = 2.0 * si - lam * d0 - (1.0 - lam) * d1
        knots += [x0, xi]
        aa += [y0, y0 + 0.5 * alpha * (d0 + sbar)]
        bb += [d0, sbar]
        cc += [0.5 * (sbar - d0) / alpha, 0.5 * (d1 - sbar) / beta]
    knots.append(x[-1])
    return PiecewiseQuadratic(np.array(knots), np.array(aa), np.array(bb), np.array(cc), y[-1])


def audit_monotonicity(pq, tol=None):
    """Exact monotonicity check.

    The derivative is linear on each segment, so its minimum sits at a segment
    end: the report looks at ``b[j]`` and ``b[j] + 2 c[j] h[j]`` only. A
    derivative counts as nonnegative down to ``-tol``, by default a few
    roundings of the largest slope term (a flat end evaluates to about -1e-16).
    """
    h = pq.widths
    ends = np.concatenate([pq.b, pq.b + 2.0 * pq.c * h])
    where = np.concatenate([pq.knots[:-1], pq.knots[1:]])
    if tol is None:
        scale = max(np.max(np.abs(pq.b)), np.max(np.abs(2.0 * pq.c * h)))
        tol = 8.0 * np.finfo(float).eps * scale
    k = int(np.argmin(ends))
    worst = float(ends[k])
    return MonotonicityReport(worst >= -tol, worst, float(where[k]))
