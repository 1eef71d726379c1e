"""Calibration of the collocation model to one market slice.

Two parameterizations are supported.

``schumaker``
    The ordinates are fixed at the initial log-strikes and the optimizer moves
    the abscissae: ``x[0]`` is free and each gap is ``MIN_GAP + softplus(u)``.
    Every decoded candidate is rebuilt as a monotone Schumaker spline and then
    shifted so that its first moment equals the forward, so the ordinates
    drift by the shift only.

``bspline``
    The breakpoints are fixed and the optimizer moves the coefficient
    increments, each mapped into ``[0, lambda_max]`` by
    ``lambda_max * expit(v)``. ``alpha[0]`` stays at its initial value: the
    moment shift absorbs any change of it, so as a parameter it would only
    contribute a null direction to the Jacobian.

The objective is the sum of squared residuals: vega-weighted call price
errors followed by the inverse-slope penalty rows
``epsilon * (1/b[j+1] - 1/b[j])``. It is minimized with a Levenberg-Marquardt
loop over a forward-difference Jacobian.
"""

import hashlib
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import lsq_linear
from scipy.special import expit, logit

from .bspline import KNOT_KINDS, QuadraticBSpline, build_knots, implied_abscissae
from .errors import CollocationError, ConstructionError
from .market import atm_vol
from .pricer import CollocationModel, WingSpec, enforce_first_moment, g_inverse, implied_vols
from .pricer import price_call
from .special import black_scholes_price, black_scholes_vega
from .spline import InterpolationData, schumaker_build

PARAMETERIZATIONS = ("schumaker", "bspline")
GUESSES = ("atm", "smile")
WEIGHTINGS = ("inverse_vega", "unit")

MIN_GAP = 1e-4
SLOPE_FLOOR = 1e-12
MAX_STEP = 4.0


@dataclass(frozen=True)
class CalibrationConfig:
    """Calibration settings.

    ``knot_set`` only matters for the B-spline parameterization. ``knots``
    overrides it with explicit breakpoints. ``lambda_max=None`` caps each
    B-spline increment at twice the quoted log-strike range.
    """

    parameterization: str = "bspline"
    guess: str = "smile"
    knot_set: str = "atm"
    epsilon: float = 0.0
    c_left: float = 0.0
    c_right: float = 0.0
    lambda_max: float = None
    max_iterations: int = 200
    gradient_tol: float = 1e-10
    step_tol: float = 1e-12
    objective_tol: float = 1e-12
    weighting: str = "inverse_vega"
    knots: tuple = None

    def __post_init__(self):
        for name, value, allowed in (
            ("parameterization", self.parameterization, PARAMETERIZATIONS),
            ("guess", self.guess, GUESSES),
            ("knot_set", self.knot_set, KNOT_KINDS),
            ("weighting", self.weighting, WEIGHTINGS),
        ):
            if value not in allowed:
                raise ValueError("%s must be one of %s, got %r" % (name, allowed, value))
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be nonnegative")
        if self.lambda_max is not None and not self.lambda_max > 0:
            raise ValueError("lambda_max must be positive")
        if not (isinstance(self.max_iterations, int) and self.max_iterations > 0):
            raise ValueError("max_iterations must be a positive integer")
        for name in ("gradient_tol", "step_tol", "objective_tol"):
            if not getattr(self, name) > 0:
                raise ValueError("%s must be positive" % name)
        if self.knots is not None:
            object.__setattr__(self, "knots", tuple(float(k) for k in self.knots))
        self.wings()

    def wings(self):
        return WingSpec(c_left=self.c_left, c_right=self.c_right)


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    objective: float
    first_ordinate: float
    params_hash: str


@dataclass(frozen=True)
class IterationTrace:
    """One record per iteration; iteration 0 is the initial guess."""

    records: tuple = ()

    def __len__(self):
        return len(self.records)

    @property
    def objectives(self):
        return np.array([r.objective for r in self.records])

    @property
    def first_ordinates(self):
        return np.array([r.first_ordinate for r in self.records])


@dataclass(frozen=True, eq=False)
class CalibratedResult:
    model: CollocationModel
    residual_norm: float
    vol_rmse: float
    trace: IterationTrace
    converged: bool
    iterations: int
    reason: str = ""
    params: np.ndarray = None
    flags: tuple = ()
    bspline: QuadraticBSpline = None


# ---------------------------------------------------------------------------
# penalties and residuals


def _inverse_slopes(slopes):
    return 1.0 / np.maximum(np.asarray(slopes, dtype=float), SLOPE_FLOOR)


def penalty_rows_bspline(spline, epsilon):
    """``epsilon * (1/b[j+1] - 1/b[j])`` over the knot slopes of ``spline``."""
    return epsilon * np.diff(_inverse_slopes(spline.knot_slopes))


def penalty_bspline(spline, epsilon):
    """Inverse-slope penalty at the knots of a piecewise quadratic."""
    r = penalty_rows_bspline(spline, epsilon)
    return float(r @ r)


def _slopes_at_strikes(model, strikes):
    x = g_inverse(model, np.log(np.asarray(strikes, dtype=float)))
    finite = np.isfinite(x)
    # beyond a flat wing the slope is zero; the floor then takes over
    return np.where(finite, model.g_prime(np.where(finite, x, 0.0)), 0.0)


def penalty_rows_schumaker(model, strikes, epsilon):
    """``epsilon * (1/g'(x[i+1]) - 1/g'(x[i]))`` with ``x[i] = g^{-1}(ln K[i])``."""
    return epsilon * np.diff(_inverse_slopes(_slopes_at_strikes(model, strikes)))


def penalty_schumaker(model, market, epsilon):
    """Inverse-slope penalty evaluated at the market strikes."""
    r = penalty_rows_schumaker(model, market.strikes, epsilon)
    return float(r @ r)


def market_prices(market):
    return black_scholes_price(market.forward, market.strikes, market.maturity, market.vols)


def price_weights(market, weighting="inverse_vega"):
    """Inverse-vega weights, floored at ``1e-6 F sqrt(T)``, or ones."""
    if weighting == "unit":
        return np.ones(len(market))
    if weighting != "inverse_vega":
        raise ValueError("unknown weighting %r" % weighting)
    vega = black_scholes_vega(market.forward, market.strikes, market.maturity, market.vols)
    floor = 1e-6 * market.forward * math.sqrt(market.maturity)
    return 1.0 / np.maximum(vega, floor)


def residuals(model, market, weighting="inverse_vega", epsilon=0.0, penalty_rows=None):
    """Weighted call price errors, followed by penalty rows when given.

    ``penalty_rows`` is an array already scaled by ``epsilon``. When it is
    None and ``epsilon > 0`` the rows are evaluated at the market strikes.
    """
    w = price_weights(market, weighting)
    r = w * (price_call(model, market.strikes) - market_prices(market))
    if penalty_rows is None and epsilon > 0:
        penalty_rows = penalty_rows_schumaker(model, market.strikes, epsilon)
    if penalty_rows is None:
        return r
    return np.concatenate([r, penalty_rows])


# ---------------------------------------------------------------------------
# parameterizations


def _softplus(u):
    return np.logaddexp(0.0, u)


def _softplus_inv(z):
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore"):
        return np.where(z > 30.0, z, np.log(np.expm1(np.minimum(z, 30.0))))


@dataclass(frozen=True, eq=False)
class SchumakerParameterization:
    """Abscissae are free, ordinates are fixed; see the module docstring."""

    ordinates: np.ndarray
    forward: float
    maturity: float
    wings: WingSpec = field(default_factory=WingSpec)

    def nodes(self, params):
        p = np.asarray(params, dtype=float)
        gaps = MIN_GAP + _softplus(p[1:])
        return p[0] + np.concatenate([[0.0], np.cumsum(gaps)])

    def encode(self, abscissae):
        """Parameters for the given node abscissae; also returns whether any
        gap had to be clamped to the minimum spacing."""
        x = np.asarray(abscissae, dtype=float)
        if x.shape != np.shape(self.ordinates):
            raise ConstructionError("need one abscissa per ordinate")
        excess = np.diff(x) - MIN_GAP
        clamped = bool(np.any(excess <= 0))
        if clamped:
            warnings.warn("abscissae gaps at or below the minimum spacing were clamped", stacklevel=2)
        excess = np.maximum(excess, 1e-10)
        return np.concatenate([[x[0]], _softplus_inv(excess)]), clamped

    def decode(self, params):
        x = self.nodes(params)
        assert np.all(np.diff(x) > 0)
        spline = schumaker_build(InterpolationData(x, self.ordinates))
        model = CollocationModel(spline, self.forward, self.maturity, self.wings)
        return enforce_first_moment(model)

    def penalty_rows(self, model, strikes, epsilon):
        return penalty_rows_schumaker(model, strikes, epsilon)


@dataclass(frozen=True, eq=False)
class BSplineParameterization:
    """Breakpoints and ``alpha[0]`` are fixed, the increments are free."""

    breakpoints: np.ndarray
    lambda_max: float
    forward: float
    maturity: float
    wings: WingSpec = field(default_factory=WingSpec)
    alpha0: float = 0.0

    def bspline(self, params):
        inc = self.lambda_max * expit(np.asarray(params, dtype=float))
        assert np.all((inc >= 0) & (inc <= self.lambda_max))
        alpha = self.alpha0 + np.concatenate([[0.0], np.cumsum(inc)])
        return QuadraticBSpline(self.breakpoints, alpha)

    def encode(self, bspline):
        """Parameters for ``bspline``; increments on or outside the bounds are
        clamped just inside them, which is reported by the returned flag."""
        inc = bspline.increments
        tiny = 1e-12 * self.lambda_max
        clamped = bool(np.any((inc <= tiny) | (inc >= self.lambda_max - tiny)))
        if clamped:
            warnings.warn("B-spline increments at the bounds were clamped", stacklevel=2)
        ratio = np.clip(inc / self.lambda_max, 1e-12, 1.0 - 1e-12)
        return logit(ratio), clamped

    def decode(self, params):
        spline = self.bspline(params).to_piecewise_quadratic()
        model = CollocationModel(spline, self.forward, self.maturity, self.wings)
        return enforce_first_moment(model)

    def penalty_rows(self, model, strikes, epsilon):
        return penalty_rows_bspline(model.spline, epsilon)


def encode_parameters(source, parameterization):
    """Optimizer parameters for ``source`` (node abscissae for Schumaker, a
    :class:`QuadraticBSpline` for B-splines). Returns ``(params, clamped)``."""
    return parameterization.encode(source)


def decode_parameters(params, parameterization):
    """Moment-enforced :class:`CollocationModel` for ``params``."""
    return parameterization.decode(params)


# ---------------------------------------------------------------------------
# initial guesses


def guess_slopes(market, guess):
    """Total vols ``sigma sqrt(T)`` per strike: ATM vol for ``atm``, the
    smile for ``smile``."""
    sqt = math.sqrt(market.maturity)
    if guess == "atm":
        return np.full(len(market), atm_vol(market) * sqt)
    if guess == "smile":
        return market.vols * sqt
    raise ValueError("unknown guess %r" % guess)


def guess_abscissae(market, guess):
    """Abscissae ``x = (ln K + b^2/2 - ln F) / b`` with the guess slopes.

    Non-increasing abscissae (possible for the smile guess on noisy quotes)
    are repaired by pushing each offender to its predecessor plus the minimum
    gap. Returns ``(x, repaired)``.
    """
    x = np.array(implied_abscissae(market, guess_slopes(market, guess)))
    repaired = False
    for i in range(1, x.size):
        if x[i] < x[i - 1] + MIN_GAP:
            x[i] = x[i - 1] + MIN_GAP
            repaired = True
    return x, repaired


def _bspline_guess(market, config, breakpoints, lambda_max):
    # match value ln F - b^2/2 + b x and slope b at every breakpoint, with
    # increments kept inside [0, lambda_max]
    m = breakpoints.size - 1
    if config.guess == "atm" or breakpoints.size != len(market):
        b_atm = atm_vol(market) * math.sqrt(market.maturity)
        b = np.full(breakpoints.size, b_atm)
        if config.guess == "smile":
            logk = math.log(market.forward) - 0.5 * b_atm**2 + b_atm * breakpoints
            b = np.interp(logk, market.log_strikes, market.vols) * math.sqrt(market.maturity)
    else:
        b = guess_slopes(market, "smile")
    target = np.concatenate([math.log(market.forward) - 0.5 * b * b + b * breakpoints, b])
    # columns: alpha0, then each increment (a unit step in alpha from index k on)
    design = np.zeros((2 * (m + 1), m + 2))
    for k in range(m + 2):
        alpha = np.zeros(m + 2)
        alpha[k:] = 1.0
        pq = QuadraticBSpline(breakpoints, alpha).to_piecewise_quadratic()
        design[: m + 1, k] = pq.ordinates
        design[m + 1 :, k] = pq.knot_slopes
    lower = np.concatenate([[-np.inf], np.zeros(m + 1)])
    upper = np.concatenate([[np.inf], np.full(m + 1, lambda_max)])
    sol = lsq_linear(design, target, bounds=(lower, upper), method="bvls", tol=1e-14)
    return QuadraticBSpline(breakpoints, sol.x[0] + np.concatenate([[0.0], np.cumsum(sol.x[1:])]))


def default_lambda_max(market):
    return 2.0 * float(np.ptp(market.log_strikes))


def breakpoints_for(market, config, guideline_knots=None):
    if config.knots is not None:
        x = np.array(config.knots, dtype=float)
        if np.any(np.diff(x) <= 0):
            raise ConstructionError("explicit knots must be strictly increasing")
        return x
    return build_knots(config.knot_set, market, guideline_knots)


def setup(market, config, guideline_knots=None):
    """Parameterization, initial parameters and flags for a calibration run."""
    wings = config.wings()
    flags = []
    if config.parameterization == "schumaker":
        x, repaired = guess_abscissae(market, config.guess)
        if repaired:
            flags.append("abscissae_repaired")
        par = SchumakerParameterization(market.log_strikes, market.forward, market.maturity, wings)
        params, clamped = par.encode(x)
    else:
        knots = breakpoints_for(market, config, guideline_knots)
        cap = default_lambda_max(market) if config.lambda_max is None else config.lambda_max
        state = _bspline_guess(market, config, knots, cap)
        par = BSplineParameterization(
            knots, cap, market.forward, market.maturity, wings, float(state.coefficients[0])
        )
        params, clamped = par.encode(state)
    if clamped:
        flags.append("parameters_clamped")
    return par, params, tuple(flags)


def initial_guess(market, config, guideline_knots=None):
    """Moment-enforced starting model for ``config``.

    Schumaker: the Lam-variant Schumaker spline through ``(x[j], ln K[j])``.
    B-spline: coefficients matching the same straight-line values and slopes
    at the breakpoints.
    """
    par, params, _ = setup(market, config, guideline_knots)
    return par.decode(params)


# ---------------------------------------------------------------------------
# least squares


def _hash(params):
    return hashlib.sha256(np.ascontiguousarray(params, dtype=float).tobytes()).hexdigest()[:16]


class _Problem:
    def __init__(self, market, config, parameterization):
        self.market = market
        self.config = config
        self.par = parameterization
        self.weights = price_weights(market, config.weighting)
        self.targets = market_prices(market)

    def evaluate(self, params):
        """``(residuals, model)``, or ``(None, None)`` for an infeasible point."""
        try:
            with np.errstate(all="ignore"):
                model = self.par.decode(params)
                r = self.weights * (price_call(model, self.market.strikes) - self.targets)
                if self.config.epsilon > 0:
                    rows = self.par.penalty_rows(model, self.market.strikes, self.config.epsilon)
                    r = np.concatenate([r, rows])
        except (CollocationError, FloatingPointError, OverflowError):
            return None, None
        if not np.all(np.isfinite(r)):
            return None, None
        return r, model

    def jacobian(self, params, r0):
        jac = np.empty((r0.size, params.size))
        for k in range(params.size):
            step = 1e-7 * max(1.0, abs(params[k]))
            p = params.copy()
            p[k] += step
            r, _ = self.evaluate(p)
            if r is None:
                # one-sided the other way when the forward point is infeasible
                p[k] = params[k] - step
                r, _ = self.evaluate(p)
                if r is None:
                    jac[:, k] = 0.0
                    continue
                step = -step
            jac[:, k] = (r - r0) / step
        return jac


def levenberg_marquardt(problem, params, config):
    """Minimize ``||r(p)||^2``.

    Levenberg damping ``mu * max(diag(J^T J)) * I`` with Nielsen's update of
    ``mu``; each step is capped at ``MAX_STEP`` per parameter. An iteration
    ends with an accepted step, so the recorded objective strictly decreases.
    Returns
    ``(params, residuals, model, trace, converged, reason)``.
    """
    p = np.array(params, dtype=float)
    r, model = problem.evaluate(p)
    if r is None:
        raise ConstructionError("objective is not finite at the initial guess")
    obj = float(r @ r)
    records = [TraceRecord(0, obj, model.first_ordinate, _hash(p))]
    jac = problem.jacobian(p, r)
    mu, nu = 1e-3, 2.0
    converged, reason = False, "maximum iterations reached"
    it = 0
    while it < config.max_iterations:
        grad = jac.T @ r
        if np.max(np.abs(grad)) <= config.gradient_tol:
            converged, reason = True, "gradient tolerance"
            break
        hess = jac.T @ jac
        # identity damping: Marquardt's diagonal scaling lets parameters in the
        # flat part of the bound transforms take huge steps and get stuck there
        scale = max(float(np.max(np.diag(hess))), 1e-300)
        eye = np.eye(p.size)
        accepted = False
        while not accepted:
            try:
                step = np.linalg.solve(hess + mu * scale * eye, -grad)
            except np.linalg.LinAlgError:
                step = None
            if step is None or not np.all(np.isfinite(step)):
                mu *= nu
                nu *= 2.0
            else:
                # a long step can park a parameter deep in the flat part of its
                # bound transform, where the gradient vanishes for good
                longest = np.max(np.abs(step))
                if longest > MAX_STEP:
                    step *= MAX_STEP / longest
                if np.linalg.norm(step) <= config.step_tol * (np.linalg.norm(p) + config.step_tol):
                    converged, reason = True, "step tolerance"
                    break
                cand = p + step
                r_new, m_new = problem.evaluate(cand)
                obj_new = math.inf if r_new is None else float(r_new @ r_new)
                predicted = -(step @ (2.0 * grad + hess @ step))
                if obj_new < obj:
                    rho = (obj - obj_new) / predicted if predicted > 0 else 0.0
                    mu *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
                    nu = 2.0
                    accepted = True
                else:
                    mu *= nu
                    nu *= 2.0
            if mu > 1e30:
                reason = "no decrease found (stagnation)"
                break
        if not accepted:
            break
        it += 1
        decrease = obj - obj_new
        p, r, model, obj = cand, r_new, m_new, obj_new
        records.append(TraceRecord(it, obj, model.first_ordinate, _hash(p)))
        if decrease <= config.objective_tol * (obj + decrease):
            converged, reason = True, "objective tolerance"
            break
        jac = problem.jacobian(p, r)
    return p, r, model, IterationTrace(tuple(records)), converged, reason


def vol_rmse(model, market):
    diff = implied_vols(model, market.strikes) - market.vols
    return float(math.sqrt(np.mean(diff * diff)))


def calibrate(market, config, guideline_knots=None):
    """Fit the collocation model to ``market``; see the module docstring."""
    par, params, flags = setup(market, config, guideline_knots)
    problem = _Problem(market, config, par)
    p, r, model, trace, converged, reason = levenberg_marquardt(problem, params, config)
    bspline = par.bspline(p) if isinstance(par, BSplineParameterization) else None
    return CalibratedResult(
        model=model,
        residual_norm=float(np.linalg.norm(r)),
        vol_rmse=vol_rmse(model, market),
        trace=trace,
        converged=converged,
        iterations=len(trace) - 1,
        reason=reason,
        params=p,
        flags=flags,
        bspline=bspline,
    )
