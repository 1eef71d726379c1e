"""Arbitrage-free smile interpolation by exponential spline collocation.

The asset price is modelled as ``exp(g(X))`` with ``X`` standard normal and
``g`` a monotone C1 quadratic spline, either a shape-preserving Schumaker
interpolant or a clamped quadratic B-spline. Call prices, the first moment
and the implied density are available in closed form.
"""

__version__ = "0.1.0"

from .bspline import QuadraticBSpline, build_knots, from_increments, implied_abscissae
from .calibration import (
    CalibratedResult,
    CalibrationConfig,
    IterationTrace,
    calibrate,
    decode_parameters,
    encode_parameters,
    initial_guess,
    penalty_bspline,
    penalty_schumaker,
    residuals,
)
from .errors import (
    AccuracyError,
    CollocationError,
    ConstructionError,
    DomainError,
    RangeError,
    SingularDensityError,
)
from .market import (
    Dataset,
    MarketSlice,
    atm_vol,
    counterexample_points,
    guideline_knots,
    load_dataset,
    load_market_csv,
    registry,
)
from .pricer import (
    CollocationModel,
    WingSpec,
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
from .special import black_scholes_price, black_scholes_vega, erfi, implied_vol, integrate
from .spline import (
    InterpolationData,
    MonotonicityReport,
    PiecewiseQuadratic,
    audit_monotonicity,
    lam_harmonic_derivatives,
    schumaker_build,
    schumaker_derivatives,
)
