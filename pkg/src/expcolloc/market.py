"""Market slices, bundled datasets and the CSV reader.

Input CSV layout::

    # free comment lines
    forward=356.73 maturity=1.59178
    strike,vol            (or: moneyness,vol  -- strikes are then moneyness * forward)
    20,1.21744983334323
    ...

Rows are sorted by strike on load; duplicate strikes are rejected.
"""

import math
import warnings
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import ConstructionError


class MarketDataError(ValueError):
    """Malformed or inconsistent market data file."""


@dataclass(frozen=True, eq=False)
class MarketSlice:
    """One expiry: forward, maturity (years), strikes and Black implied vols."""

    forward: float
    maturity: float
    strikes: np.ndarray
    vols: np.ndarray

    def __post_init__(self):
        k = np.array(self.strikes, dtype=float)
        v = np.array(self.vols, dtype=float)
        if not (self.forward > 0 and self.maturity > 0):
            raise ConstructionError("forward and maturity must be positive")
        if k.ndim != 1 or k.shape != v.shape or k.size == 0:
            raise ConstructionError("strikes and vols must be equal-length 1-d arrays")
        if np.any(k <= 0) or np.any(v <= 0):
            raise ConstructionError("strikes and vols must be positive")
        if np.any(np.diff(k) <= 0):
            raise ConstructionError("strikes must be strictly increasing")
        k.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "forward", float(self.forward))
        object.__setattr__(self, "maturity", float(self.maturity))
        object.__setattr__(self, "strikes", k)
        object.__setattr__(self, "vols", v)

    @property
    def log_strikes(self):
        return np.log(self.strikes)

    def __len__(self):
        return self.strikes.size


def atm_vol(market):
    """At-the-money vol from a quadratic in log-strike through the three
    strikes nearest the forward. A quoted strike equal to the forward returns
    its vol unchanged.
    """
    logk = market.log_strikes
    logf = math.log(market.forward)
    hit = np.flatnonzero(np.abs(market.strikes - market.forward) <= 1e-14 * market.forward)
    if hit.size:
        return float(market.vols[hit[0]])
    order = np.argsort(np.abs(logk - logf), kind="stable")
    if order.size < 3:
        warnings.warn("fewer than 3 strikes, using the nearest vol as ATM vol", stacklevel=2)
        return float(market.vols[order[0]])
    idx = np.sort(order[:3])
    xs, ys = logk[idx], market.vols[idx]
    # Lagrange form of the interpolating quadratic
    total = 0.0
    for i in range(3):
        w = 1.0
        for j in range(3):
            if j != i:
                w *= (logf - xs[j]) / (xs[i] - xs[j])
        total += w * ys[i]
    return float(total)


def _parse_header(line, lineno):
    meta = {}
    for tok in line.replace(",", " ").split():
        if "=" not in tok:
            raise MarketDataError("line %d: expected key=value, got %r" % (lineno, tok))
        key, val = tok.split("=", 1)
        try:
            meta[key.strip().lower()] = float(val)
        except ValueError:
            raise MarketDataError("line %d: bad number %r" % (lineno, val)) from None
    return meta


def parse_market_csv(text):
    """Parse the market CSV layout described in the module docstring."""
    meta, columns, rows = None, None, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if meta is None:
            meta = _parse_header(line, lineno)
            continue
        if columns is None:
            columns = [c.strip().lower() for c in line.split(",")]
            if len(columns) != 2 or columns[1] != "vol" or columns[0] not in ("strike", "moneyness"):
                raise MarketDataError(
                    "line %d: expected 'strike,vol' or 'moneyness,vol', got %r" % (lineno, line)
                )
            continue
        cells = line.split(",")
        try:
            if len(cells) != 2:
                raise ValueError
            rows.append((float(cells[0]), float(cells[1]), lineno))
        except ValueError:
            raise MarketDataError("line %d: malformed row %r" % (lineno, line)) from None
    if meta is None or columns is None or not rows:
        raise MarketDataError("no data: need a forward/maturity line, a column header and rows")
    for key in ("forward", "maturity"):
        if key not in meta:
            raise MarketDataError("header is missing %s=<value>" % key)
    forward = meta["forward"]
    rows.sort(key=lambda r: r[0])
    strikes = np.array([r[0] for r in rows])
    if columns[0] == "moneyness":
        strikes = strikes * forward
    dup = np.flatnonzero(np.diff(strikes) <= 0)
    if dup.size:
        raise MarketDataError(
            "duplicate strike %r (line %d)" % (float(strikes[dup[0]]), rows[dup[0] + 1][2])
        )
    try:
        return MarketSlice(forward, meta["maturity"], strikes, np.array([r[1] for r in rows]))
    except ConstructionError as exc:
        raise MarketDataError(str(exc)) from None


def load_market_csv(path):
    with open(path, encoding="utf-8") as fh:
        return parse_market_csv(fh.read())


def _read_columns(text):
    header, rows = None, []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if header is None:
            header = [c.strip() for c in line.split(",")]
            continue
        rows.append([float(c) for c in line.split(",")])
    arr = np.array(rows, dtype=float)
    return {name: arr[:, i] for i, name in enumerate(header)}


def _data_text(name):
    return resources.files("expcolloc").joinpath("data").joinpath(name).read_text(encoding="utf-8")


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    slice: MarketSlice = None
    guideline_knots: np.ndarray = None
    points: dict = field(default=None)


def guideline_knots(name):
    """Bundled guideline B-spline knots for a dataset, or None."""
    ds = registry().get(name)
    return None if ds is None else ds.guideline_knots


def counterexample_points():
    """``(x, y)`` arrays of the monotone data that defeats the original Schumaker slopes."""
    cols = _read_columns(_data_text("schumaker_counterexample.csv"))
    return cols["x"], cols["y"]


def registry():
    """Bundled datasets keyed by name."""
    knots = _read_columns(_data_text("jackel_case2_guideline_knots.csv"))["x"]
    x, y = counterexample_points()
    return {
        "jackel_case1": Dataset("jackel_case1", parse_market_csv(_data_text("jackel_case1.csv"))),
        "jackel_case2": Dataset(
            "jackel_case2", parse_market_csv(_data_text("jackel_case2.csv")), knots
        ),
        "tsla_18m": Dataset("tsla_18m", parse_market_csv(_data_text("tsla_jan2020.csv"))),
        "schumaker_counterexample": Dataset(
            "schumaker_counterexample", points={"x": x, "y": y}
        ),
    }


def load_dataset(name):
    """Look up a bundled market dataset by name."""
    ds = registry().get(name)
    if ds is None or ds.slice is None:
        raise KeyError("unknown market dataset %r" % name)
    return ds
