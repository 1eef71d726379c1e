"""Command line interface: ``expcolloc calibrate | price | density | verify``.

Exit codes: 0 success (calibration converged), 1 verification failed,
2 calibration did not converge (best model still written), 64 usage error,
65 configuration or data error, 74 file I/O error.
"""

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict

import numpy as np

from . import __version__
from .calibration import CalibrationConfig, calibrate
from .errors import AccuracyError, CollocationError, SingularDensityError
from .market import MarketDataError, load_dataset, load_market_csv, registry
from .oracle import call_price as oracle_call_price
from .pricer import density, first_moment, implied_vols, price_call
from .serialization import ModelFileError, load_model, save_model

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_NOT_CONVERGED = 2
EXIT_USAGE = 64
EXIT_CONFIG = 65
EXIT_IO = 74


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, "%s: error: %s\n" % (self.prog, message))


def _fmt(v):
    return "" if v is None or not math.isfinite(v) else repr(float(v))


def config_hash(config):
    text = json.dumps(asdict(config), sort_keys=True)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def parse_strikes(text):
    """``"90,100,110"``, ``"lo:hi:n"`` (n evenly spaced strikes) or
    ``"lo:hi:n:log"`` (n log-spaced strikes)."""
    try:
        if ":" in text:
            parts = text.split(":")
            spacing = parts.pop() if len(parts) == 4 else "lin"
            lo, hi, n = parts
            if spacing not in ("lin", "log"):
                raise ValueError
            make = np.geomspace if spacing == "log" else np.linspace
            values = make(float(lo), float(hi), int(n))
        else:
            values = np.array([float(t) for t in text.split(",") if t.strip()])
    except ValueError:
        raise UsageError("bad --strikes %r, expected a,b,c or lo:hi:n[:log]" % text) from None
    if values.size == 0 or np.any(~(values > 0)):
        raise UsageError("strikes must be positive")
    return values


def density_grid(market, points=400):
    """``points`` log-spaced strikes on ``[min K / 3, 3 max K]`` plus the quoted strikes."""
    grid = np.geomspace(market.strikes[0] / 3.0, market.strikes[-1] * 3.0, points)
    return np.unique(np.concatenate([grid, market.strikes]))


def _safe_density(model, strikes):
    try:
        return density(model, strikes)
    except SingularDensityError:
        out = np.full(strikes.shape, np.nan)
        for i, k in enumerate(strikes):
            try:
                out[i] = density(model, k)
            except SingularDensityError:
                pass
        return out


def _write_csv(path, header, columns, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header)
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _load_market(spec):
    names = registry()
    if spec in names:
        ds = load_dataset(spec)
        return spec, ds.slice, ds.guideline_knots
    if os.path.isfile(spec):
        name = os.path.splitext(os.path.basename(spec))[0]
        return name, load_market_csv(spec), None
    raise UsageError("unknown dataset %r (bundled: %s)" % (spec, ", ".join(sorted(
        n for n, d in names.items() if d.slice is not None))))


def cmd_calibrate(args):
    name, market, knots = _load_market(args.data)
    if args.model == "bspline" and args.knots == "guideline" and knots is None:
        print("error: no guideline knots for dataset %r" % name, file=sys.stderr)
        return EXIT_CONFIG
    config = CalibrationConfig(
        parameterization=args.model,
        guess=args.guess,
        knot_set=args.knots,
        epsilon=args.epsilon,
        c_left=args.c_left,
        c_right=args.c_right,
        lambda_max=args.lambda_max,
        max_iterations=args.max_iterations,
        weighting=args.weighting.replace("-", "_"),
    )
    result = calibrate(market, config, knots)
    chash = config_hash(config)
    header = "# dataset=%s config=%s version=%s\n" % (name, chash, __version__)
    os.makedirs(args.out, exist_ok=True)

    metadata = {
        "dataset": name,
        "config_hash": chash,
        "config": asdict(config),
        "converged": result.converged,
        "iterations": result.iterations,
        "reason": result.reason,
        "residual_norm": result.residual_norm,
        "vol_rmse": result.vol_rmse,
        "flags": list(result.flags),
    }
    save_model(os.path.join(args.out, "model.json"), result.model, result.bspline, metadata)

    grid = density_grid(market, args.grid)
    quoted = dict(zip(market.strikes.tolist(), market.vols.tolist()))
    model_vols = implied_vols(result.model, grid)
    _write_csv(
        os.path.join(args.out, "ivcurve.csv"),
        header,
        ["strike", "model_vol", "market_vol"],
        ([_fmt(k), _fmt(v), _fmt(quoted.get(float(k)))] for k, v in zip(grid, model_vols)),
    )
    dens = _safe_density(result.model, grid)
    _write_csv(
        os.path.join(args.out, "density.csv"),
        header,
        ["strike", "density"],
        ([_fmt(k), _fmt(d)] for k, d in zip(grid, dens)),
    )
    _write_csv(
        os.path.join(args.out, "trace.csv"),
        header,
        ["iteration", "objective", "first_ordinate"],
        ([str(r.iteration), _fmt(r.objective), _fmt(r.first_ordinate)] for r in result.trace.records),
    )
    print(
        "converged=%s iterations=%d vol_rmse=%.6g residual_norm=%.6g reason=%s"
        % (result.converged, result.iterations, result.vol_rmse, result.residual_norm, result.reason)
    )
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def _emit(args, header, columns, rows):
    if args.out:
        _write_csv(args.out, header, columns, rows)
    else:
        sys.stdout.write(header + ",".join(columns) + "\n")
        for row in rows:
            sys.stdout.write(",".join(row) + "\n")


def _model_header(args):
    return "# model=%s version=%s\n" % (os.path.basename(args.model_file), __version__)


def cmd_price(args):
    model = load_model(args.model_file)
    k = parse_strikes(args.strikes)
    prices = np.atleast_1d(price_call(model, k))
    vols = implied_vols(model, k)
    rows = ([_fmt(a), _fmt(p), _fmt(v)] for a, p, v in zip(k, prices, vols))
    _emit(args, _model_header(args), ["strike", "call_price", "implied_vol"], rows)
    return EXIT_OK


def cmd_density(args):
    model = load_model(args.model_file)
    k = parse_strikes(args.strikes)
    dens = np.atleast_1d(_safe_density(model, k))
    _emit(args, _model_header(args), ["strike", "density"], ([_fmt(a), _fmt(d)] for a, d in zip(k, dens)))
    return EXIT_OK


def verification_strikes(model, count=50):
    """Strikes ``exp(g(x))`` for ``count`` points ``x`` evenly spread on [-2.5, 2.5]."""
    return np.exp(model.g(np.linspace(-2.5, 2.5, count)))


def cmd_verify(args):
    model = load_model(args.model_file)
    strikes = verification_strikes(model)
    closed = np.atleast_1d(price_call(model, strikes))
    worst, worst_k = 0.0, float(strikes[0])
    for k, c in zip(strikes, closed):
        try:
            q = oracle_call_price(model, k, tol=1e-13)
        except AccuracyError as exc:
            q = exc.estimate
        err = abs(c - q) / max(abs(q), 1e-300)
        if not err <= worst:
            worst, worst_k = err, float(k)
    moment_err = abs(first_moment(model) - model.forward) / model.forward
    ok = worst < args.tol and moment_err < args.tol
    print("max_relative_error=%.3e at strike=%r" % (worst, worst_k))
    print("first_moment_relative_error=%.3e" % moment_err)
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def build_parser():
    parser = _Parser(prog="expcolloc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    cal = sub.add_parser("calibrate", help="calibrate to a market slice and write curves")
    cal.add_argument("--data", required=True, help="bundled dataset name or market CSV path")
    cal.add_argument("--model", choices=("schumaker", "bspline"), default="bspline")
    cal.add_argument("--guess", choices=("atm", "smile"), default="smile")
    cal.add_argument("--knots", choices=("guideline", "smile", "atm"), default="atm")
    cal.add_argument("--epsilon", type=float, default=0.0)
    cal.add_argument("--c-left", type=float, default=0.0)
    cal.add_argument("--c-right", type=float, default=0.0)
    cal.add_argument("--lambda-max", type=float, default=None)
    cal.add_argument("--max-iterations", type=int, default=200)
    cal.add_argument("--weighting", choices=("inverse-vega", "unit"), default="inverse-vega")
    cal.add_argument("--grid", type=int, default=400, help="number of log-spaced curve strikes")
    cal.add_argument("--out", required=True, help="output directory")
    cal.add_argument(
        "--seedless", action="store_true", help="accepted for compatibility; runs are always deterministic"
    )
    cal.set_defaults(func=cmd_calibrate)

    for name, func, helptext in (
        ("price", cmd_price, "call prices and implied vols from a model file"),
        ("density", cmd_density, "risk-neutral density from a model file"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--model-file", required=True)
        p.add_argument("--strikes", required=True, help="a,b,c or lo:hi:n[:log]")
        p.add_argument("--out", default=None, help="CSV path (default: stdout)")
        p.set_defaults(func=func)

    ver = sub.add_parser("verify", help="check closed-form prices against quadrature")
    ver.add_argument("--model-file", required=True)
    ver.add_argument("--tol", type=float, default=1e-8)
    ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_IO
    except (ModelFileError, MarketDataError, CollocationError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
