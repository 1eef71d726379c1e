"""JSON model files.

Layout (all numbers are JSON floats written with Python's shortest
round-trip repr, so reading a file back reproduces the model bit for bit)::

    {
      "format": "expcolloc-model",
      "version": "<package version>",
      "forward": F, "maturity": T, "moment_shift": delta,
      "wings": {"c_left": .., "c_right": .., "left_slope": .. or null,
                "right_slope": .. or null},
      "knots": [x0, ..., xM],
      "segments": {"a": [...], "b": [...], "c": [...]},
      "a_end": g(xM),
      "bspline": {"breakpoints": [...], "coefficients": [...]} or null,
      "metadata": {free-form strings, e.g. dataset and config hash}
    }
"""

import json

import numpy as np

from . import __version__
from .pricer import CollocationModel, WingSpec
from .spline import PiecewiseQuadratic

FORMAT = "expcolloc-model"


class ModelFileError(ValueError):
    """Model file that cannot be read or does not follow the layout."""


def _floats(arr):
    return [float(v) for v in np.asarray(arr, dtype=float)]


def model_to_dict(model, bspline=None, metadata=None):
    sp = model.spline
    w = model.wings
    return {
        "format": FORMAT,
        "version": __version__,
        "forward": model.forward,
        "maturity": model.maturity,
        "moment_shift": model.moment_shift,
        "wings": {
            "c_left": w.c_left,
            "c_right": w.c_right,
            "left_slope": w.left_slope,
            "right_slope": w.right_slope,
        },
        "knots": _floats(sp.knots),
        "segments": {"a": _floats(sp.a), "b": _floats(sp.b), "c": _floats(sp.c)},
        "a_end": sp.a_end,
        "bspline": None
        if bspline is None
        else {
            "breakpoints": _floats(bspline.breakpoints),
            "coefficients": _floats(bspline.coefficients),
        },
        "metadata": dict(metadata or {}),
    }


def model_from_dict(d):
    try:
        if d.get("format") != FORMAT:
            raise ModelFileError("not a model file (format=%r)" % d.get("format"))
        seg = d["segments"]
        spline = PiecewiseQuadratic(d["knots"], seg["a"], seg["b"], seg["c"], d["a_end"])
        wings = WingSpec(**d["wings"])
        return CollocationModel(
            spline, d["forward"], d["maturity"], wings, float(d.get("moment_shift", 0.0))
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise ModelFileError("malformed model file: %s" % exc) from None


def dumps_model(model, bspline=None, metadata=None):
    return json.dumps(model_to_dict(model, bspline, metadata), indent=2) + "\n"


def save_model(path, model, bspline=None, metadata=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_model(model, bspline, metadata))


def load_model(path):
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFileError("%s: invalid JSON: %s" % (path, exc)) from None
    if not isinstance(d, dict):
        raise ModelFileError("%s: expected a JSON object" % path)
    return model_from_dict(d)
