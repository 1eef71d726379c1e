"""Initial guesses and the moment shift on the second Jaeckel example.

Both guesses map each market strike to an abscissa through a straight line in
the normal variable, with either the ATM total vol (flat guess) or each
strike's own total vol (smile guess). The model is then shifted so that its
first moment equals the forward; for the flat guess that shift is zero up to
rounding, because the flat-vol line is already lognormal.
"""

import numpy as np

from expcolloc import CalibrationConfig, atm_vol, build_knots, guideline_knots, initial_guess, load_dataset

market = load_dataset("jackel_case2").slice
print("forward %.4g, maturity %.10g years, %d strikes, ATM vol %.15g"
      % (market.forward, market.maturity, len(market), atm_vol(market)))

# %% abscissae of the three knot sets
guide = build_knots("guideline", market, guideline_knots("jackel_case2"))
smile = build_knots("smile", market)
atm = build_knots("atm", market)
print("%12s %12s %12s %12s" % ("moneyness", "guideline", "smile", "atm"))
for row in zip(market.strikes, guide, smile, atm):
    print("%12.6g %12.6f %12.6f %12.6f" % row)

# %% moment shift of each guess
for kind in ("schumaker", "bspline"):
    for guess in ("atm", "smile"):
        config = CalibrationConfig(parameterization=kind, guess=guess, knot_set="guideline")
        model = initial_guess(market, config, guideline_knots("jackel_case2"))
        print("%-9s %-5s guess: moment shift %+.6f, first ordinate %.6f"
              % (kind, guess, model.moment_shift, model.first_ordinate))
