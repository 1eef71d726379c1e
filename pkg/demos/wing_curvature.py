"""Curvature of the exponential-quadratic wings.

The right-wing curvature controls how fast implied variance grows far beyond
the quotes. On the TSLA slice it barely moves the fit but changes the far
right tail a lot; the left-wing curvature has no visible effect at all.
"""

import numpy as np

from expcolloc import CalibrationConfig, calibrate, implied_vols, load_dataset

market = load_dataset("tsla_18m").slice


def fit(c_left=0.0, c_right=0.0):
    config = CalibrationConfig(guess="smile", knot_set="atm", epsilon=1e-2, c_left=c_left, c_right=c_right)
    return calibrate(market, config).model


base, right, left = fit(), fit(c_right=0.2), fit(c_left=-0.2)
v0 = implied_vols(base, market.strikes)
print("market-strike vol change, c_right=0.2: %.2e" % np.max(np.abs(implied_vols(right, market.strikes) - v0)))
print("market-strike vol change, c_left=-0.2: %.2e" % np.max(np.abs(implied_vols(left, market.strikes) - v0)))

# %% total variance across log-moneyness
print("%8s %12s %12s" % ("ln(K/F)", "c_right=0", "c_right=0.2"))
for y in (-2.0, 0.0, 0.5, np.log(700 / market.forward), 1.5, 2.0, 3.0):
    k = [market.forward * np.exp(y)]
    w0 = implied_vols(base, k)[0] ** 2 * market.maturity
    w1 = implied_vols(right, k)[0] ** 2 * market.maturity
    print("%8.3f %12.5f %12.5f" % (y, w0, w1))
