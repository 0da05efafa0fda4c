"""
Forecasting the next wave's margins
===================================

Fit the dynamic model to the first five of six simulated waves. Then
push every posterior draw one step forward through the state equations
and simulate a table the size of the held-out wave. Forecast two-way
margins are scored with absolute deviation (AD) and mean absolute
percentage error (MAPE). The yardstick is a product of smoothed marginals
from the last fitted wave.
"""

import numpy as np

from dynparafac import (ChainConfig, SimulationSpec, forecast_table, generate_model_based,
                        independence_baseline, predictive_criteria, run_chain)
from dynparafac.experiments import independence_forecast, tabulate

spec = SimulationSpec(T=6, levels=[3] * 6, n_t=[120, 110, 150, 80, 100, 120], seed=3)
data, _ = generate_model_based(spec)
fitted, held = data.subset(range(5)), data.subset([5])

draws = run_chain(fitted, ChainConfig(seed=3, iterations=1500, burn_in=500, thin=5))

margins = [(j, k) for j in range(spec.schema.p) for k in range(j + 1, spec.schema.p)]
n_future = int(held.n_t[0])
reps = forecast_table(draws, horizon=1, n_future=n_future, margins=margins, seed=3)
indep = independence_forecast(independence_baseline(fitted.subset([4])), n_future, margins,
                              draws.n_draws, seed=3)

x, mask, _ = held.stacked()
scores = {"dynamic": [], "independence": []}
for m in margins:
    obs = tabulate(x, mask, m, spec.schema.levels)
    scores["dynamic"].append(predictive_criteria(reps[m], obs))
    scores["independence"].append(predictive_criteria(indep[m], obs))

# %%
print(f"{len(margins)} two-way margins, {n_future} respondents in the held-out wave")
for name, crit in scores.items():
    ad = np.mean([c.mean_ad for c in crit])
    mape = np.mean([c.mean_mape for c in crit])
    print(f"{name:>12}: AD {ad:6.1f}   MAPE {mape:.3f}")
