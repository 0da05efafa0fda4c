"""
Dynamic stick-breaking weights and their prior moments
======================================================

Each mixture component carries an AR(1) state per time point. A probit
link turns the states into stick proportions, and the sticks give the
weights. This script draws a few ladders from the prior, checks how fast
the leftover mass vanishes, and compares the closed-form prior moments of
a cell probability with a brute-force simulation.
"""

import numpy as np

from dynparafac.distributions import make_rng
from dynparafac.model import CategoricalSchema, DirichletHyper, prior_moments
from dynparafac.sticks import StateHyper, sample_prior_trajectory, weights_from_states

rng = make_rng(2024)

# the default simulation setting: mu=0, phi=0.8, sd_eps=0.1, sd_eta=0.8
hyper = StateHyper(mu=0.0, phi=0.8, sigma2_eps=0.1 ** 2, sigma2_eta=0.8 ** 2)
traj = sample_prior_trajectory(hyper, T=5, H=12, rng=rng)
nu, rem = weights_from_states(traj.W)

np.set_printoptions(precision=3, suppress=True)
print("weights of the first six components, one row per time:")
print(nu[:, :6])
print("mass left beyond 12 components:", rem)

# %%
# How much mass lies past the first 100 components, averaged over the prior?
traj = sample_prior_trajectory(hyper, T=10, H=100 * 2000, rng=rng)
_, rem = weights_from_states(traj.W.reshape(10, 2000, 100))
print(f"\nmean leftover mass after 100 components: {rem.mean():.2e}")

# %%
# Prior mean, variance and lag-1 covariance of one cell probability.
schema = CategoricalSchema([2, 3])
dirichlet = DirichletHyper.symmetric(schema, 1.0)
mu, phi, sd_eta, sd_eps = 0.0, 0.5, 0.5, 0.3
rep = prior_moments(dirichlet, "probit", mu, phi, sd_eta, sd_eps, (0, 0), (0, 0), lag=1)
print("\nclosed form:", {k: round(v, 5) for k, v in rep.as_dict().items()
                         if k in ("expectation", "variance", "covariance")})

# brute force: atoms from the Dirichlet, ladders from the state equations
n, H = 20000, 60
a0 = mu / (1 - phi) + sd_eta / np.sqrt(1 - phi ** 2) * rng.standard_normal((n, H))
a1 = mu + phi * a0 + sd_eta * rng.standard_normal((n, H))
w0, _ = weights_from_states(a0 + sd_eps * rng.standard_normal((n, H)))
w1, _ = weights_from_states(a1 + sd_eps * rng.standard_normal((n, H)))
psi = rng.dirichlet([1, 1], size=(n, H))[..., 0] * rng.dirichlet([1, 1, 1], size=(n, H))[..., 0]
p0, p1 = (w0 * psi).sum(1), (w1 * psi).sum(1)
print("simulation: ", {"expectation": round(p0.mean(), 5), "variance": round(p0.var(), 5),
                      "covariance": round(np.cov(p0, p1)[0, 1], 5)})
