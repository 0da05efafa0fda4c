"""Joint-distribution ("getting it right") check of the full sweep.

Two ways of drawing (parameters, data) from the joint prior:

* marginal-conditional: parameters from the prior, then data;
* successive-conditional: alternate one sampler sweep with a fresh
  draw of labels and data given the current parameters.

If every update leaves its full conditional invariant, both produce the
same distribution of any test function. :func:`geweke_test` compares
their means with z-scores whose standard errors use batch means for the
(autocorrelated) successive-conditional chain.
"""

from dataclasses import dataclass

import numpy as np

from .data_io import Dataset, ObservationBlock
from .distributions import make_rng, sample_dirichlet, sample_inverse_gamma
from .links import get_link
from .model import CategoricalSchema
from .sampler import ChainConfig, ObservedData, SamplerState, sweep
from .sticks import StateTrajectory, extend_to_cover

MONITORS = ("mu", "phi", "log_sigma2_eps", "log_sigma2_eta", "nu_first", "nu_last",
            "g_alpha_11", "psi_11", "kstar")


@dataclass
class GewekeResult:
    names: tuple
    forward_mean: np.ndarray
    chain_mean: np.ndarray
    z: np.ndarray

    def max_abs_z(self):
        return float(np.max(np.abs(self.z)))


def prior_state(T, config, dir_hyper, rng):
    """Hyperparameters from their priors and an empty component ladder."""
    mu = config.mu0 + np.sqrt(config.sigma2_0) * rng.standard_normal()
    phi = rng.uniform(-1.0, 1.0)
    s2e = float(sample_inverse_gamma(config.m_eps / 2, config.S_eps / 2, rng))
    s2n = float(sample_inverse_gamma(config.m_eta / 2, config.S_eta / 2, rng))
    atoms = [np.zeros((0, a.size)) for a in dir_hyper.concentrations]
    return SamplerState(s=np.zeros(0, dtype=np.int64), log_u=np.zeros(0), z=None,
                        alpha=np.zeros((T, 0)), W=np.zeros((T, 0)), atoms=atoms,
                        mu=mu, phi=phi, sigma2_eps=s2e, sigma2_eta=s2n)


def regenerate(state, schema, n_t, dir_hyper, link, rng):
    """Draw labels and responses given the parameters (mutates ``state``).

    Unrepresented tail components are drawn from the prior, exactly as
    the sampler treats them, and only as many as the labels need.
    """
    T = len(n_t)
    tid = np.repeat(np.arange(T), n_t)
    U = rng.random(tid.size)
    u_need = np.ones(T)
    np.minimum.at(u_need, tid, 1.0 - U)
    u_need = np.maximum(u_need, np.nextafter(0.0, 1.0))
    traj, k = extend_to_cover(StateTrajectory(state.alpha, state.W), state.hyper, u_need, rng, link)
    k = max(k, state.K)
    if traj.H < k:
        traj = StateTrajectory(state.alpha, state.W)
    n_new = k - state.K
    if n_new:
        state.atoms = [np.concatenate([a, sample_dirichlet(c, rng, size=n_new)])
                       for a, c in zip(state.atoms, dir_hyper.concentrations)]
    state.alpha, state.W = traj.alpha[:, :k], traj.W[:, :k]
    link = get_link(link)
    log_rest = np.concatenate([np.zeros((T, 1)), np.cumsum(link.log_sf(state.W), axis=1)], axis=1)
    cum = 1.0 - np.exp(log_rest[:, 1:])
    s = (cum[tid] <= U[:, None]).sum(axis=1)
    state.s = s
    state.log_u = np.zeros(s.size)
    x = np.empty((s.size, schema.p), dtype=np.int64)
    for j, a in enumerate(state.atoms):
        c = np.cumsum(a[s], axis=1)
        x[:, j] = np.minimum((c < rng.random(s.size)[:, None]).sum(axis=1), schema.levels[j] - 1)
    blocks, start = [], 0
    for n in n_t:
        blocks.append(ObservationBlock(x[start:start + n], np.zeros((n, schema.p), bool)))
        start += n
    return Dataset(schema, blocks)


def monitor(state, link):
    """Test functions; all have finite moments under the prior (``alpha`` itself
    does not once ``phi`` can approach 1, so it enters through the link)."""
    link = get_link(link)
    return np.array([
        state.mu, state.phi, np.log(state.sigma2_eps), np.log(state.sigma2_eta),
        float(link.cdf(state.W[0, 0])), float(link.cdf(state.W[-1, 0])),
        float(link.cdf(state.alpha[0, 0])), state.atoms[0][0, 0], state.kstar,
    ])


def batch_se(x, n_batches=50):
    """Standard error of the mean from non-overlapping batch means."""
    x = np.asarray(x, dtype=float)
    b = x.shape[0] // n_batches
    means = x[:b * n_batches].reshape(n_batches, b, *x.shape[1:]).mean(axis=1)
    return means.std(axis=0, ddof=1) / np.sqrt(n_batches)


def default_config(seed=0):
    """Priors for the check.

    ``mu ~ N(0.5, 0.01)`` keeps ``mu`` positive, so when ``phi`` nears 1
    the stationary state mean runs off to ``+inf`` (all weight on the first
    component) rather than ``-inf`` (no representable ladder). Wider state
    variances let the joint chain cross the ``phi`` range within a few
    thousand cycles; with the default IG(2.5, 0.025) variances it crawls
    along the ``alpha ~ mu / (1 - phi)`` ridge near ``phi = 1``.
    """
    return ChainConfig(iterations=1, burn_in=0, seed=seed, mu0=0.5, sigma2_0=0.01,
                       S_eps=1.0, S_eta=1.0)


def geweke_test(levels=(2, 3), n_t=(4, 4, 4), cycles=10000, seed=0, config=None):
    """Run both simulators for ``cycles`` draws and return the z-scores."""
    schema = CategoricalSchema(list(levels))
    n_t = list(n_t)
    config = config or default_config(seed)
    dir_hyper = config.dirichlet_hyper(schema)
    link = get_link(config.link)
    rng_f = make_rng(seed, 1)
    rng_c = make_rng(seed, 2)

    fwd = np.empty((cycles, len(MONITORS)))
    for i in range(cycles):
        st = prior_state(len(n_t), config, dir_hyper, rng_f)
        regenerate(st, schema, n_t, dir_hyper, link, rng_f)
        fwd[i] = monitor(st, link)

    chain = np.empty((cycles, len(MONITORS)))
    st = prior_state(len(n_t), config, dir_hyper, rng_c)
    ds = regenerate(st, schema, n_t, dir_hyper, link, rng_c)
    for i in range(cycles):
        sweep(st, ObservedData(ds), config, dir_hyper, link, rng_c, i)
        ds = regenerate(st, schema, n_t, dir_hyper, link, rng_c)
        chain[i] = monitor(st, link)

    se = np.sqrt(fwd.var(axis=0, ddof=1) / cycles + batch_se(chain) ** 2)
    z = (chain.mean(axis=0) - fwd.mean(axis=0)) / se
    return GewekeResult(MONITORS, fwd.mean(axis=0), chain.mean(axis=0), z)
