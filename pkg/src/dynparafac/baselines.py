"""Comparison models: the static DP mixture of product multinomials and independence.

The static model is the time-free special case: weights come from
``V_h ~ Beta(1, alpha)`` sticks instead of linked Gaussian states. It is
fit by the same slice sampler, sharing the atom and label updates.
"""

from dataclasses import dataclass, replace

import numpy as np

from .data_io import Dataset
from .distributions import make_rng, sample_beta, sample_dirichlet
from .draws import PosteriorDraws
from .sampler import (ConfigurationError, NumericalAbort, ObservedData, slice_labels,
                      update_atoms)
from .model import DirichletHyper

EXTEND_BLOCK = 10


@dataclass
class StaticDXConfig:
    alpha: float = 1.0  # DP concentration (starting value when alpha_prior is set)
    alpha_prior: tuple = None  # (shape, rate) of a Gamma hyperprior, or None for fixed
    dirichlet: object = 1.0
    iterations: int = 6000
    burn_in: int = 2000
    thin: int = 5
    seed: int = 0
    stream: int = 0
    k0: int = 10

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigurationError("DP concentration must be positive")
        if self.alpha_prior is not None:
            a, b = self.alpha_prior
            if not (a > 0 and b > 0):
                raise ConfigurationError("Gamma hyperprior needs positive shape and rate")
        if self.iterations < 1 or not 0 <= self.burn_in < self.iterations:
            raise ConfigurationError("need 0 <= burn_in < iterations")
        if self.thin < 1 or self.k0 < 1:
            raise ConfigurationError("thin and k0 must be >= 1")

    def dirichlet_hyper(self, schema):
        if np.isscalar(self.dirichlet):
            return DirichletHyper.symmetric(schema, float(self.dirichlet))
        return DirichletHyper(self.dirichlet)


def _log_ladder(V):
    """Log weights and log remainder of a stick vector."""
    log_rest = np.concatenate([[0.0], np.cumsum(np.log1p(-V))])
    return np.log(V) + log_rest[:-1], log_rest[-1]


def update_sticks(s, K, alpha, rng):
    """V_h | s ~ Beta(1 + n_h, alpha + sum_{l>h} n_l) for h < K."""
    n = np.bincount(s, minlength=K)[:K].astype(float)
    above = n[::-1].cumsum()[::-1] - n
    return sample_beta(1.0 + n, alpha + above, rng)


def update_concentration(V, alpha_prior, rng):
    """Gamma full conditional of alpha given the represented sticks."""
    a, b = alpha_prior
    k = V.size
    rate = b - np.log1p(-V).sum()
    return float(rng.gamma(a + k, 1.0 / rate))


def fit_static_dx(dataset, config):
    """Slice-sampled DP mixture of product multinomials for one wave."""
    if dataset.T != 1:
        raise ValueError("fit_static_dx takes a single wave")
    data = ObservedData(dataset)
    dir_hyper = config.dirichlet_hyper(dataset.schema)
    rng = make_rng(config.seed, config.stream)
    alpha = config.alpha
    s = rng.integers(0, config.k0, size=data.N)
    atoms = None
    weights, remainder, atom_draws, kstar_trace = [], [], [], []
    for it in range(config.iterations):
        K = int(s.max()) + 1 if data.N else 0
        # same step-1 update as the dynamic sampler (the state only needs labels)
        atoms = update_atoms(_Labels(s), data, dir_hyper, rng, K)
        V = update_sticks(s, K, alpha, rng)
        if config.alpha_prior is not None:
            alpha = update_concentration(V, config.alpha_prior, rng)
        log_nu, log_rem = _log_ladder(V)
        log_u = log_nu[s] + np.log(np.maximum(rng.random(data.N), np.nextafter(0.0, 1.0)))
        min_log_u = log_u.min() if data.N else 0.0
        if log_rem >= min_log_u:
            # extend in blocks of prior sticks, then keep just enough of them
            while log_rem >= min_log_u:
                V = np.concatenate([V, sample_beta(1.0, alpha, rng, size=EXTEND_BLOCK)])
                log_nu, log_rem = _log_ladder(V)
            rest = np.cumsum(np.log1p(-V))
            k = int(np.argmax(rest < min_log_u)) + 1
            n_new = k - K
            V = V[:k]
            log_nu, log_rem = _log_ladder(V)
            atoms = [np.concatenate([a, sample_dirichlet(c, rng, size=n_new)])
                     for a, c in zip(atoms, dir_hyper.concentrations)]
        if not np.all(np.isfinite(log_nu)):
            raise NumericalAbort(it, "stick weights")
        s = slice_labels(log_nu[None, :], log_u, atoms, data, rng)
        kstar_trace.append(int(s.max()) + 1 if data.N else 0)
        if it >= config.burn_in and (it - config.burn_in + 1) % config.thin == 0:
            # keep the represented ladder; its remainder is the mass beyond it
            weights.append(np.exp(log_nu)[None, :])
            remainder.append(np.array([np.exp(log_rem)]))
            atom_draws.append([a.copy() for a in atoms])
    return PosteriorDraws(
        schema=dataset.schema, kind="static", weights=weights, remainder=remainder,
        atoms=atom_draws, chain=np.full(len(weights), config.stream),
        dirichlet=list(dir_hyper.concentrations),
        diagnostics={"kstar": np.array(kstar_trace)})


class _Labels:
    """Minimal stand-in for the sampler state consumed by :func:`update_atoms`."""

    def __init__(self, s):
        self.s = s

    @property
    def kstar(self):
        return int(self.s.max()) + 1 if self.s.size else 0


def fit_static_dx_by_time(dataset, config):
    """Fit every wave independently and stack the fits into one draw set.

    Wave ``t`` uses generator stream ``config.stream + t``. The stacked
    draw ``i`` puts wave ``t``'s components in their own block of columns
    (zero weight at the other times), so time-indexed summaries such as
    :meth:`PosteriorDraws.rho` work unchanged.
    """
    fits = [fit_static_dx(dataset.subset([t]), replace(config, stream=config.stream + t))
            for t in range(dataset.T)]
    T = dataset.T
    weights, remainder, atoms = [], [], []
    for i in range(fits[0].n_draws):
        ks = [f.weights[i].shape[1] for f in fits]
        w = np.zeros((T, sum(ks)))
        start = 0
        for t, k in enumerate(ks):
            w[t, start:start + k] = fits[t].weights[i][0]
            start += k
        weights.append(w)
        remainder.append(np.array([f.remainder[i][0] for f in fits]))
        atoms.append([np.concatenate([f.atoms[i][j] for f in fits])
                      for j in range(dataset.schema.p)])
    return PosteriorDraws(
        schema=dataset.schema, kind="static", weights=weights, remainder=remainder,
        atoms=atoms, chain=np.full(len(weights), config.stream), dirichlet=fits[0].dirichlet,
        diagnostics={f"wave{t}": f.diagnostics for t, f in enumerate(fits)})


def independence_baseline(dataset):
    """Per-variable marginals with add-one smoothing, pooled over the given waves.

    Returns a list of probability vectors, one per variable. The product
    of these is the independence pmf.
    """
    if not isinstance(dataset, Dataset):
        raise TypeError("independence_baseline expects a Dataset")
    x, mask, _ = dataset.stacked()
    out = []
    for j, d in enumerate(dataset.schema.levels):
        col = x[~mask[:, j], j]
        counts = np.bincount(col, minlength=d).astype(float) + 1.0
        out.append(counts / counts.sum())
    return out
