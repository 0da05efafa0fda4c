"""Parafac mixture of product multinomials with time-varying weights.

The joint pmf at time ``t`` is ``sum_h nu[t, h] * prod_j psi[h]^(j)``.
Nothing here materializes the full ``d_1 x ... x d_p`` tensor; cells,
marginals and pairwise joints are evaluated lazily from the atoms.

Level indices are 0-based throughout the Python API.
"""

from dataclasses import dataclass, field
from itertools import combinations
from typing import NamedTuple, Sequence

import numpy as np

from .links import ProbitLink, get_link
from .sticks import StateHyper


@dataclass(frozen=True)
class CategoricalSchema:
    """Number of variables and the level count of each."""

    levels: tuple

    def __init__(self, levels: Sequence[int]):
        levels = tuple(int(d) for d in levels)
        if len(levels) < 1:
            raise ValueError("schema needs at least one variable")
        if any(d < 2 for d in levels):
            raise ValueError(f"every variable needs >= 2 levels, got {levels}")
        object.__setattr__(self, "levels", levels)

    @property
    def p(self):
        return len(self.levels)

    def n_cells(self):
        return int(np.prod(self.levels, dtype=float))

    def pairs(self):
        return list(combinations(range(self.p), 2))


@dataclass(frozen=True)
class DirichletHyper:
    """Per-variable Dirichlet concentration vectors for the atoms."""

    concentrations: tuple

    def __init__(self, concentrations):
        vecs = tuple(np.array(a, dtype=float) for a in concentrations)
        for a in vecs:
            if a.ndim != 1 or a.size < 2 or np.any(~(a > 0)):
                raise ValueError("Dirichlet concentrations must be positive vectors")
            a.setflags(write=False)
        object.__setattr__(self, "concentrations", vecs)

    @classmethod
    def symmetric(cls, schema, a=1.0):
        return cls([np.full(d, float(a)) for d in schema.levels])

    @property
    def schema(self):
        return CategoricalSchema([a.size for a in self.concentrations])

    def totals(self):
        return np.array([a.sum() for a in self.concentrations])


def _check_probability_vectors(atoms_j, tol=1e-12):
    if np.any(atoms_j < 0) or np.any(np.abs(atoms_j.sum(axis=1) - 1.0) > tol):
        raise ValueError("atoms must be probability vectors")


class ParafacMixture:
    """Atoms shared over time plus one weight ladder per time.

    Parameters
    ----------
    schema : CategoricalSchema
    atoms : list of ndarray
        ``atoms[j]`` has shape ``(k, d_j)``; row ``h`` is component ``h``'s
        probability vector for variable ``j``.
    weights : ndarray, shape (T, k)
    remainder : ndarray, shape (T,), optional
        Mass beyond the ``k`` represented components. Defaults to
        ``1 - weights.sum(1)``.
    """

    def __init__(self, schema, atoms, weights, remainder=None):
        self.schema = schema
        weights = np.atleast_2d(np.array(weights, dtype=float))
        atoms = [np.array(a, dtype=float) for a in atoms]
        if len(atoms) != schema.p:
            raise ValueError("need one atom array per variable")
        k = weights.shape[1]
        for a, d in zip(atoms, schema.levels):
            if a.shape != (k, d):
                raise ValueError(f"atom array of shape {a.shape}, expected {(k, d)}")
            _check_probability_vectors(a)
        if np.any(weights < 0) or np.any(weights > 1):
            raise ValueError("weights must lie in [0, 1]")
        if remainder is None:
            remainder = np.clip(1.0 - weights.sum(axis=1), 0.0, 1.0)
        remainder = np.asarray(remainder, dtype=float).reshape(weights.shape[0])
        if np.any(np.abs(weights.sum(axis=1) + remainder - 1.0) > 1e-10):
            raise ValueError("weights plus remainder must sum to one")
        for arr in atoms + [weights, remainder]:
            arr.setflags(write=False)
        self.atoms = atoms
        self.weights = weights
        self.remainder = remainder

    @property
    def T(self):
        return self.weights.shape[0]

    @property
    def k(self):
        return self.weights.shape[1]

    def _check_t(self, t):
        if not 0 <= t < self.T:
            raise IndexError(f"time index {t} outside 0..{self.T - 1}")

    def _check_level(self, j, level):
        if not 0 <= j < self.schema.p:
            raise IndexError(f"variable index {j} outside 0..{self.schema.p - 1}")
        if not 0 <= level < self.schema.levels[j]:
            raise IndexError(f"level {level} outside 0..{self.schema.levels[j] - 1} for variable {j}")

    def marginals(self, t):
        """Per-variable marginal vectors at time ``t`` (truncated sums)."""
        self._check_t(t)
        return [self.weights[t] @ a for a in self.atoms]

    def pair_joint(self, t, j, j2):
        self._check_t(t)
        return np.einsum("h,ha,hb->ab", self.weights[t], self.atoms[j], self.atoms[j2])

    def full_table(self, t):
        """Full joint table at time ``t``; only for small schemas."""
        if self.schema.n_cells() > 10 ** 6:
            raise ValueError("table too large to materialize")
        self._check_t(t)
        out = np.zeros(self.schema.levels)
        for h in range(self.k):
            comp = self.weights[t, h]
            for j, a in enumerate(self.atoms):
                shape = [1] * self.schema.p
                shape[j] = -1
                comp = comp * a[h].reshape(shape)
            out = out + comp
        return out


class CellProbability(NamedTuple):
    value: float
    remainder: float  # truncation error bound


def cell_probability(m, t, cell):
    """Probability of a full cell at time ``t``; the bound is the unrepresented mass."""
    m._check_t(t)
    cell = tuple(int(c) for c in cell)
    if len(cell) != m.schema.p:
        raise ValueError("cell must give one level per variable")
    prod = np.array(m.weights[t])
    for j, c in enumerate(cell):
        m._check_level(j, c)
        prod = prod * m.atoms[j][:, c]
    return CellProbability(float(prod.sum()), float(m.remainder[t]))


def marginal_probability(m, t, j, level):
    m._check_t(t)
    m._check_level(j, level)
    return float(m.weights[t] @ m.atoms[j][:, level])


def rho_from_joint(joint, marg_a=None, marg_b=None):
    """Normalized chi-square dependence of a two-way table.

    ``rho**2 = sum (pi_ab - m_a m_b)**2 / (m_a m_b) / (min(d_a, d_b) - 1)``.
    Terms whose marginal product and joint are both zero count as zero.
    """
    joint = np.asarray(joint, dtype=float)
    if marg_a is None:
        marg_a = joint.sum(axis=1)
    if marg_b is None:
        marg_b = joint.sum(axis=0)
    prod = np.outer(marg_a, marg_b)
    zero = prod <= 0
    if np.any(zero & (joint != 0)):
        raise ValueError("nonzero joint mass on a cell with zero marginal product")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(zero, 0.0, (joint - prod) ** 2 / np.where(zero, 1.0, prod))
    rho2 = terms.sum() / (min(joint.shape) - 1)
    return float(np.sqrt(max(rho2, 0.0)))


def dependence_measure(m, t, j, j2):
    if j == j2:
        raise ValueError("dependence measure needs two distinct variables")
    m._check_level(j, 0)
    m._check_level(j2, 0)
    joint = m.pair_joint(t, j, j2)
    return rho_from_joint(joint, m.weights[t] @ m.atoms[j], m.weights[t] @ m.atoms[j2])


def rho_all_pairs(weights, atoms, pairs):
    """Vectorized dependence over times for many pairs.

    ``weights`` is (T, k); returns an array of shape (T, len(pairs)).
    """
    weights = np.atleast_2d(weights)
    margs = [weights @ a for a in atoms]  # each (T, d_j)
    out = np.empty((weights.shape[0], len(pairs)))
    for col, (j, j2) in enumerate(pairs):
        joint = np.einsum("th,ha,hb->tab", weights, atoms[j], atoms[j2])
        prod = margs[j][:, :, None] * margs[j2][:, None, :]
        zero = prod <= 0
        if np.any(zero & (joint != 0)):
            raise ValueError("nonzero joint mass on a cell with zero marginal product")
        terms = np.where(zero, 0.0, (joint - prod) ** 2 / np.where(zero, 1.0, prod))
        d = min(atoms[j].shape[1], atoms[j2].shape[1])
        out[:, col] = np.sqrt(np.maximum(terms.sum(axis=(1, 2)) / (d - 1), 0.0))
    return out


# --- prior moments -------------------------------------------------------

GH_NODES = 64
MC_DRAWS = 10 ** 6
MC_SEED = 20120501

_gh_x, _gh_w = np.polynomial.hermite.hermgauss(GH_NODES)


@dataclass(frozen=True)
class LinkMoments:
    beta1: float
    beta2: float
    gamma: float


def link_moments(link, mu, phi, sigma_eta, sigma_eps, lag):
    """First and second moments of ``g(W)`` under the stationary state law.

    ``beta1 = E g(W)``, ``beta2 = E g(W)^2`` and
    ``gamma_lag = E g(W_t) g(W_{t+lag})``. The probit link is integrated
    by Gauss-Hermite quadrature (tensor grid for the bivariate case);
    other links fall back to seeded Monte Carlo.
    """
    if not abs(phi) < 1:
        raise ValueError("|phi| must be < 1")
    if not (sigma_eta > 0 and sigma_eps > 0):
        raise ValueError("standard deviations must be positive")
    if lag < 0:
        raise ValueError("lag must be >= 0")
    link = get_link(link)
    hyper = StateHyper(mu, phi, sigma_eps ** 2, sigma_eta ** 2)
    mean = hyper.stationary_mean
    var = hyper.marginal_var_w
    cov = phi ** lag * hyper.stationary_var
    if isinstance(link, ProbitLink):
        x = mean + np.sqrt(2 * var) * _gh_x
        g = link.cdf(x)
        beta1 = float(_gh_w @ g / np.sqrt(np.pi))
        beta2 = float(_gh_w @ g ** 2 / np.sqrt(np.pi))
        if lag == 0:
            return LinkMoments(beta1, beta2, beta2)
        # W1 = m + sqrt(v) z1, W2 = m + (c/sqrt(v)) z1 + sqrt(v - c^2/v) z2
        z = np.sqrt(2) * _gh_x
        w1 = mean + np.sqrt(var) * z
        w2 = (mean + cov / np.sqrt(var) * z[:, None]
              + np.sqrt(var - cov ** 2 / var) * z[None, :])
        grid = link.cdf(w1)[:, None] * link.cdf(w2)
        gamma = float(_gh_w @ grid @ _gh_w / np.pi)
        return LinkMoments(beta1, beta2, gamma)
    rng = np.random.default_rng(MC_SEED)
    z1 = rng.standard_normal(MC_DRAWS)
    z2 = rng.standard_normal(MC_DRAWS)
    w1 = mean + np.sqrt(var) * z1
    g1 = link.cdf(w1)
    beta1 = float(g1.mean())
    beta2 = float((g1 ** 2).mean())
    if lag == 0:
        return LinkMoments(beta1, beta2, beta2)
    w2 = mean + cov / np.sqrt(var) * z1 + np.sqrt(var - cov ** 2 / var) * z2
    return LinkMoments(beta1, beta2, float((g1 * link.cdf(w2)).mean()))


@dataclass(frozen=True)
class PriorMomentReport:
    expectation: float
    variance: float
    covariance: float
    lag: int
    beta1: float
    beta2: float
    gamma: float
    cell: tuple = field(default=())
    cell2: tuple = field(default=())

    def as_dict(self):
        return {
            "cell": list(self.cell), "cell2": list(self.cell2), "lag": self.lag,
            "expectation": self.expectation, "variance": self.variance,
            "covariance": self.covariance, "beta1": self.beta1,
            "beta2": self.beta2, "gamma": self.gamma,
        }


def prior_moments(hyper, link, mu, phi, sigma_eta, sigma_eps, cell, cell2, lag):
    """Closed-form prior mean/variance of a cell and its lagged covariance.

    ``hyper`` is a :class:`DirichletHyper`; the remaining arguments set the
    state law. ``cell`` is evaluated at time ``t`` and ``cell2`` at ``t + lag``.
    """
    concs = hyper.concentrations
    cell = tuple(int(c) for c in cell)
    cell2 = tuple(int(c) for c in cell2)
    if len(cell) != len(concs) or len(cell2) != len(concs):
        raise ValueError("cells must give one level per variable")
    for c, c2, a in zip(cell, cell2, concs):
        if not (0 <= c < a.size and 0 <= c2 < a.size):
            raise IndexError("cell level out of range")
    lm = link_moments(link, mu, phi, sigma_eta, sigma_eps, lag)
    a_hat = hyper.totals()
    a_c = np.array([a[c] for a, c in zip(concs, cell)])
    a_c2 = np.array([a[c] for a, c in zip(concs, cell2)])
    same = np.array([c == c2 for c, c2 in zip(cell, cell2)], dtype=float)

    expectation = float(np.prod(a_c / a_hat))
    var_atoms = np.prod(a_c * (a_c + 1) / (a_hat * (a_hat + 1))) - np.prod(a_c ** 2 / a_hat ** 2)
    cov_atoms = (np.prod(a_c * (a_c2 + same) / (a_hat * (a_hat + 1)))
                 - np.prod(a_c * a_c2 / a_hat ** 2))
    variance = float(var_atoms * lm.beta2 / (2 * lm.beta1 - lm.beta2))
    covariance = float(cov_atoms * lm.gamma / (2 * lm.beta1 - lm.gamma))
    return PriorMomentReport(expectation, variance, covariance, int(lag),
                             lm.beta1, lm.beta2, lm.gamma, cell, cell2)
