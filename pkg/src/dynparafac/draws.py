"""Container for retained MCMC draws and the summaries derived from them."""

from dataclasses import dataclass, field

import numpy as np

from .model import ParafacMixture, rho_all_pairs


@dataclass
class PosteriorDraws:
    """Thinned draws of one or more chains.

    Each draw keeps its own number of represented components ``k``:
    ``weights[i]`` is (T, k), ``atoms[i][j]`` is (k, d_j) and
    ``remainder[i]`` (T,) is the mass beyond those ``k`` components.
    Static (per-wave) fits have ``kind == "static"`` and no state
    hyperparameters.
    """

    schema: object
    kind: str
    weights: list
    remainder: list
    atoms: list
    chain: np.ndarray
    alpha: list = None
    mu: np.ndarray = None
    phi: np.ndarray = None
    sigma2_eps: np.ndarray = None
    sigma2_eta: np.ndarray = None
    link: str = "probit"
    dirichlet: list = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.chain = np.asarray(self.chain, dtype=int)
        if self.dirichlet is None:
            self.dirichlet = [np.ones(d) for d in self.schema.levels]

    @property
    def n_draws(self):
        return len(self.weights)

    @property
    def T(self):
        return self.weights[0].shape[0] if self.weights else 0

    @property
    def kstar(self):
        return np.array([w.shape[1] for w in self.weights])

    def mixture(self, i):
        return ParafacMixture(self.schema, self.atoms[i], self.weights[i], self.remainder[i])

    def rho(self, pairs=None):
        """Dependence measure per draw: array (n_draws, T, n_pairs)."""
        pairs = self.schema.pairs() if pairs is None else list(pairs)
        return np.stack([rho_all_pairs(w, a, pairs) for w, a in zip(self.weights, self.atoms)])

    def rho_mean(self, pairs=None):
        return self.rho(pairs).mean(axis=0)

    def cell_probability_draws(self, t, cell):
        out = np.empty(self.n_draws)
        for i, (w, a) in enumerate(zip(self.weights, self.atoms)):
            prod = w[t].copy()
            for j, c in enumerate(cell):
                prod *= a[j][:, c]
            out[i] = prod.sum()
        return out

    def hyper_table(self):
        if self.kind != "dynamic":
            raise ValueError("static draws carry no state hyperparameters")
        return np.column_stack([self.mu, self.phi, self.sigma2_eps, self.sigma2_eta])

    @classmethod
    def concatenate(cls, parts):
        """Stack draws from several chains, keeping each part's chain ids."""
        first = parts[0]
        kw = dict(schema=first.schema, kind=first.kind, link=first.link, dirichlet=first.dirichlet)
        for name in ("weights", "remainder", "atoms"):
            kw[name] = [x for p in parts for x in getattr(p, name)]
        kw["alpha"] = None if first.alpha is None else [x for p in parts for x in p.alpha]
        kw["chain"] = np.concatenate([p.chain for p in parts])
        if first.kind == "dynamic":
            for name in ("mu", "phi", "sigma2_eps", "sigma2_eta"):
                kw[name] = np.concatenate([getattr(p, name) for p in parts])
        kw["diagnostics"] = {f"chain{int(p.chain[0]) if p.n_draws else i}": p.diagnostics
                             for i, p in enumerate(parts)}
        return cls(**kw)

    def equals(self, other):
        """Exact (bitwise) equality of all retained values."""
        if (self.kind, self.schema, self.n_draws, self.link) != (other.kind, other.schema, other.n_draws, other.link):
            return False
        if not np.array_equal(self.chain, other.chain):
            return False
        for a, b in zip(self.weights + self.remainder, other.weights + other.remainder):
            if not np.array_equal(a, b):
                return False
        for a, b in zip(self.atoms, other.atoms):
            if not all(np.array_equal(x, y) for x, y in zip(a, b)):
                return False
        if (self.alpha is None) != (other.alpha is None):
            return False
        if self.alpha is not None and not all(np.array_equal(x, y) for x, y in zip(self.alpha, other.alpha)):
            return False
        if self.kind == "dynamic":
            for name in ("mu", "phi", "sigma2_eps", "sigma2_eta"):
                if not np.array_equal(getattr(self, name), getattr(other, name)):
                    return False
        return all(np.array_equal(a, b) for a, b in zip(self.dirichlet, other.dirichlet))
