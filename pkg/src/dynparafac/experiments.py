"""Simulation studies, evaluation metrics and table forecasting."""

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .data_io import Dataset, ObservationBlock
from .distributions import make_rng, sample_dirichlet
from .links import get_link
from .model import CategoricalSchema, ParafacMixture, rho_all_pairs, rho_from_joint
from .sticks import (MAX_COMPONENTS, LadderOverflow, StateHyper, forecast_states,
                     log_weights_from_states, sample_prior_trajectory)

DEFAULT_SAMPLE_SIZES = (120, 110, 150, 80, 100, 120, 100, 140, 110, 150)
TRUTH_REMAINDER = 1e-10
FORECAST_REMAINDER = 1e-10


def default_sample_sizes(T):
    """Sizes taken from the reference list at evenly spaced positions."""
    pos = np.round(np.linspace(0, len(DEFAULT_SAMPLE_SIZES) - 1, T)).astype(int)
    return [DEFAULT_SAMPLE_SIZES[i] for i in pos]


@dataclass
class SimulationSpec:
    case: str = "model-based"  # or "loglinear-rw"
    T: int = 10
    levels: list = field(default_factory=lambda: [4] * 20)
    n_t: list = None
    mu: float = 0.0
    phi: float = 0.8
    sigma_eps: float = 0.1
    sigma_eta: float = 0.8
    rw_variance: float = 1.0
    dirichlet: float = 1.0
    missing_rate: float = 0.0
    link: str = "probit"
    seed: int = 0

    def __post_init__(self):
        if self.case not in ("model-based", "loglinear-rw"):
            raise ValueError(f"unknown simulation case {self.case!r}")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        self.levels = [int(d) for d in self.levels]
        if self.n_t is None:
            self.n_t = default_sample_sizes(self.T)
        self.n_t = [int(n) for n in self.n_t]
        if len(self.n_t) != self.T or any(n < 0 for n in self.n_t):
            raise ValueError("need one nonnegative sample size per time")
        if not 0 <= self.missing_rate < 1:
            raise ValueError("missing_rate must be in [0, 1)")
        if self.case == "loglinear-rw":
            if any(d != 2 for d in self.levels):
                raise ValueError("log-linear random-walk case needs binary variables")
            if len(self.levels) > 15:
                raise ValueError("log-linear random-walk case supports at most 15 variables")
            if self.rw_variance <= 0:
                raise ValueError("rw_variance must be positive")

    @property
    def schema(self):
        return CategoricalSchema(self.levels)


def _apply_missing(x, rate, rng):
    mask = rng.random(x.shape) < rate if rate > 0 else np.zeros(x.shape, bool)
    return np.where(mask, -1, x), mask


def generate_model_based(spec):
    """Simulate from the dynamic mixture itself.

    Returns the dataset and the generating :class:`ParafacMixture`
    (ladder extended until every time's remainder is below 1e-10).
    """
    if spec.case != "model-based":
        raise ValueError("spec.case must be 'model-based'")
    rng = make_rng(spec.seed)
    schema = spec.schema
    hyper = StateHyper(spec.mu, spec.phi, spec.sigma_eps ** 2, spec.sigma_eta ** 2)
    traj = sample_prior_trajectory(hyper, spec.T, 10, rng)
    W = traj.W
    log_nu, log_rem = log_weights_from_states(W, spec.link)
    while np.any(log_rem >= np.log(TRUTH_REMAINDER)):
        more = sample_prior_trajectory(hyper, spec.T, 10, rng)
        W = np.concatenate([W, more.W], axis=1)
        log_nu, log_rem = log_weights_from_states(W, spec.link)
    K = W.shape[1]
    atoms = [sample_dirichlet(np.full(d, spec.dirichlet), rng, size=K) for d in schema.levels]
    truth = ParafacMixture(schema, atoms, np.exp(log_nu), np.exp(log_rem))

    blocks = []
    for t, n in enumerate(spec.n_t):
        probs = truth.weights[t] / truth.weights[t].sum()
        s = rng.choice(K, size=n, p=probs)
        x = np.empty((n, schema.p), dtype=np.int64)
        for j, a in enumerate(atoms):
            cum = np.cumsum(a[s], axis=1)
            x[:, j] = np.minimum((cum < rng.random(n)[:, None]).sum(axis=1), schema.levels[j] - 1)
        x, mask = _apply_missing(x, spec.missing_rate, rng)
        blocks.append(ObservationBlock(x, mask))
    return Dataset(schema, blocks), truth


def loglinear_pmf(main, pairwise, p):
    """Binary log-linear pmf with main effects and two-way interactions.

    Each effect is switched on by level 0 (the first level) of the
    variables involved. Returns an array of shape ``(2,) * p``.
    """
    cells = np.array(list(product((0, 1), repeat=p)))
    on = (cells == 0).astype(float)
    eta = on @ np.asarray(main, dtype=float)
    for (j, k), lam in pairwise.items():
        eta = eta + lam * on[:, j] * on[:, k]
    eta -= eta.max()
    pmf = np.exp(eta)
    return (pmf / pmf.sum()).reshape((2,) * p)


def generate_loglinear_rw(spec):
    """Binary data from a log-linear model whose coefficients follow random walks.

    Coefficients start at 0 before the first wave and take one
    ``N(0, rw_variance)`` step per wave. Returns the dataset and the
    per-time pmf tensors, shape ``(T,) + (2,) * p``.
    """
    if spec.case != "loglinear-rw":
        raise ValueError("spec.case must be 'loglinear-rw'")
    rng = make_rng(spec.seed)
    p = len(spec.levels)
    pairs = [(j, k) for j in range(p) for k in range(j + 1, p)]
    sd = np.sqrt(spec.rw_variance)
    main = np.zeros(p)
    inter = np.zeros(len(pairs))
    pmfs = []
    blocks = []
    cells = np.array(list(product((0, 1), repeat=p)))
    for n in spec.n_t:
        main = main + sd * rng.standard_normal(p)
        inter = inter + sd * rng.standard_normal(len(pairs))
        pmf = loglinear_pmf(main, dict(zip(pairs, inter)), p)
        pmfs.append(pmf)
        idx = rng.choice(cells.shape[0], size=n, p=pmf.ravel())
        x, mask = _apply_missing(cells[idx].astype(np.int64), spec.missing_rate, rng)
        blocks.append(ObservationBlock(x, mask))
    return Dataset(spec.schema, blocks), np.array(pmfs)


def true_rho(truth, pairs=None):
    """Dependence measure per (time, pair) from a mixture or from pmf tensors."""
    if isinstance(truth, ParafacMixture):
        pairs = truth.schema.pairs() if pairs is None else pairs
        return rho_all_pairs(truth.weights, truth.atoms, pairs)
    pmfs = np.asarray(truth)
    p = pmfs.ndim - 1
    pairs = [(j, k) for j in range(p) for k in range(j + 1, p)] if pairs is None else pairs
    out = np.empty((pmfs.shape[0], len(pairs)))
    for t in range(pmfs.shape[0]):
        for col, (j, k) in enumerate(pairs):
            other = tuple(a for a in range(p) if a not in (j, k))
            out[t, col] = rho_from_joint(pmfs[t].sum(axis=other))
    return out


def _pearson(a, b):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size < 2 or np.ptp(a) == 0 or np.ptp(b) == 0:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])


@dataclass
class RhoRecovery:
    per_time: list  # correlation per time (NaN when undefined)
    pooled: float

    def undefined(self):
        return [t for t, c in enumerate(self.per_time) if np.isnan(c)]

    def as_dict(self):
        return {"per_time": [None if np.isnan(c) else c for c in self.per_time],
                "pooled": None if np.isnan(self.pooled) else self.pooled}


def evaluate_rho_recovery(estimate, truth, times=None):
    """Pearson correlation between estimated and true dependence measures.

    ``estimate`` and ``truth`` are (T, n_pairs) arrays (posterior means
    and true values). Correlations of constant vectors are NaN.
    """
    est = np.asarray(estimate, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape:
        raise ValueError("estimate and truth must have the same shape")
    times = range(est.shape[0]) if times is None else list(times)
    per = [_pearson(est[t], tru[t]) for t in times]
    pooled = _pearson(est[list(times)], tru[list(times)])
    return RhoRecovery(per, pooled)


@dataclass
class PredictiveCriteria:
    ad: np.ndarray  # per replicate
    mape: np.ndarray
    mean_ad: float
    mean_mape: float


def predictive_criteria(replicates, observed):
    """Absolute deviation and mean absolute percentage error of replicated tables.

    Cells with zero observed count are left out of MAPE (they still count
    toward AD).
    """
    rep = np.atleast_2d(np.asarray(replicates, dtype=float))
    obs = np.asarray(observed, dtype=float).ravel()
    rep = rep.reshape(rep.shape[0], -1)
    if rep.shape[1] != obs.size:
        raise ValueError("replicate and observed tables differ in size")
    diff = np.abs(rep - obs)
    ad = diff.sum(axis=1)
    pos = obs > 0
    mape = (diff[:, pos] / obs[pos]).mean(axis=1) if np.any(pos) else np.full(rep.shape[0], np.nan)
    return PredictiveCriteria(ad, mape, float(ad.mean()), float(np.mean(mape)))


def tabulate(x, mask, margin, levels):
    """Counts over the cells of ``margin`` among rows observed on all its variables."""
    margin = list(margin)
    dims = [levels[j] for j in margin]
    ok = ~mask[:, margin].any(axis=1)
    flat = np.ravel_multi_index(tuple(x[ok][:, margin].T), dims) if ok.any() else np.zeros(0, int)
    return np.bincount(flat, minlength=int(np.prod(dims)))


def _ladder_with_tail(weights, remainder, hyper, link, atoms, dirichlet, rng):
    """Append prior components (stationary W, prior atoms) until the tail is negligible."""
    link = get_link(link)
    mean, sd = hyper.stationary_mean, np.sqrt(hyper.marginal_var_w)
    rem = float(remainder)
    tail_w = []
    while rem >= FORECAST_REMAINDER:
        if sum(map(len, tail_w)) >= MAX_COMPONENTS:
            raise LadderOverflow(f"forecast tail exceeds {MAX_COMPONENTS} components")
        log_g = link.log_cdf(mean + sd * rng.standard_normal(10))
        log_rest = np.log(rem) + np.concatenate([[0.0], np.cumsum(np.log1p(-np.exp(log_g)))])
        tail_w.append(np.exp(log_g + log_rest[:-1]))
        rem = float(np.exp(log_rest[-1]))
    n_new = sum(map(len, tail_w))
    w = np.concatenate([np.asarray(weights, dtype=float)] + tail_w)
    new_atoms = [np.concatenate([a, sample_dirichlet(c, rng, size=n_new)]) if n_new else a
                 for a, c in zip(atoms, dirichlet)]
    return w, new_atoms, rem


def forecast_table(draws, horizon, n_future, margins, seed=0):
    """Posterior predictive count tables ``horizon`` steps after the last fitted wave.

    For every retained draw the weight ladder is pushed forward through
    the state equations, completed with prior components for the tail,
    and ``n_future`` subjects are simulated. ``horizon=0`` resamples the
    last fitted wave. Returns ``{margin: array (n_draws, n_cells)}``.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if draws.kind != "dynamic":
        raise ValueError("forecasting needs dynamic draws")
    rng = make_rng(seed)
    margins = [tuple(m) for m in margins]
    needed = sorted({j for m in margins for j in m})
    levels = draws.schema.levels
    out = {m: np.empty((draws.n_draws, int(np.prod([levels[j] for j in m]))), dtype=np.int64)
           for m in margins}
    for i in range(draws.n_draws):
        hyper = StateHyper(draws.mu[i], draws.phi[i], draws.sigma2_eps[i], draws.sigma2_eta[i])
        if horizon == 0:
            w, rem = draws.weights[i][-1], draws.remainder[i][-1]
        else:
            fw, frem = forecast_states(draws.alpha[i][-1], hyper, horizon, 1, rng, draws.link)
            w, rem = fw[0, -1], frem[0, -1]
        w, atoms, _ = _ladder_with_tail(w, rem, hyper, draws.link, draws.atoms[i],
                                        draws.dirichlet, rng)
        s = rng.choice(w.size, size=n_future, p=w / w.sum())
        x = np.zeros((n_future, draws.schema.p), dtype=np.int64)
        for j in needed:
            cum = np.cumsum(atoms[j][s], axis=1)
            x[:, j] = np.minimum((cum < rng.random(n_future)[:, None]).sum(axis=1), levels[j] - 1)
        mask = np.zeros_like(x, dtype=bool)
        for m in margins:
            out[m][i] = tabulate(x, mask, m, levels)
    return out


def independence_forecast(marginals, n_future, margins, n_rep, seed=0):
    """Multinomial replicate tables from a product-of-marginals pmf."""
    rng = make_rng(seed)
    out = {}
    for m in margins:
        pmf = marginals[m[0]]
        for j in m[1:]:
            pmf = np.multiply.outer(pmf, marginals[j])
        pmf = pmf.ravel()
        out[tuple(m)] = rng.multinomial(n_future, pmf / pmf.sum(), size=n_rep)
    return out
