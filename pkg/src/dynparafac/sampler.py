"""Slice-sampling Gibbs sampler for the dynamic Parafac mixture.

One sweep runs, in order:

1. atoms ``psi`` from their Dirichlet full conditionals,
2. probit latents ``z`` (truncated normals),
3. noisy states ``W`` given ``z`` and ``alpha``,
4. slice variables ``u``,
5. labels ``s`` over the slice sets (extending the state columns first),
6. latent states ``alpha`` by forward filtering backward sampling,
7. ``mu`` (Gibbs), 8. ``phi`` (independence Metropolis-Hastings),
9. ``sigma2_eps`` and 10. ``sigma2_eta`` (inverse gamma).

With a non-probit link, steps 2-3 are replaced by a per-entry
independence Metropolis-Hastings update of ``W``.

Only the occupied components ``h < k* = max(s) + 1`` are carried between
sweeps. Unoccupied tail components are conditionally independent of the
data given the hyperparameters, so the hyperparameter updates integrate
them out and step 5 redraws them from the prior whenever the slice sets
need them.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .distributions import (make_rng, sample_dirichlet, sample_inverse_gamma,
                            sample_truncated_normal, sample_truncated_normal_interval)
from .draws import PosteriorDraws
from .kalman import ffbs
from .links import ProbitLink, get_link
from .model import DirichletHyper
from .sticks import (LadderOverflow, StateHyper, StateTrajectory, extend_to_cover,
                     log_weights_from_states)

PHI_FALLBACK_VAR = 0.1 ** 2
PHI_EDGE = 1e-9


class NumericalAbort(RuntimeError):
    """A non-finite value appeared in the chain."""

    def __init__(self, sweep, quantity):
        super().__init__(f"non-finite {quantity} at sweep {sweep}")
        self.sweep = sweep
        self.quantity = quantity


class ConfigurationError(ValueError):
    pass


@dataclass
class ChainConfig:
    iterations: int = 6000
    burn_in: int = 2000
    thin: int = 5
    seed: int = 0
    stream: int = 0
    link: str = "probit"
    dirichlet: object = 1.0  # symmetric value or one vector per variable
    mu0: float = 0.0
    sigma2_0: float = 1.0
    m_eps: float = 5.0
    S_eps: float = 0.05
    m_eta: float = 5.0
    S_eta: float = 0.05
    k0: int = 10
    generic_w: bool = False  # use the Metropolis W update even for probit

    def __post_init__(self):
        if self.iterations < 1 or not 0 <= self.burn_in < self.iterations:
            raise ConfigurationError("need 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ConfigurationError("thin must be >= 1")
        if self.k0 < 1:
            raise ConfigurationError("k0 must be >= 1")
        for name in ("sigma2_0", "m_eps", "S_eps", "m_eta", "S_eta"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        get_link(self.link)

    @property
    def n_retained(self):
        return (self.iterations - self.burn_in) // self.thin

    def dirichlet_hyper(self, schema):
        if np.isscalar(self.dirichlet):
            return DirichletHyper.symmetric(schema, float(self.dirichlet))
        hyper = DirichletHyper(self.dirichlet)
        if hyper.schema != schema:
            raise ConfigurationError("Dirichlet hyperparameters do not match the schema")
        return hyper


class ObservedData:
    """Stacked, mask-aware view of a :class:`Dataset` used by the updates.

    Masked entries are replaced by level 0 and always gated by ``obs``,
    so whatever raw value sat under the mask never reaches a count.
    """

    def __init__(self, dataset):
        x, mask, tid = dataset.stacked()
        self.schema = dataset.schema
        self.levels = dataset.schema.levels
        self.obs = ~mask
        self.x = np.where(self.obs, x, 0)
        self.tid = tid
        self.T = dataset.T
        self.N = tid.size
        self.tmat = np.zeros((self.T, self.N))
        self.tmat[tid, np.arange(self.N)] = 1.0


@dataclass
class SamplerState:
    s: np.ndarray  # (N,) 0-based labels
    log_u: np.ndarray  # (N,) log slice variables
    z: np.ndarray  # (N, K) probit latents, NaN for h > s; None on the generic path
    alpha: np.ndarray  # (T, K)
    W: np.ndarray  # (T, K)
    atoms: list  # atoms[j]: (K, d_j)
    mu: float
    phi: float
    sigma2_eps: float
    sigma2_eta: float
    k_tilde: int = 0

    @property
    def kstar(self):
        return int(self.s.max()) + 1 if self.s.size else 0

    @property
    def K(self):
        return self.W.shape[1]

    @property
    def u(self):
        return np.exp(self.log_u)

    @property
    def hyper(self):
        return StateHyper(self.mu, self.phi, self.sigma2_eps, self.sigma2_eta)

    def copy(self):
        return replace(
            self, s=self.s.copy(), log_u=self.log_u.copy(),
            z=None if self.z is None else self.z.copy(), alpha=self.alpha.copy(),
            W=self.W.copy(), atoms=[a.copy() for a in self.atoms])


def init_state(data, config, rng):
    """Labels uniform on ``0..k0-1``, atoms from the prior, states at the stationary mean."""
    dir_hyper = config.dirichlet_hyper(data.schema)
    s = rng.integers(0, config.k0, size=data.N)
    K = int(s.max()) + 1 if data.N else 0
    mu = config.mu0
    phi = 0.5
    s2e = config.S_eps / max(config.m_eps - 2.0, 1.0)
    s2n = config.S_eta / max(config.m_eta - 2.0, 1.0)
    alpha = np.full((data.T, K), mu / (1 - phi))
    atoms = [sample_dirichlet(a, rng, size=K) for a in dir_hyper.concentrations]
    return SamplerState(s=s, log_u=np.zeros(data.N), z=None, alpha=alpha, W=alpha.copy(),
                        atoms=atoms, mu=mu, phi=phi, sigma2_eps=s2e, sigma2_eta=s2n)


# --- step 1 ---------------------------------------------------------------

def update_atoms(state, data, dir_hyper, rng, K=None):
    """Dirichlet draws for components ``0..K-1`` (default ``k*``) from masked counts."""
    K = state.kstar if K is None else K
    out = []
    for j, a in enumerate(dir_hyper.concentrations):
        d = a.size
        obs = data.obs[:, j] & (state.s < K)
        counts = np.bincount(state.s[obs] * d + data.x[obs, j], minlength=K * d).reshape(K, d)
        out.append(sample_dirichlet(a + counts, rng) if K else np.zeros((0, d)))
    return out


# --- steps 2-3 ------------------------------------------------------------

def _active(state, K):
    h = np.arange(K)
    return h[None, :] <= state.s[:, None], h[None, :] == state.s[:, None]


def update_probit_latents(state, data, rng, link="probit"):
    """z[n, h] ~ N-(W, 1) for h < s_n, N+(W, 1) for h = s_n, absent above."""
    if not isinstance(get_link(link), ProbitLink):
        raise ConfigurationError("probit latents need the probit link")
    K = state.K
    active, top = _active(state, K)
    z = np.full((data.N, K), np.nan)
    mean = state.W[data.tid][active]
    z[active] = sample_truncated_normal(mean, 1.0, top[active], rng)
    return z


def z_signs_consistent(z, s):
    """True when z > 0 exactly at h = s and z <= 0 below it (NaN above)."""
    h = np.arange(z.shape[1])[None, :]
    s = s[:, None]
    below = z[np.broadcast_to(h < s, z.shape)]
    at = z[np.broadcast_to(h == s, z.shape)]
    above = z[np.broadcast_to(h > s, z.shape)]
    return bool(np.all(below <= 0) and np.all(at > 0) and np.all(np.isnan(above)))


def update_W(state, data, rng):
    """Normal full conditional of W given the latents of subjects with s >= h."""
    K = state.K
    active, _ = _active(state, K)
    count = data.tmat @ active.astype(float)
    zsum = data.tmat @ np.where(active, state.z, 0.0)
    prec_eps = 1.0 / state.sigma2_eps
    var = 1.0 / (count + prec_eps)
    mean = var * (zsum + prec_eps * state.alpha)
    return mean + np.sqrt(var) * rng.standard_normal(mean.shape)


def _w_log_target(x, n_eq, n_gt, alpha, s2, link):
    return n_eq * link.log_cdf(x) + n_gt * link.log_sf(x) - (x - alpha) ** 2 / (2 * s2)


def _w_derivs(x, n_eq, n_gt, alpha, s2, link):
    g1 = n_eq * link.dlog_cdf(x) + n_gt * link.dlog_sf(x) - (x - alpha) / s2
    g2 = n_eq * link.d2log_cdf(x) + n_gt * link.d2log_sf(x) - 1.0 / s2
    return g1, g2


def w_conditional_mode(n_eq, n_gt, alpha, s2, link, iters=100, tol=1e-10):
    """Newton ascent (with step halving) on each W entry's log conditional.

    Returns the mode and the second derivative there.
    """
    x = np.array(alpha, dtype=float)
    f = _w_log_target(x, n_eq, n_gt, alpha, s2, link)
    for _ in range(iters):
        g1, g2 = _w_derivs(x, n_eq, n_gt, alpha, s2, link)
        step = np.where(g2 < 0, -g1 / np.where(g2 < 0, g2, -1.0), np.sign(g1) * 0.1)
        for _ in range(60):
            new = x + step
            fn = _w_log_target(new, n_eq, n_gt, alpha, s2, link)
            worse = fn < f
            if not np.any(worse):
                break
            step = np.where(worse, 0.5 * step, step)
        x, f = np.where(worse, x, new), np.where(worse, f, fn)
        if np.all(np.abs(step) < tol):
            break
    _, g2 = _w_derivs(x, n_eq, n_gt, alpha, s2, link)
    return x, g2


def update_W_generic_link(state, data, link, rng):
    """Independence MH for every ``W[t, h]`` with a Laplace proposal.

    The log target marginalizes ``u``: subjects in component ``h``
    contribute ``log g(W)``, those in later components ``log(1 - g(W))``.
    Entries whose curvature at the mode is not negative fall back to a
    random walk with the prior scale.

    Returns the new ``W`` and the acceptance rate.
    """
    link = get_link(link)
    K = state.K
    if K == 0:
        return state.W.copy(), 1.0
    h = np.arange(K)
    n_eq = data.tmat @ (state.s[:, None] == h[None, :]).astype(float)
    n_gt = data.tmat @ (state.s[:, None] > h[None, :]).astype(float)
    s2 = state.sigma2_eps
    mode, curv = w_conditional_mode(n_eq, n_gt, state.alpha, s2, link)
    concave = curv < 0
    var = np.where(concave, -1.0 / np.where(concave, curv, -1.0), s2)
    center = np.where(concave, mode, state.W)
    prop = center + np.sqrt(var) * rng.standard_normal(center.shape)
    cur = state.W
    log_ratio = (_w_log_target(prop, n_eq, n_gt, state.alpha, s2, link)
                 - _w_log_target(cur, n_eq, n_gt, state.alpha, s2, link))
    # independence proposal density terms; they cancel for the random walk
    log_ratio = log_ratio + np.where(
        concave, ((prop - mode) ** 2 - (cur - mode) ** 2) / (2 * var), 0.0)
    accept = np.log(rng.random(cur.shape)) < log_ratio
    return np.where(accept, prop, cur), float(accept.mean())


# --- steps 4-5 ------------------------------------------------------------

def update_slice(state, data, link, rng):
    """log u ~ log Uniform(0, nu[t, s]) for every subject."""
    if data.N == 0:
        return np.zeros(0)
    log_nu, _ = log_weights_from_states(state.W, link)
    log_nu_s = log_nu[data.tid, state.s]
    if np.any(~np.isfinite(log_nu_s)):
        raise NumericalAbort(-1, "slice bound (zero weight on an occupied component)")
    r = rng.random(data.N)
    r = np.where(r == 0.0, np.nextafter(0.0, 1.0), r)
    return log_nu_s + np.log(r)


def extend_state(state, data, dir_hyper, link, rng):
    """Add prior-drawn components until every slice set is fully represented.

    Returns ``(alpha, W, atoms, k_tilde)`` with ``k_tilde`` columns.
    """
    if data.N == 0:
        return state.alpha, state.W, state.atoms, state.K
    min_log_u = np.zeros(data.T)
    np.minimum.at(min_log_u, data.tid, state.log_u)
    traj, k_tilde = extend_to_cover(StateTrajectory(state.alpha, state.W), state.hyper,
                                    np.exp(min_log_u), rng, link)
    k_tilde = max(k_tilde, state.K)
    alpha, W = traj.alpha, traj.W
    if alpha.shape[1] < k_tilde:
        alpha, W = state.alpha, state.W
    n_new = k_tilde - state.K
    atoms = [np.concatenate([a, sample_dirichlet(c, rng, size=n_new)]) if n_new else a
             for a, c in zip(state.atoms, dir_hyper.concentrations)]
    return alpha[:, :k_tilde], W[:, :k_tilde], atoms, k_tilde


def label_log_likelihood(atoms, data):
    """(N, K) log of prod over observed variables of psi[h, x]."""
    K = atoms[0].shape[0]
    L = np.zeros((data.N, K))
    with np.errstate(divide="ignore"):
        for j, a in enumerate(atoms):
            la = np.log(a)[:, data.x[:, j]].T
            L += np.where(data.obs[:, j:j + 1], la, 0.0)
    return L


def slice_labels(log_nu, log_u, atoms, data, rng):
    """Draw labels over the slice sets ``{h : nu[t, h] > u}``.

    ``log_nu`` is the (T, K) log weight ladder matching ``atoms``.
    """
    if data.N == 0:
        return np.zeros(0, dtype=np.int64)
    K = log_nu.shape[1]
    allowed = log_nu[data.tid] > log_u[:, None]
    if not np.all(allowed.any(axis=1)):
        raise RuntimeError("empty slice set: slice variables inconsistent with weights")
    L = np.where(allowed, label_log_likelihood(atoms, data), -np.inf)
    L -= L.max(axis=1, keepdims=True)
    P = np.exp(L)
    cum = np.cumsum(P, axis=1)
    r = rng.random(data.N) * cum[:, -1]
    s = np.minimum((cum <= r[:, None]).sum(axis=1), K - 1)
    # never land on a zero-probability column through rounding at the top edge
    bad = P[np.arange(data.N), s] == 0
    while np.any(bad):
        s[bad] -= 1
        bad = P[np.arange(data.N), s] == 0
    return s


def update_labels(state, data, link, rng):
    log_nu, _ = log_weights_from_states(state.W, link)
    return slice_labels(log_nu, state.log_u, state.atoms, data, rng)


# --- steps 6-10 -----------------------------------------------------------

def update_states_ffbs(state, rng, K=None):
    K = state.kstar if K is None else K
    if K == 0:
        return np.zeros((state.W.shape[0], 0))
    return ffbs(state.W[:, :K], state.mu, state.phi, state.sigma2_eta, state.sigma2_eps, rng)


def mu_conditional(alpha, phi, sigma2_eta, mu0, sigma2_0):
    """Mean and variance of the normal full conditional of ``mu``."""
    T, K = alpha.shape
    if K == 0:
        return mu0, sigma2_0
    D = K * (T - 1 + (1 + phi) / (1 - phi))
    mu_hat = ((alpha[1:] - phi * alpha[:-1]).sum() + (1 + phi) * alpha[0].sum()) / D
    s2_hat = sigma2_eta / D
    var = 1.0 / (1.0 / s2_hat + 1.0 / sigma2_0)
    return var * (mu_hat / s2_hat + mu0 / sigma2_0), var


def update_mu(state, config, rng, K=None):
    K = state.kstar if K is None else K
    m, v = mu_conditional(state.alpha[:, :K], state.phi, state.sigma2_eta, config.mu0, config.sigma2_0)
    return m + np.sqrt(v) * rng.standard_normal()


class PhiTarget:
    """Log full conditional of ``phi`` (uniform prior) with exact derivatives."""

    def __init__(self, alpha, mu, sigma2_eta):
        alpha = np.asarray(alpha, dtype=float)
        self.k = alpha.shape[1]
        self.mu = mu
        self.s2 = sigma2_eta
        a1 = alpha[0]
        self.S1 = float((a1 ** 2).sum())
        self.S2 = float(a1.sum())
        y = alpha[1:] - mu
        x = alpha[:-1]
        self.Syy = float((y * y).sum())
        self.Sxy = float((x * y).sum())
        self.Sxx = float((x * x).sum())

    def _init_term(self, phi):
        # (1 - phi^2) * sum_h (alpha_1h - mu / (1 - phi))^2, expanded
        k, mu = self.k, self.mu
        return (1 - phi ** 2) * self.S1 - 2 * (1 + phi) * mu * self.S2 + k * mu ** 2 * (1 + phi) / (1 - phi)

    def __call__(self, phi):
        if np.ndim(phi) == 0:
            return self.value(float(phi))
        return np.array([self.value(float(p)) for p in np.ravel(phi)]).reshape(np.shape(phi))

    def value(self, phi):
        if not abs(phi) < 1:
            return -np.inf
        return (0.5 * self.k * math.log1p(-phi * phi)
                - self._init_term(phi) / (2 * self.s2)
                - (self.Syy - 2 * phi * self.Sxy + phi * phi * self.Sxx) / (2 * self.s2))

    def grad(self, phi):
        k, mu = self.k, self.mu
        dA = -k * phi / (1 - phi ** 2)
        dF = -2 * phi * self.S1 - 2 * mu * self.S2 + 2 * k * mu ** 2 / (1 - phi) ** 2
        dC = (self.Sxy - phi * self.Sxx) / self.s2
        return dA - dF / (2 * self.s2) + dC

    def hess(self, phi):
        k, mu = self.k, self.mu
        d2A = -k * (1 + phi ** 2) / (1 - phi ** 2) ** 2
        d2F = -2 * self.S1 + 4 * k * mu ** 2 / (1 - phi) ** 3
        d2C = -self.Sxx / self.s2
        return d2A - d2F / (2 * self.s2) + d2C

    def mode(self, start=0.0, iters=100, tol=1e-12):
        """Safeguarded Newton ascent inside (-1, 1).

        The start point is fixed (not the chain's current value) so the
        proposal built from the mode is a genuine independence proposal.
        """
        lim = 1.0 - PHI_EDGE
        phi = float(start)
        f = self.value(phi)
        for _ in range(iters):
            g, H = self.grad(phi), self.hess(phi)
            step = -g / H if H < 0 else np.sign(g) * 0.1
            new = phi + step
            while abs(new) >= lim:
                step *= 0.5
                new = phi + step
            fn = self.value(new)
            while fn < f and abs(step) > 1e-15:
                step *= 0.5
                new = phi + step
                fn = self.value(new)
            if fn < f:
                break
            phi, f = new, fn
            if abs(step) < tol:
                break
        return phi

    def proposal(self):
        """Center and variance of the truncated-normal proposal."""
        phi_hat = self.mode()
        H = self.hess(phi_hat)
        var = -1.0 / H if H < 0 else PHI_FALLBACK_VAR
        return phi_hat + var * self.grad(phi_hat), var


def _tn_draw(center, var, rng):
    x = sample_truncated_normal_interval(center, np.sqrt(var), -1.0, 1.0, rng)
    return float(np.clip(x, -1.0 + PHI_EDGE, 1.0 - PHI_EDGE))


def update_phi(state, rng, K=None):
    """Independence MH step for ``phi``; returns ``(phi, accepted)``."""
    K = state.kstar if K is None else K
    if K == 0:
        return float(rng.uniform(-1.0, 1.0)), True
    target = PhiTarget(state.alpha[:, :K], state.mu, state.sigma2_eta)
    center, var = target.proposal()
    cand = _tn_draw(center, var, rng)
    cur = state.phi
    log_ratio = (target.value(cand) - target.value(cur)
                 + ((cand - center) ** 2 - (cur - center) ** 2) / (2 * var))
    if np.log(rng.random()) < log_ratio:
        return cand, True
    return cur, False


def update_sigma_eps(state, config, rng, K=None):
    K = state.kstar if K is None else K
    T = state.W.shape[0]
    resid = state.W[:, :K] - state.alpha[:, :K]
    m_hat = T * K + config.m_eps
    S_hat = float((resid ** 2).sum()) + config.S_eps
    return float(sample_inverse_gamma(m_hat / 2, S_hat / 2, rng))


def sigma_eta_scale(alpha, mu, phi):
    """Residual sum of squares entering the ``sigma2_eta`` conditional (initial term included)."""
    trans = alpha[1:] - mu - phi * alpha[:-1]
    init = (1 - phi ** 2) * (alpha[0] - mu / (1 - phi)) ** 2
    return float((trans ** 2).sum() + init.sum())


def update_sigma_eta(state, config, rng, K=None):
    K = state.kstar if K is None else K
    T = state.alpha.shape[0]
    m_hat = T * K + config.m_eta
    S_hat = sigma_eta_scale(state.alpha[:, :K], state.mu, state.phi) + config.S_eta
    return float(sample_inverse_gamma(m_hat / 2, S_hat / 2, rng))


# --- orchestration ----------------------------------------------------------

def _trim(state, K):
    state.alpha = state.alpha[:, :K]
    state.W = state.W[:, :K]
    state.atoms = [a[:K] for a in state.atoms]
    if state.z is not None:
        state.z = state.z[:, :K]


def _check_finite(state, sweep):
    checks = [("mu", state.mu), ("phi", state.phi), ("sigma2_eps", state.sigma2_eps),
              ("sigma2_eta", state.sigma2_eta), ("alpha", state.alpha), ("W", state.W)]
    checks += [(f"atoms[{j}]", a) for j, a in enumerate(state.atoms)]
    for name, v in checks:
        if not np.all(np.isfinite(v)):
            raise NumericalAbort(sweep, name)


def _finite(sweep_index, name, value):
    if not np.all(np.isfinite(value)):
        raise NumericalAbort(sweep_index, name)
    return value


def sweep(state, data, config, dir_hyper, link, rng, sweep_index=0):
    """One full pass of the ten updates, in order. Mutates ``state``.

    Every update's output is checked before the next step consumes it,
    so a non-finite value aborts at the step that produced it.
    """
    use_generic = config.generic_w or not isinstance(link, ProbitLink)
    diag = {}
    K = state.kstar
    _trim(state, K)
    state.atoms = update_atoms(state, data, dir_hyper, rng)
    for j, a in enumerate(state.atoms):
        _finite(sweep_index, f"atoms[{j}]", a)
    if use_generic:
        state.z = None
        state.W, diag["w_accept"] = update_W_generic_link(state, data, link, rng)
    else:
        state.z = update_probit_latents(state, data, rng, link)
        diag["z_signs_ok"] = z_signs_consistent(state.z, state.s)
        state.W = update_W(state, data, rng)
    _finite(sweep_index, "W", state.W)
    try:
        state.log_u = update_slice(state, data, link, rng)
    except NumericalAbort as exc:
        raise NumericalAbort(sweep_index, exc.quantity) from None
    try:
        state.alpha, state.W, state.atoms, state.k_tilde = extend_state(state, data, dir_hyper, link, rng)
    except LadderOverflow:
        raise NumericalAbort(sweep_index, "component ladder (weights underflow)") from None
    state.s = update_labels(state, data, link, rng)
    diag["k_tilde"] = state.k_tilde
    # z belongs to the old labels; it is redrawn at the start of the next sweep
    state.z = None
    K = state.kstar
    _trim(state, K)
    state.alpha = _finite(sweep_index, "alpha", update_states_ffbs(state, rng))
    state.mu = _finite(sweep_index, "mu", update_mu(state, config, rng))
    state.phi, diag["phi_accept"] = update_phi(state, rng)
    _finite(sweep_index, "phi", state.phi)
    state.sigma2_eps = _finite(sweep_index, "sigma2_eps", update_sigma_eps(state, config, rng))
    state.sigma2_eta = _finite(sweep_index, "sigma2_eta", update_sigma_eta(state, config, rng))
    diag["kstar"] = K
    _check_finite(state, sweep_index)
    return diag


def run_chain(dataset, config, callback=None):
    """Run one chain and return its retained draws.

    ``callback(sweep_index, state, diag)``, when given, is called after
    every sweep (used by diagnostics and tests).
    """
    link = get_link(config.link)
    data = ObservedData(dataset)
    dir_hyper = config.dirichlet_hyper(dataset.schema)
    rng = make_rng(config.seed, config.stream)
    state = init_state(data, config, rng)
    weights, remainder, alpha, atoms = [], [], [], []
    hyp = {k: [] for k in ("mu", "phi", "sigma2_eps", "sigma2_eta")}
    trace = {"kstar": [], "k_tilde": [], "phi_accept": [], "w_accept": []}
    for it in range(config.iterations):
        diag = sweep(state, data, config, dir_hyper, link, rng, it)
        for key in trace:
            if key in diag:
                trace[key].append(diag[key])
        if callback is not None:
            callback(it, state, diag)
        if it >= config.burn_in and (it - config.burn_in + 1) % config.thin == 0:
            log_nu, log_rem = log_weights_from_states(state.W, link)
            weights.append(np.exp(log_nu))
            remainder.append(np.exp(log_rem))
            alpha.append(state.alpha.copy())
            atoms.append([a.copy() for a in state.atoms])
            for k in hyp:
                hyp[k].append(getattr(state, k))
    diagnostics = {
        "kstar": np.array(trace["kstar"]),
        "k_tilde": np.array(trace["k_tilde"]),
        "phi_accept_rate": float(np.mean(trace["phi_accept"])) if trace["phi_accept"] else float("nan"),
    }
    if trace["w_accept"]:
        diagnostics["w_accept_rate"] = float(np.mean(trace["w_accept"]))
    return PosteriorDraws(
        schema=dataset.schema, kind="dynamic", weights=weights, remainder=remainder,
        atoms=atoms, alpha=alpha, chain=np.full(len(weights), config.stream),
        link=link.name, dirichlet=list(dir_hyper.concentrations), diagnostics=diagnostics,
        **{k: np.array(v) for k, v in hyp.items()})


def run_chains(dataset, config, n_chains=1):
    """Independent chains on distinct generator streams, concatenated."""
    parts = [run_chain(dataset, replace(config, stream=config.stream + c)) for c in range(n_chains)]
    return parts[0] if n_chains == 1 else PosteriorDraws.concatenate(parts)
