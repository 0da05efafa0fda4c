"""Dynamic stick-breaking weights driven by AR(1) Gaussian states.

The weight on component ``h`` at time ``t`` is

    nu[t, h] = g(W[t, h]) * prod_{l < h} (1 - g(W[t, l]))

with ``W = alpha + eps`` and ``alpha`` a stationary AR(1) per component.
Products are accumulated in log space so that deep components with
tiny weights never underflow to an exact zero before they should.
"""

from dataclasses import dataclass

import numpy as np

from .links import get_link

MAX_COMPONENTS = 20000


class LadderOverflow(RuntimeError):
    """The weight ladder needed more than ``MAX_COMPONENTS`` columns."""


@dataclass(frozen=True)
class StateHyper:
    """Parameters of the state equations: mean shift, AR coefficient, two noise variances."""

    mu: float
    phi: float
    sigma2_eps: float
    sigma2_eta: float

    def __post_init__(self):
        if not abs(self.phi) < 1:
            raise ValueError(f"|phi| must be < 1, got {self.phi}")
        if not (self.sigma2_eps > 0 and self.sigma2_eta > 0):
            raise ValueError("state variances must be positive")

    @property
    def stationary_mean(self):
        return self.mu / (1.0 - self.phi)

    @property
    def stationary_var(self):
        return self.sigma2_eta / (1.0 - self.phi ** 2)

    @property
    def marginal_var_w(self):
        return self.stationary_var + self.sigma2_eps


@dataclass
class StateTrajectory:
    alpha: np.ndarray  # (T, H)
    W: np.ndarray  # (T, H)

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.W = np.asarray(self.W, dtype=float)
        if self.alpha.shape != self.W.shape or self.alpha.ndim != 2:
            raise ValueError("alpha and W must be matching (T, H) arrays")
        if not (np.all(np.isfinite(self.alpha)) and np.all(np.isfinite(self.W))):
            raise ValueError("state trajectory has non-finite entries")

    @property
    def T(self):
        return self.alpha.shape[0]

    @property
    def H(self):
        return self.alpha.shape[1]


def log_weights_from_states(W, link="probit"):
    """Log weights and log remainder of the ladder(s) in the last axis of ``W``."""
    link = get_link(link)
    W = np.asarray(W, dtype=float)
    log_g = link.log_cdf(W)
    log_1mg = link.log_sf(W)
    log_tail = np.cumsum(log_1mg, axis=-1)
    log_before = np.concatenate(
        [np.zeros(W.shape[:-1] + (1,)), log_tail[..., :-1]], axis=-1)
    if W.shape[-1] == 0:
        return log_g, np.zeros(W.shape[:-1])
    return log_g + log_before, log_tail[..., -1]


def weights_from_states(W, link="probit"):
    """Stick-breaking ladder built from states ``W`` (last axis = components).

    Returns
    -------
    weights : ndarray
        Same shape as ``W``.
    remainder : ndarray
        Mass left beyond the last component, ``prod_h (1 - g(W_h))``.
    """
    log_nu, log_rem = log_weights_from_states(W, link)
    return np.exp(log_nu), np.exp(log_rem)


def sample_prior_trajectory(hyper, T, H, rng):
    """Draw ``H`` independent AR(1) state paths of length ``T`` from the prior."""
    if T < 1 or H < 0:
        raise ValueError("need T >= 1 and H >= 0")
    alpha = np.empty((T, H))
    alpha[0] = hyper.stationary_mean + np.sqrt(hyper.stationary_var) * rng.standard_normal(H)
    sd_eta = np.sqrt(hyper.sigma2_eta)
    for t in range(1, T):
        alpha[t] = hyper.mu + hyper.phi * alpha[t - 1] + sd_eta * rng.standard_normal(H)
    W = alpha + np.sqrt(hyper.sigma2_eps) * rng.standard_normal((T, H))
    return StateTrajectory(alpha, W)


def truncation_level(weights, u_min):
    """Smallest ``k`` with ``sum_{h<=k} weights[t, h] > 1 - u_min`` for every ``t``.

    ``weights`` is a (T, H) ladder (or a single ladder); ``u_min`` is a
    scalar or one value per time. Returns ``None`` when the supplied
    columns are not enough, so callers can extend and retry.
    """
    w = np.atleast_2d(np.asarray(weights, dtype=float))
    u = np.broadcast_to(np.asarray(u_min, dtype=float), (w.shape[0],))
    if np.any(u <= 0) or np.any(u > 1):
        raise ValueError("u_min must lie in (0, 1]")
    if w.shape[1] == 0:
        return None
    covered = np.cumsum(w, axis=1) > (1.0 - u)[:, None]
    if not np.all(covered[:, -1]):
        return None
    return int(np.argmax(covered, axis=1).max()) + 1


def extend_to_cover(traj, hyper, u_min, rng, link="probit", block=5, max_components=MAX_COMPONENTS):
    """Append prior-drawn state columns until the ladder covers ``1 - u_min``.

    New columns start from the stationary law at ``t = 1`` and are
    propagated through the state equations; each new block is as wide as
    the current ladder (at least ``block``), so growth is geometric.
    Returns the extended trajectory (trimmed to exactly ``k_tilde``
    columns) and ``k_tilde``. Raises :class:`LadderOverflow` when the
    weights are so small that more than ``max_components`` are needed.
    """
    u = np.broadcast_to(np.asarray(u_min, dtype=float), (traj.T,))
    if np.any(u <= 0):
        raise ValueError("u_min must be positive")
    log_u = np.log(u)
    alpha, W = traj.alpha, traj.W
    link = get_link(link)
    while True:
        if W.shape[1]:
            ok = np.cumsum(link.log_sf(W), axis=1) < log_u[:, None]
            if np.all(ok[:, -1]):
                k_tilde = int(np.argmax(ok, axis=1).max()) + 1
                return StateTrajectory(alpha[:, :k_tilde], W[:, :k_tilde]), k_tilde
        if W.shape[1] >= max_components:
            raise LadderOverflow(f"weight ladder exceeds {max_components} components")
        width = min(max(block, W.shape[1]), max_components - W.shape[1])
        new = sample_prior_trajectory(hyper, traj.T, width, rng)
        alpha = np.concatenate([alpha, new.alpha], axis=1)
        W = np.concatenate([W, new.W], axis=1)


def forecast_states(alpha_last, hyper, horizon, draws, rng, link="probit"):
    """Push the final latent states forward and return forecast ladders.

    Parameters
    ----------
    alpha_last : array_like, shape (H,)
        States at the last fitted time.
    horizon : int
        Number of steps ahead (>= 1).
    draws : int
        Number of independent forward paths.

    Returns
    -------
    weights : ndarray, shape (draws, horizon, H)
    remainder : ndarray, shape (draws, horizon)
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    a = np.broadcast_to(np.asarray(alpha_last, dtype=float), (draws,) + np.shape(alpha_last)).copy()
    H = a.shape[1]
    sd_eta = np.sqrt(hyper.sigma2_eta)
    sd_eps = np.sqrt(hyper.sigma2_eps)
    W = np.empty((draws, horizon, H))
    for step in range(horizon):
        a = hyper.mu + hyper.phi * a + sd_eta * rng.standard_normal((draws, H))
        W[:, step] = a + sd_eps * rng.standard_normal((draws, H))
    return weights_from_states(W, link)
