"""Scalar local-level Kalman recursions for the AR(1) weight states.

Model, run independently for every column ``h``::

    y[t]     = a[t] + eps,            eps ~ N(0, s2_obs)
    a[t]     = mu + phi a[t-1] + eta, eta ~ N(0, s2_state)
    a[1]     ~ N(mu / (1 - phi), s2_state / (1 - phi^2))

Every column shares the same parameters, so the variance recursions are
computed once as length-``T`` vectors and the means are (T, H) arrays.
"""

from typing import NamedTuple

import numpy as np


class FilterResult(NamedTuple):
    mean: np.ndarray  # filtered means, (T, H)
    var: np.ndarray  # filtered variances, (T,)
    pred_mean: np.ndarray  # one-step predictive means, (T, H)
    pred_var: np.ndarray  # (T,)


def kalman_filter(y, mu, phi, s2_state, s2_obs):
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    T, H = y.shape
    m = np.empty((T, H))
    P = np.empty(T)
    a = np.empty((T, H))
    R = np.empty(T)
    a[0] = mu / (1.0 - phi)
    R[0] = s2_state / (1.0 - phi ** 2)
    for t in range(T):
        if t > 0:
            a[t] = mu + phi * m[t - 1]
            R[t] = phi ** 2 * P[t - 1] + s2_state
        gain = R[t] / (R[t] + s2_obs)
        m[t] = a[t] + gain * (y[t] - a[t])
        P[t] = (1.0 - gain) * R[t]
    return FilterResult(m, P, a, R)


def rts_smoother(filt, phi):
    """Smoothed means and variances from a :func:`kalman_filter` result."""
    m, P, a, R = filt
    T = m.shape[0]
    ms = m.copy()
    Ps = P.copy()
    for t in range(T - 2, -1, -1):
        J = phi * P[t] / R[t + 1]
        ms[t] = m[t] + J * (ms[t + 1] - a[t + 1])
        Ps[t] = P[t] + J ** 2 * (Ps[t + 1] - R[t + 1])
    return ms, Ps


def ffbs(y, mu, phi, s2_state, s2_obs, rng):
    """Joint draw of the state paths given ``y`` (forward filter, backward sample)."""
    y = np.asarray(y, dtype=float)
    squeeze = y.ndim == 1
    filt = kalman_filter(y, mu, phi, s2_state, s2_obs)
    m, P, _, R = filt
    T, H = m.shape
    out = np.empty((T, H))
    out[-1] = m[-1] + np.sqrt(P[-1]) * rng.standard_normal(H)
    for t in range(T - 2, -1, -1):
        J = phi * P[t] / R[t + 1]
        mean = m[t] + J * (out[t + 1] - mu - phi * m[t])
        var = P[t] - J * phi * P[t]
        out[t] = mean + np.sqrt(max(var, 0.0)) * rng.standard_normal(H)
    return out[:, 0] if squeeze else out
