import numpy as np
import pytest

from dynparafac.distributions import make_rng
from dynparafac.kalman import ffbs, kalman_filter, rts_smoother


def joint_cov(T, mu, phi, q, r):
    """Dense prior moments of (alpha_1..T, y_1..T)."""
    v0 = q / (1 - phi ** 2)
    idx = np.arange(T)
    Ca = v0 * phi ** np.abs(idx[:, None] - idx[None, :])
    m = np.full(T, mu / (1 - phi))
    return m, Ca, Ca + r * np.eye(T)


def test_single_time_conjugate_update():
    mu, phi, q, r, y = 0.2, 0.6, 0.3, 0.1, 1.4
    m0, v0 = mu / (1 - phi), q / (1 - phi ** 2)
    f = kalman_filter([y], mu, phi, q, r)
    assert f.mean[0, 0] == pytest.approx((v0 * y + r * m0) / (v0 + r), rel=1e-14)
    assert f.var[0] == pytest.approx(v0 * r / (v0 + r), rel=1e-14)


def test_smoother_matches_dense_conditioning():
    T, mu, phi, q, r = 6, -0.1, 0.7, 0.4, 0.2
    y = make_rng(1).normal(size=T)
    m, Ca, Cy = joint_cov(T, mu, phi, q, r)
    K = Ca @ np.linalg.inv(Cy)
    post_m = m + K @ (y - m)
    post_v = np.diag(Ca - K @ Ca)
    f = kalman_filter(y, mu, phi, q, r)
    ms, Ps = rts_smoother(f, phi)
    assert np.allclose(ms[:, 0], post_m, atol=1e-10)
    assert np.allclose(Ps, post_v, atol=1e-10)


def test_ffbs_moments_match_smoother():
    T, mu, phi, q, r = 4, 0.3, 0.5, 0.5, 0.3
    y = np.array([0.8, -0.2, 1.1, 0.4])
    m, Ca, Cy = joint_cov(T, mu, phi, q, r)
    K = Ca @ np.linalg.inv(Cy)
    post_m = m + K @ (y - m)
    post_C = Ca - K @ Ca
    Y = np.repeat(y[:, None], 50000, axis=1)
    draws = ffbs(Y, mu, phi, q, r, make_rng(2))
    se = np.sqrt(np.diag(post_C) / draws.shape[1])
    assert np.all(np.abs(draws.mean(axis=1) - post_m) < 4 * se)
    emp = np.cov(draws)
    # full joint covariance, not only the marginals
    assert np.allclose(emp, post_C, atol=0.01)


def test_uninformative_observations_give_prior_paths():
    T, mu, phi, q = 3, 0.1, 0.8, 0.2
    y = np.full((T, 40000), 50.0)
    draws = ffbs(y, mu, phi, q, 1e12, make_rng(3))
    m, Ca, _ = joint_cov(T, mu, phi, q, 0.0)
    assert np.allclose(draws.mean(axis=1), m, atol=0.03)
    assert np.allclose(np.cov(draws), Ca, atol=0.03)


def test_vector_input_returns_vector():
    out = ffbs(np.zeros(5), 0.0, 0.5, 1.0, 1.0, make_rng(4))
    assert out.shape == (5,)
