import numpy as np
import pytest
from scipy import stats

from dynparafac.distributions import make_rng
from dynparafac.sticks import (LadderOverflow, StateHyper, StateTrajectory, extend_to_cover,
                               forecast_states, log_weights_from_states, sample_prior_trajectory,
                               truncation_level, weights_from_states)


def naive_ladder(W):
    g = stats.norm.cdf(W)
    out = np.empty_like(g)
    for h in range(g.size):
        out[h] = g[h] * np.prod([1 - g[l] for l in range(h)])
    return out, np.prod(1 - g)


def test_zero_states_give_halving_ladder():
    nu, rem = weights_from_states([0.0, 0.0, 0.0])
    assert np.allclose(nu, [0.5, 0.25, 0.125], rtol=0, atol=1e-15)
    assert rem == pytest.approx(0.125, abs=1e-15)


def test_huge_first_state_takes_everything():
    nu, rem = weights_from_states([40.0, 0.0, -1.0])
    assert nu[0] == 1.0
    assert np.all(nu[1:] < 1e-300)


def test_ladder_matches_naive_loop():
    W = make_rng(1).normal(0, 1.5, size=25)
    nu, rem = weights_from_states(W)
    ref, ref_rem = naive_ladder(W)
    assert np.allclose(nu, ref, rtol=1e-12, atol=1e-300)
    assert rem == pytest.approx(ref_rem, rel=1e-12)
    assert nu.sum() + rem == pytest.approx(1.0, abs=1e-14)


def test_trailing_columns_do_not_change_earlier_weights():
    W = make_rng(2).normal(size=(3, 8))
    more = np.concatenate([W, make_rng(3).normal(size=(3, 5))], axis=1)
    assert np.array_equal(weights_from_states(W)[0], weights_from_states(more)[0][:, :8])


def test_deep_ladder_in_log_space():
    # 600 states at -2 leave (1 - Phi(-2))^600 ~ 1e-6 but each weight stays positive
    log_nu, log_rem = log_weights_from_states(np.full(600, -2.0))
    assert np.all(np.isfinite(log_nu))
    assert log_rem == pytest.approx(600 * np.log(stats.norm.sf(-2.0)), rel=1e-12)


def test_phi_must_be_inside_unit_interval():
    with pytest.raises(ValueError):
        StateHyper(0.0, 1.0, 0.1, 0.1)
    with pytest.raises(ValueError):
        StateHyper(0.0, 0.5, 0.0, 0.1)


def test_prior_trajectory_phi_zero_is_iid():
    hyper = StateHyper(0.3, 0.0, 0.01, 0.64)
    traj = sample_prior_trajectory(hyper, 4, 25000, make_rng(4))
    a = traj.alpha.ravel()
    se_m = a.std() / np.sqrt(a.size)
    assert abs(a.mean() - 0.3) < 3 * se_m
    se_v = np.sqrt(2 * 0.64 ** 2 / a.size)
    assert abs(a.var() - 0.64) < 3 * se_v


def test_prior_trajectory_moments():
    hyper = StateHyper(0.0, 0.8, 0.01, 0.64)
    traj = sample_prior_trajectory(hyper, 4, 100000, make_rng(5))
    v = 0.64 / (1 - 0.8 ** 2)
    W = traj.W
    assert abs(W[2].var() - (v + 0.01)) < 3 * np.sqrt(2 / W.shape[1]) * (v + 0.01)
    for k in (1, 2, 3):
        c = np.mean(traj.alpha[0] * traj.alpha[k])
        se = np.std(traj.alpha[0] * traj.alpha[k]) / np.sqrt(W.shape[1])
        assert abs(c - 0.8 ** k * v) < 3 * se


def test_prior_trajectory_reproducible():
    hyper = StateHyper(0.0, 0.8, 0.01, 0.64)
    a = sample_prior_trajectory(hyper, 3, 7, make_rng(6))
    b = sample_prior_trajectory(hyper, 3, 7, make_rng(6))
    assert np.array_equal(a.W, b.W)


@pytest.mark.parametrize("u,k", [(0.2, 3), (0.6, 1), (0.125, 4), (1.0, 1)])
def test_truncation_level_halving(u, k):
    ladder = 0.5 ** np.arange(1, 12)
    assert truncation_level(ladder, u) == k


def test_truncation_level_is_max_over_times():
    rng = make_rng(7)
    W = rng.normal(size=(4, 30))
    nu, _ = weights_from_states(W)
    u = rng.uniform(0.01, 0.3, size=4)
    per_time = []
    for t in range(4):
        k = 1
        while nu[t, :k].sum() <= 1 - u[t]:
            k += 1
        per_time.append(k)
    assert truncation_level(nu, u) == max(per_time)


def test_truncation_level_needs_more_columns():
    assert truncation_level([0.5, 0.25], 0.1) is None
    with pytest.raises(ValueError):
        truncation_level([0.5], 0.0)


def test_extend_to_cover_meets_condition():
    hyper = StateHyper(0.0, 0.8, 0.01, 0.64)
    traj = sample_prior_trajectory(hyper, 3, 2, make_rng(8))
    u = np.array([1e-3, 1e-5, 1e-2])
    out, k = extend_to_cover(traj, hyper, u, make_rng(9))
    assert out.H == k
    assert np.array_equal(out.W[:, :2], traj.W)
    nu, _ = weights_from_states(out.W)
    assert np.all(nu.sum(axis=1) > 1 - u)
    assert truncation_level(nu, u) == k


def test_extend_to_cover_overflow():
    # states near -8: each stick removes ~1e-15 of mass
    hyper = StateHyper(-8.0 * 0.01, 0.99, 1e-6, 1e-6)
    traj = StateTrajectory(np.zeros((1, 0)), np.zeros((1, 0)))
    with pytest.raises(LadderOverflow):
        extend_to_cover(traj, hyper, 0.5, make_rng(10), max_components=200)


def test_forecast_frozen_dynamics():
    a_last = np.array([0.4, -0.3, 1.0])
    hyper = StateHyper(0.0, 1 - 1e-9, 1e-14, 1e-14)
    w, rem = forecast_states(a_last, hyper, 2, 5, make_rng(11))
    ref, ref_rem = weights_from_states(a_last)
    assert w.shape == (5, 2, 3)
    assert np.allclose(w, ref, atol=1e-6)
    assert np.allclose(rem, ref_rem, atol=1e-6)


def test_forecast_phi_zero_ignores_last_state():
    hyper = StateHyper(0.2, 0.0, 0.1, 0.5)
    w1, _ = forecast_states(np.array([5.0, -5.0]), hyper, 1, 20000, make_rng(12))
    w2, _ = forecast_states(np.array([-5.0, 5.0]), hyper, 1, 20000, make_rng(12))
    assert np.array_equal(w1, w2)


def test_forecast_first_weight_mean_matches_monte_carlo():
    a_last = np.array([0.7, 0.1])
    hyper = StateHyper(0.1, 0.6, 0.04, 0.25)
    w, _ = forecast_states(a_last, hyper, 1, 100000, make_rng(13))
    # one step ahead W ~ N(mu + phi a, s2_eta + s2_eps); E Phi(W) is closed form
    m, v = 0.1 + 0.6 * 0.7, 0.25 + 0.04
    exact = stats.norm.cdf(m / np.sqrt(1 + v))
    x = w[:, 0, 0]
    assert abs(x.mean() - exact) < 3 * x.std() / np.sqrt(x.size)


def test_forecast_rejects_zero_horizon():
    with pytest.raises(ValueError):
        forecast_states([0.0], StateHyper(0, 0.5, 1, 1), 0, 1, make_rng(0))


def test_mass_beyond_100_components_is_small():
    hyper = StateHyper(0.0, 0.8, 0.01, 0.64)
    traj = sample_prior_trajectory(hyper, 10, 100 * 2000, make_rng(14))
    _, rem = weights_from_states(traj.W.reshape(10, 2000, 100))
    assert rem.mean() < 1e-6
