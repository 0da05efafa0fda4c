"""Acceptance gate, criteria 1-9.

Each test prints one ``ACCEPTANCE <n> PASS|FAIL: ...`` line straight to the
terminal (even under output capture) and then asserts.
"""

import json
import os
import time

import numpy as np
import pytest
from scipy import stats

from dynparafac import (ChainConfig, SimulationSpec, StaticDXConfig, evaluate_rho_recovery,
                        fit_static_dx_by_time, forecast_table, generate_model_based,
                        independence_baseline, predictive_criteria, prior_moments, run_chain,
                        true_rho)
from dynparafac.cli import main as cli_main
from dynparafac.data_io import Dataset, ObservationBlock
from dynparafac.distributions import make_rng
from dynparafac.experiments import independence_forecast, tabulate
from dynparafac.geweke import geweke_test
from dynparafac.kalman import kalman_filter, rts_smoother
from dynparafac.model import CategoricalSchema, DirichletHyper, ParafacMixture, cell_probability
from dynparafac.sampler import (SamplerState, update_mu, update_phi, update_sigma_eps,
                                update_sigma_eta)
from dynparafac.sticks import StateHyper, sample_prior_trajectory, weights_from_states

DEFAULT_HYPER = dict(mu=0.0, phi=0.8, sigma_eps=0.1, sigma_eta=0.8)


@pytest.fixture
def report(capsys):
    def _report(n, ok, detail, t0):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {detail} [{time.time() - t0:.1f}s]")
        assert ok, detail
    return _report


# --- 1: prior moments against direct prior simulation --------------------

def _simulate_cell_probs(levels, mu, phi, s_eta, s_eps, T, n, rng, tol=1e-8):
    """pi_t(cell) for every cell, by simulating atoms and probit ladders directly."""
    H = 40
    sd0 = s_eta / np.sqrt(1 - phi ** 2)
    out = np.empty((n, T) + tuple(levels))
    for i0 in range(0, n, 5000):
        m = min(5000, n - i0)
        H_i = H
        while True:
            a = np.empty((m, T, H_i))
            a[:, 0] = mu / (1 - phi) + sd0 * rng.standard_normal((m, H_i))
            for t in range(1, T):
                a[:, t] = mu + phi * a[:, t - 1] + s_eta * rng.standard_normal((m, H_i))
            g = stats.norm.cdf(a + s_eps * rng.standard_normal(a.shape))
            rest = np.cumprod(1 - g, axis=2)
            if rest[:, :, -1].max() < tol:
                break
            H_i *= 2
        nu = g * np.concatenate([np.ones((m, T, 1)), rest[:, :, :-1]], axis=2)
        psi = [rng.dirichlet(np.ones(d), size=(m, H_i)) for d in levels]
        out[i0:i0 + m] = np.einsum("mth,mha,mhb->mtab", nu, psi[0], psi[1])
    return out


def test_acceptance_1_prior_moments(report):
    t0 = time.time()
    levels = (2, 3)
    mu, phi, s_eta, s_eps = 0.0, 0.5, 0.5, 0.3
    hyper = DirichletHyper.symmetric(CategoricalSchema(levels), 1.0)
    pi = _simulate_cell_probs(levels, mu, phi, s_eta, s_eps, T=3, n=50000, rng=make_rng(101))
    cell, other = (0, 0), (1, 2)  # fully mismatching
    worst, lines = 0.0, []
    x = pi[:, 0, cell[0], cell[1]]
    se = x.std(ddof=1) / np.sqrt(x.size)
    rep = prior_moments(hyper, "probit", mu, phi, s_eta, s_eps, cell, cell, 0)
    worst = max(worst, abs(x.mean() - rep.expectation) / se)
    prod = (x - x.mean()) ** 2
    worst = max(worst, abs(prod.mean() - rep.variance) / (prod.std(ddof=1) / np.sqrt(x.size)))
    for lag in (0, 1, 2):
        for c2 in (cell, other):
            y = pi[:, lag, c2[0], c2[1]]
            prod = (x - x.mean()) * (y - y.mean())
            rep = prior_moments(hyper, "probit", mu, phi, s_eta, s_eps, cell, c2, lag)
            z = abs(prod.mean() - rep.covariance) / (prod.std(ddof=1) / np.sqrt(x.size))
            worst = max(worst, z)
            lines.append(f"lag{lag}{'=' if c2 == cell else '!='}:{z:.2f}")
    report(1, worst < 3, f"max |MC - closed form| = {worst:.2f} SE ({', '.join(lines)})", t0)


# --- 2: truncation error of the weight ladder -----------------------------

def test_acceptance_2_truncation_error(report):
    t0 = time.time()
    hyper = StateHyper(DEFAULT_HYPER["mu"], DEFAULT_HYPER["phi"], DEFAULT_HYPER["sigma_eps"] ** 2,
                       DEFAULT_HYPER["sigma_eta"] ** 2)
    rng = make_rng(202)
    tails = np.empty((10000, 10))
    for i in range(10000):
        traj = sample_prior_trajectory(hyper, 10, 100, rng)
        nu, _ = weights_from_states(traj.W)
        tails[i] = 1.0 - nu.sum(axis=1)
    worst = float(np.abs(tails.mean(axis=0)).max())
    report(2, worst < 1e-6, f"max_t mean(1 - sum_h<=100 nu) = {worst:.3g}", t0)


# --- 3: Kalman recursions against dense Gaussian conditioning -----------

def test_acceptance_3_ffbs_exact(report):
    t0 = time.time()
    T, mu, phi, q, r = 5, 0.3, 0.7, 0.5, 0.2
    y = np.array([0.4, -0.1, 1.2, 0.8, 0.05])
    # joint covariance of (a, y)
    idx = np.arange(T)
    Saa = q / (1 - phi ** 2) * phi ** np.abs(idx[:, None] - idx[None, :])
    ma = np.full(T, mu / (1 - phi))
    filt = kalman_filter(y, mu, phi, q, r)
    ms, Ps = rts_smoother(filt, phi)
    err = 0.0
    for t in range(T):
        for sub, mean_k, var_k in ((idx[:t + 1], filt.mean[t, 0], filt.var[t]),
                                   (idx, ms[t, 0], Ps[t])):
            Syy = Saa[np.ix_(sub, sub)] + r * np.eye(sub.size)
            Say = Saa[t, sub]
            cm = ma[t] + Say @ np.linalg.solve(Syy, y[sub] - ma[sub])
            cv = Saa[t, t] - Say @ np.linalg.solve(Syy, Say)
            err = max(err, abs(cm - mean_k), abs(cv - var_k))
    report(3, err < 1e-8, f"max abs error of filtered/smoothed moments = {err:.2e}", t0)


# --- 4: conditional densities against a numerically normalized grid -------

def _log_joint(alpha, W, mu, phi, s2e, s2n, cfg):
    """Unnormalized log joint of the state block (priors included)."""
    if not (abs(phi) < 1 and s2e > 0 and s2n > 0):
        return -np.inf
    lp = stats.norm.logpdf(mu, cfg.mu0, np.sqrt(cfg.sigma2_0))
    lp += stats.invgamma.logpdf(s2e, cfg.m_eps / 2, scale=cfg.S_eps / 2)
    lp += stats.invgamma.logpdf(s2n, cfg.m_eta / 2, scale=cfg.S_eta / 2)
    lp += stats.norm.logpdf(alpha[0], mu / (1 - phi), np.sqrt(s2n / (1 - phi ** 2))).sum()
    lp += stats.norm.logpdf(alpha[1:], mu + phi * alpha[:-1], np.sqrt(s2n)).sum()
    lp += stats.norm.logpdf(W, alpha, np.sqrt(s2e)).sum()
    return lp


def _grid_chi2(draws, grid, logdens, bins=50):
    """Chi-square p-value of draws against equal-probability bins of a grid density."""
    dens = np.exp(logdens - logdens.max())
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    edges = np.interp(np.linspace(0, 1, bins + 1)[1:-1], cdf, grid)
    counts = np.bincount(np.searchsorted(edges, draws), minlength=bins)
    return stats.chisquare(counts).pvalue, cdf


def test_acceptance_4_conditional_oracles(report):
    t0 = time.time()
    cfg = ChainConfig()
    alpha = np.array([[0.3, -0.4], [0.5, -0.2], [0.1, -0.6]])
    W = alpha + np.array([[0.05, -0.1], [0.12, 0.02], [-0.07, 0.09]])
    base = dict(mu=0.1, phi=0.6, sigma2_eps=0.02, sigma2_eta=0.05)
    state = SamplerState(s=np.array([0, 1]), log_u=np.zeros(2), z=None, alpha=alpha, W=W,
                         atoms=[], **base)
    n = 100000
    rng = make_rng(404)
    pvals = {}

    def lj(**kw):
        p = dict(base, **kw)
        return _log_joint(alpha, W, p["mu"], p["phi"], p["sigma2_eps"], p["sigma2_eta"], cfg)

    grid = np.linspace(-3, 3, 60001)
    draws = np.array([update_mu(state, cfg, rng) for _ in range(n)])
    pvals["mu"] = _grid_chi2(draws, grid, np.array([lj(mu=m) for m in grid]))[0]

    lg = np.linspace(-14, 3, 40001)  # log sigma^2; Jacobian exp(lg)
    for name, upd in (("sigma2_eps", update_sigma_eps), ("sigma2_eta", update_sigma_eta)):
        draws = np.array([upd(state, cfg, rng) for _ in range(n)])
        logd = np.array([lj(**{name: np.exp(v)}) for v in lg]) + lg
        pvals[name] = _grid_chi2(np.log(draws), lg, logd)[0]

    # phi: start each step from an exact draw of the target; one MH step
    # must return another exact draw
    pg = np.linspace(-1 + 1e-7, 1 - 1e-7, 40001)
    logd = np.array([lj(phi=v) for v in pg])
    _, cdf = _grid_chi2(np.zeros(1), pg, logd)
    starts = np.interp(rng.random(n), cdf, pg)
    draws = np.empty(n)
    for i, s in enumerate(starts):
        state.phi = s
        draws[i], _ = update_phi(state, rng)
    state.phi = base["phi"]
    pvals["phi"] = _grid_chi2(draws, pg, logd)[0]

    ok = min(pvals.values()) > 0.01
    report(4, ok, "chi-square p-values " + ", ".join(f"{k}={v:.3f}" for k, v in pvals.items()), t0)


# --- 5: desk-scale dependence recovery, dynamic vs static ---------------

DESK = dict(levels=[3] * 8, **DEFAULT_HYPER)


def test_acceptance_5_rho_recovery(report):
    t0 = time.time()
    rows, wins = [], 0
    for seed in (1, 2, 3):
        spec = SimulationSpec(T=5, n_t=[120, 110, 150, 80, 100], seed=seed, **DESK)
        data, truth = generate_model_based(spec)
        rho = true_rho(truth)
        dyn = run_chain(data, ChainConfig(seed=seed))
        dx = fit_static_dx_by_time(data, StaticDXConfig(seed=seed))
        c_dyn = evaluate_rho_recovery(dyn.rho_mean(), rho).pooled
        c_dx = evaluate_rho_recovery(dx.rho_mean(), rho).pooled
        win = c_dyn >= 0.85 and c_dyn > c_dx
        wins += win
        rows.append(f"seed {seed}: dynamic {c_dyn:.3f} vs DX {c_dx:.3f}{' *' if win else ''}")
    report(5, wins >= 2, f"{wins}/3 seeds pass ({'; '.join(rows)})", t0)


# --- 6: recovery of a well-separated two-component mixture ---------------

def test_acceptance_6_posterior_recovery(report):
    t0 = time.time()
    schema = CategoricalSchema([2, 2])
    atoms = [np.array([[0.9, 0.1], [0.1, 0.9]]), np.array([[0.85, 0.15], [0.1, 0.9]])]
    weights = np.tile([0.6, 0.4], (3, 1))
    truth = ParafacMixture(schema, atoms, weights)
    rng = make_rng(606)
    blocks = []
    for t in range(3):
        s = rng.choice(2, size=500, p=weights[t])
        x = np.column_stack([(rng.random(500) < a[s, 1]).astype(int) for a in atoms])
        blocks.append(ObservationBlock(x, np.zeros_like(x, bool)))
    draws = run_chain(Dataset(schema, blocks), ChainConfig(seed=6))
    err = 0.0
    for t in range(3):
        for cell in [(0, 0), (0, 1), (1, 0), (1, 1)]:
            est = draws.cell_probability_draws(t, cell).mean()
            err = max(err, abs(est - cell_probability(truth, t, cell).value))
    report(6, err <= 0.03, f"max |posterior mean - truth| over 12 cells = {err:.4f}", t0)


# --- 7: forecasting the held-out wave -----------------------------------

def test_acceptance_7_prediction(report):
    t0 = time.time()
    rows, wins = [], 0
    for seed in (1, 2, 3):
        spec = SimulationSpec(T=6, n_t=[120, 110, 150, 80, 100, 120], seed=seed, **DESK)
        data, _ = generate_model_based(spec)
        fit, hold = data.subset(range(5)), data.subset([5])
        draws = run_chain(fit, ChainConfig(seed=seed))
        pairs = data.schema.pairs()
        n_future = int(hold.n_t[0])
        reps = forecast_table(draws, 1, n_future, pairs, seed=seed)
        ind = independence_forecast(independence_baseline(fit.subset([4])), n_future, pairs,
                                    draws.n_draws, seed=seed)
        x, mask, _ = hold.stacked()
        crit = {"dyn": [], "ind": []}
        for pr in pairs:
            obs = tabulate(x, mask, pr, data.schema.levels)
            crit["dyn"].append(predictive_criteria(reps[pr], obs))
            crit["ind"].append(predictive_criteria(ind[pr], obs))
        ad = {k: np.mean([c.mean_ad for c in v]) for k, v in crit.items()}
        mape = {k: np.mean([c.mean_mape for c in v]) for k, v in crit.items()}
        win = ad["dyn"] < ad["ind"] and mape["dyn"] < mape["ind"]
        wins += win
        rows.append(f"seed {seed}: AD {ad['dyn']:.1f} vs {ad['ind']:.1f}, "
                    f"MAPE {mape['dyn']:.3f} vs {mape['ind']:.3f}{' *' if win else ''}")
    report(7, wins >= 2, f"{wins}/3 seeds pass ({'; '.join(rows)})", t0)


# --- 8: joint distribution test of the full sweep ------------------------

def test_acceptance_8_geweke(report):
    t0 = time.time()
    res = geweke_test(cycles=10000, seed=8)
    zs = ", ".join(f"{n}={z:+.2f}" for n, z in zip(res.names, res.z))
    report(8, res.max_abs_z() < 4, f"max |z| = {res.max_abs_z():.2f} ({zs})", t0)


# --- 9: byte-identical CLI reruns -----------------------------------------

def _pipeline(out, cfg_path):
    codes = []
    for cmd in ("simulate", "fit", "baseline-dx", "evaluate", "predict", "moments"):
        codes.append(cli_main([cmd, "--config", cfg_path, "--seed", "9", "--out", out,
                               "--chains", "2" if cmd == "fit" else "1"]))
    return codes


def test_acceptance_9_determinism(report, tmp_path, capsys):
    t0 = time.time()
    cfg = {"simulation": {"T": 4, "levels": [3, 2, 4, 3], "n_t": [40, 50, 45, 60],
                          "missing_rate": 0.1, "holdout_last": True},
           "chain": {"iterations": 300, "burn_in": 100, "thin": 5},
           "dx": {"iterations": 300, "burn_in": 100, "thin": 5},
           "predict": {"margins": [[0, 1], [2, 3]]},
           "moments": {"levels": [3, 2, 4, 3], "cell": [0, 1, 2, 0], "lag": 1}}
    cfg_path = str(tmp_path / "config.json")
    with open(cfg_path, "w") as fh:
        json.dump(cfg, fh)
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    codes = _pipeline(a, cfg_path) + _pipeline(b, cfg_path)
    capsys.readouterr()
    files = sorted(os.listdir(a))
    same = files == sorted(os.listdir(b)) and all(
        open(os.path.join(a, f), "rb").read() == open(os.path.join(b, f), "rb").read()
        for f in files)
    ok = same and set(codes) == {0} and len(files) == 13
    report(9, ok, f"{len(files)} output files, identical={same}, exit codes={sorted(set(codes))}", t0)
