import json

import numpy as np
import pytest

import dynparafac.cli as cli
from dynparafac.cli import main
from dynparafac.data_io import read_draws
from dynparafac.model import CategoricalSchema, DirichletHyper, prior_moments
from dynparafac.sampler import NumericalAbort


def config(tmp_path, cfg):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def test_moments_passthrough(tmp_path, capsys):
    cfg = {"moments": {"levels": [2, 3], "mu": 0.1, "phi": 0.6, "sigma_eta": 0.4,
                       "sigma_eps": 0.2, "cell": [0, 1], "cell2": [1, 2], "lag": 2}}
    assert main(["moments", "--config", config(tmp_path, cfg), "--out", str(tmp_path)]) == 0
    printed = json.loads(capsys.readouterr().out)
    ref = prior_moments(DirichletHyper.symmetric(CategoricalSchema([2, 3])), "probit",
                        0.1, 0.6, 0.4, 0.2, (0, 1), (1, 2), 2).as_dict()
    assert printed == ref
    assert json.loads((tmp_path / "moments.json").read_text()) == ref


def test_unknown_flag_exits_1(capsys):
    assert main(["fit", "--bogus"]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_subcommand_exits_1():
    assert main(["plot"]) == 1


def test_bad_config_exits_1(tmp_path):
    assert main(["simulate", "--config", config(tmp_path, {"simulation": {"colour": 1}}),
                 "--out", str(tmp_path)]) == 1
    assert main(["moments", "--config", str(tmp_path / "none.json")]) == 1


def test_missing_data_exits_1(tmp_path):
    assert main(["fit", "--out", str(tmp_path)]) == 1


def test_numeric_abort_exits_2(tmp_path, monkeypatch):
    cfg = config(tmp_path, {"simulation": {"T": 2, "levels": [2, 2], "n_t": [10, 10]}})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 0

    def boom(*args, **kw):
        raise NumericalAbort(3, "mu")

    monkeypatch.setattr(cli, "run_chains", boom)
    assert main(["fit", "--out", str(tmp_path)]) == 2


def test_chains_differ_and_rerun_reproduces(tmp_path):
    cfg = config(tmp_path, {"simulation": {"T": 2, "levels": [2, 3, 2], "n_t": [30, 40]}})
    outs = []
    for name in ("a", "b"):
        out = str(tmp_path / name)
        assert main(["simulate", "--config", cfg, "--seed", "7", "--out", out]) == 0
        assert main(["fit", "--seed", "7", "--iters", "40", "--burnin", "10", "--thin", "3",
                     "--chains", "2", "--out", out]) == 0
        outs.append(out)
    d = read_draws(f"{outs[0]}/draws.csv")
    assert d.n_draws == 20
    assert not np.array_equal(d.mu[d.chain == 0], d.mu[d.chain == 1])
    for f in ("draws.csv", "rho_summary.csv", "diagnostics.json", "data.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_loglinear_simulate_and_holdout(tmp_path):
    cfg = config(tmp_path, {"simulation": {"case": "loglinear-rw", "T": 3, "levels": [2] * 4,
                                           "n_t": [20, 20, 25], "holdout_last": True}})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert len((tmp_path / "holdout.csv").read_text().splitlines()) == 26
    assert len((tmp_path / "data.csv").read_text().splitlines()) == 41
    assert len((tmp_path / "truth_rho.csv").read_text().splitlines()) == 1 + 3 * 6
