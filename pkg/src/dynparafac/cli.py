"""Command line driver.

Every subcommand reads an optional JSON config and works inside one
output directory::

    dynparafac simulate --config c.json --out run/   # data.csv, codebook.json, truth_rho.csv[, holdout.csv]
    dynparafac fit --out run/                        # draws.csv, rho_summary.csv, diagnostics.json
    dynparafac baseline-dx --out run/                # draws_dx.csv, rho_summary_dx.csv
    dynparafac evaluate --out run/                   # evaluation.json
    dynparafac predict --out run/                    # forecast.csv, prediction.json
    dynparafac moments --config c.json               # prior moment report on stdout (and moments.json)

Exit status: 0 on success, 1 on bad input or usage, 2 when the chain
produced non-finite values.
"""

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .baselines import StaticDXConfig, fit_static_dx_by_time, independence_baseline
from .data_io import (NUM_FMT, CodebookSpec, DataValidationError, ensure_dir, load_codebook,
                      load_dataset, read_draws, read_rho_table, save_codebook, write_dataset,
                      write_draws, write_rho_summary, write_rho_truth)
from .experiments import (SimulationSpec, evaluate_rho_recovery, forecast_table,
                          generate_loglinear_rw, generate_model_based, independence_forecast,
                          predictive_criteria, tabulate, true_rho)
from .model import CategoricalSchema, DirichletHyper, prior_moments
from .sampler import ChainConfig, NumericalAbort, run_chains

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--iters", type=int, help="total sweeps")
    common.add_argument("--burnin", type=int)
    common.add_argument("--thin", type=int)
    common.add_argument("--out", help="output directory (default: current directory)")
    common.add_argument("--chains", type=int, default=1)
    parser = _Parser(prog="dynparafac", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in [("simulate", "simulate a synthetic dataset"),
                        ("fit", "fit the dynamic model"),
                        ("evaluate", "compare posterior dependence with the truth"),
                        ("predict", "forecast the held-out wave"),
                        ("moments", "prior moments of cell probabilities"),
                        ("baseline-dx", "fit the static DP mixture wave by wave")]:
        p = sub.add_parser(name, parents=[common], help=help_)
        if name in ("fit", "baseline-dx"):
            p.add_argument("--data", help="data CSV (default <out>/data.csv)")
            p.add_argument("--codebook", help="codebook JSON (default <out>/codebook.json)")
    return parser


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataValidationError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise DataValidationError("config must be a JSON object")
    return cfg


def _make(cls, section, **overrides):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(section) - names
    if unknown:
        raise DataValidationError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kw = dict(section)
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return cls(**kw)


def _schedule(args):
    return {"seed": args.seed, "iterations": args.iters, "burn_in": args.burnin, "thin": args.thin}


def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_data(args, out):
    codebook = load_codebook(args.codebook or os.path.join(out, "codebook.json"))
    return load_dataset(args.data or os.path.join(out, "data.csv"), codebook), codebook


def cmd_simulate(args, cfg, out):
    sim = dict(cfg.get("simulation", {}))
    holdout = bool(sim.pop("holdout_last", False))
    spec = _make(SimulationSpec, sim, seed=args.seed)
    if spec.case == "model-based":
        dataset, truth = generate_model_based(spec)
    else:
        dataset, truth = generate_loglinear_rw(spec)
    pairs = spec.schema.pairs()
    rho = true_rho(truth, pairs)
    codebook = CodebookSpec.identity(spec.schema)
    save_codebook(codebook, os.path.join(out, "codebook.json"))
    write_rho_truth(rho, pairs, os.path.join(out, "truth_rho.csv"), dataset.times)
    if holdout:
        if dataset.T < 2:
            raise DataValidationError("holdout_last needs T >= 2")
        write_dataset(dataset.subset([dataset.T - 1]), os.path.join(out, "holdout.csv"), codebook)
        dataset = dataset.subset(range(dataset.T - 1))
    write_dataset(dataset, os.path.join(out, "data.csv"), codebook)
    return EXIT_OK


def cmd_fit(args, cfg, out):
    dataset, _ = _read_data(args, out)
    config = _make(ChainConfig, cfg.get("chain", {}), **_schedule(args))
    draws = run_chains(dataset, config, args.chains)
    write_draws(draws, os.path.join(out, "draws.csv"))
    write_rho_summary(draws, os.path.join(out, "rho_summary.csv"), time_labels=dataset.times)
    diag = draws.diagnostics if args.chains > 1 else {"chain0": draws.diagnostics}
    summary = {}
    for name, d in diag.items():
        summary[name] = {
            "kstar_mean": float(np.mean(d["kstar"])),
            "kstar_max": int(np.max(d["kstar"])),
            "k_tilde_max": int(np.max(d["k_tilde"])),
            "phi_accept_rate": d["phi_accept_rate"],
        }
        if "w_accept_rate" in d:
            summary[name]["w_accept_rate"] = d["w_accept_rate"]
    hyp = draws.hyper_table()
    summary["posterior_mean"] = dict(zip(("mu", "phi", "sigma2_eps", "sigma2_eta"),
                                         map(float, hyp.mean(axis=0))))
    summary["n_draws"] = draws.n_draws
    _dump_json(summary, os.path.join(out, "diagnostics.json"))
    return EXIT_OK


def cmd_baseline_dx(args, cfg, out):
    dataset, _ = _read_data(args, out)
    config = _make(StaticDXConfig, cfg.get("dx", {}), **_schedule(args))
    draws = fit_static_dx_by_time(dataset, config)
    write_draws(draws, os.path.join(out, "draws_dx.csv"))
    write_rho_summary(draws, os.path.join(out, "rho_summary_dx.csv"), time_labels=dataset.times)
    return EXIT_OK


def _recovery(summary_path, truth):
    est = read_rho_table(summary_path)
    keys = [k for k in truth if k in est]
    if not keys:
        raise DataValidationError(f"{summary_path} shares no (t, j, j2) rows with the truth")
    times = list(dict.fromkeys(k[0] for k in keys))
    per_time = {}
    for t in times:
        ks = [k for k in keys if k[0] == t]
        per_time[t] = evaluate_rho_recovery(np.array([[est[k] for k in ks]]),
                                            np.array([[truth[k] for k in ks]])).pooled
    pooled = evaluate_rho_recovery(np.array([[est[k] for k in keys]]),
                                   np.array([[truth[k] for k in keys]])).pooled
    clean = lambda v: None if np.isnan(v) else v
    return {"pooled": clean(pooled), "per_time": {str(t): clean(v) for t, v in per_time.items()}}


def cmd_evaluate(args, cfg, out):
    truth = read_rho_table(os.path.join(out, "truth_rho.csv"))
    result = {}
    for name, fname in (("dynamic", "rho_summary.csv"), ("static_dx", "rho_summary_dx.csv")):
        path = os.path.join(out, fname)
        if os.path.exists(path):
            result[name] = _recovery(path, truth)
    if not result:
        raise DataValidationError(f"no rho summaries found in {out}")
    _dump_json(result, os.path.join(out, "evaluation.json"))
    return EXIT_OK


def cmd_predict(args, cfg, out):
    pcfg = cfg.get("predict", {})
    draws = read_draws(os.path.join(out, "draws.csv"))
    codebook = load_codebook(os.path.join(out, "codebook.json"))
    holdout = load_dataset(os.path.join(out, "holdout.csv"), codebook)
    data = load_dataset(os.path.join(out, "data.csv"), codebook)
    levels = draws.schema.levels
    margins = [tuple(m) for m in pcfg.get("margins", [list(range(min(draws.schema.p, 4)))])]
    horizon = int(pcfg.get("horizon", 1))
    seed = args.seed if args.seed is not None else int(pcfg.get("seed", 0))
    x, mask, _ = holdout.stacked()
    n_future = int(holdout.n_t.sum())
    reps = forecast_table(draws, horizon, n_future, margins, seed)
    marg = independence_baseline(data.subset([data.T - 1]))
    ind = independence_forecast(marg, n_future, margins, draws.n_draws, seed)
    result = {"n_future": n_future, "horizon": horizon, "margins": {}}
    rows = ["margin,cell,observed,forecast_mean,independence_mean"]
    for m in margins:
        obs = tabulate(x, mask, m, levels)
        dyn = predictive_criteria(reps[m], obs)
        base = predictive_criteria(ind[m], obs)
        key = "-".join(str(j + 1) for j in m)
        result["margins"][key] = {
            "dynamic": {"AD": dyn.mean_ad, "MAPE": dyn.mean_mape},
            "independence": {"AD": base.mean_ad, "MAPE": base.mean_mape},
        }
        fm, im = reps[m].mean(axis=0), ind[m].mean(axis=0)
        for c in range(obs.size):
            rows.append(f"{key},{c + 1},{obs[c]},{NUM_FMT % fm[c]},{NUM_FMT % im[c]}")
    with open(os.path.join(out, "forecast.csv"), "w") as fh:
        fh.write("\n".join(rows) + "\n")
    _dump_json(result, os.path.join(out, "prediction.json"))
    return EXIT_OK


def cmd_moments(args, cfg, out):
    m = dict(cfg.get("moments", {}))
    levels = m.pop("levels", [2, 3])
    a = m.pop("dirichlet", 1.0)
    hyper = (DirichletHyper.symmetric(CategoricalSchema(levels), float(a)) if np.isscalar(a)
             else DirichletHyper(a))
    kw = {"link": "probit", "mu": 0.0, "phi": 0.5, "sigma_eta": 0.5, "sigma_eps": 0.3,
          "cell": [0] * len(levels), "cell2": None, "lag": 0}
    unknown = set(m) - set(kw)
    if unknown:
        raise DataValidationError(f"unknown moments keys: {sorted(unknown)}")
    kw.update(m)
    if kw["cell2"] is None:
        kw["cell2"] = kw["cell"]
    report = prior_moments(hyper, **kw).as_dict()
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.out:
        with open(os.path.join(out, "moments.json"), "w") as fh:
            fh.write(text + "\n")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "evaluate": cmd_evaluate,
            "predict": cmd_predict, "moments": cmd_moments, "baseline-dx": cmd_baseline_dx}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help exits 0; every parse error already maps to EXIT_INVALID
        return int(exc.code or 0)
    try:
        if args.chains < 1:
            raise DataValidationError("--chains must be >= 1")
        cfg = _load_config(args.config)
        out = ensure_dir(args.out or ".")
        return COMMANDS[args.command](args, cfg, out)
    except NumericalAbort as exc:
        print(f"dynparafac: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError, KeyError, TypeError) as exc:
        print(f"dynparafac: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
