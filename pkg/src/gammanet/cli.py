"""Experiment runner: train over seeds, evaluate at probes, emit CSV/JSON.

Subcommands:
    run <config>                 train + evaluate each seed, write metrics
    compare <files...> -o out    join series and renormalize across them
    oracle mdp <config>          print analytic chain values per probe
    probes <config>              train fixed-timescale baselines per probe
    interp <config>              interpolation-baseline sweep

The env var GAMMANET_THREADS caps the per-seed worker pool.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import deep as deep_mod
from .config import ConfigError, ExperimentConfig, load_config, validate
from .environments import FiniteMDPEnv, SquareWaveEnv, load_trace
from .evaluation import (
    MetricsReport,
    analytic_mdp_values,
    interpolate_prediction,
    normalized_mse,
    prediction_correlation,
    train_probe_suite,
    true_return_periodic,
)
from .features import TileLayerSpec, build_tile_coder
from .linear import FixedBaseline, LinearGammaNet, run_online
from .timescale import Timescale, sample_training_set

DEFAULT_TILINGS = ((20, 1.0), (20, 0.5), (30, 0.1))
PREDICTIONS_CSV_COLUMNS = ("series", "tau", "point", "prediction", "true_return")
LEARNING_CURVE_CSV_COLUMNS = ("series", "step", "tau", "mse")


# -- environment / learner construction -------------------------------------

def _build_environment(cfg: ExperimentConfig, seed_rng, obs_kind="scalar"):
    env_cfg = cfg.environment
    if cfg.kind == "squarewave":
        return SquareWaveEnv(period=int(env_cfg.get("period", 100)))
    if cfg.kind == "mdp":
        return FiniteMDPEnv(
            env_cfg["transition_matrix"],
            env_cfg["cumulants"],
            env_cfg.get("terminals", ()),
            int(env_cfg.get("start_state", 0)),
            rng=seed_rng,
            obs_kind=obs_kind,
        )
    base = Path(cfg.path).parent if cfg.path else Path.cwd()
    return load_trace(base / env_cfg["path"])


def _tile_layers(cfg: ExperimentConfig):
    tilings = cfg.learner.get("tilings", DEFAULT_TILINGS)
    return [TileLayerSpec(int(n), float(w)) for n, w in tilings]


def _state_dim(cfg: ExperimentConfig, env) -> int:
    if cfg.kind == "trace":
        return env.obs_dim
    return 1


def _build_linear(cfg: ExperimentConfig, env, coder_rng) -> LinearGammaNet:
    mode = cfg.input_mode()
    index_space = int(cfg.learner.get("index_space", 0)) or None
    coder = build_tile_coder(
        _tile_layers(cfg),
        input_dim=_state_dim(cfg, env) + mode.n_inputs,
        index_space=index_space,
        include_bias=bool(cfg.learner.get("bias", False)),
        rng=coder_rng,
    )
    return LinearGammaNet(
        coder, mode,
        step_size=float(cfg.learner.get("step_size", 0.1)),
        divide_by_active=bool(cfg.learner.get("divide_by_active", True)),
        loss_scaling=cfg.loss_scaling,
    )


def _build_deep(cfg: ExperimentConfig, phi_dim: int, net_rng) -> deep_mod.DeepGammaNet:
    net = deep_mod.DeepGammaNet(
        phi_dim=phi_dim,
        layer_sizes=tuple(cfg.learner.get("layer_sizes", (32, 16, 8, 4, 1))),
        embedding=deep_mod.EmbeddingKind(cfg.learner.get("embedding", "direct")),
        input_mode=cfg.input_mode(),
        loss_scaling=cfg.loss_scaling,
        embed_size=int(cfg.learner.get("embed_size", 16)),
        embed_activation=cfg.learner.get("embed_activation", "linear"),
        rng=net_rng,
    )
    if cfg.learner.get("scaled_init", False):
        deep_mod.init_scaled_weights(net, "scaled")
    return net


# -- evaluation points and oracles -------------------------------------------

def trace_true_return(trace, start: int, gamma: float, horizon: int) -> float:
    """Truncated discounted forward sum from a trace record offset."""
    total, disc = 0.0, 1.0
    n = len(trace)
    for j in range(start + 1, min(start + 1 + horizon, n)):
        total += disc * float(trace.cumulants[j])
        if trace.terminals[j]:
            break
        disc *= gamma
    return total


def _eval_points(cfg: ExperimentConfig, env):
    """Return (point ids, per-point learner states, oracle(gamma) -> values)."""
    if cfg.kind == "squarewave":
        period = env.period
        signal = env.signal_sequence()
        points = list(range(period))
        states = [np.array([p / period]) for p in points]
        oracle = lambda g: np.array(
            [true_return_periodic(signal, p, g) for p in points]
        )
        return points, states, oracle
    if cfg.kind == "mdp":
        points = list(range(env.n_states))
        states = [env.observe(s) for s in points]
        oracle = lambda g: analytic_mdp_values(env, g)
        return points, states, oracle
    stride = int(cfg.evaluation.get("points_stride", 0)) or max(1, len(env) // 50)
    horizon = int(cfg.evaluation.get("mc_horizon", 1000))
    points = list(range(0, len(env) - 1, stride))
    states = [env.observations[p] for p in points]
    oracle = lambda g: np.array(
        [trace_true_return(env, p, g, horizon) for p in points]
    )
    return points, states, oracle


@dataclass
class SeedResult:
    seed: int
    per_tau_mse: dict
    per_tau_corr: dict
    overall_corr: float
    prediction_rows: list
    curve_rows: list


def run_single_seed(cfg: ExperimentConfig, seed: int) -> SeedResult:
    ss = np.random.SeedSequence([seed, 0xC0FFEE])
    env_rng, build_rng, sample_rng = (
        np.random.default_rng(s) for s in ss.spawn(3)
    )
    obs_kind = "one_hot" if (cfg.kind == "mdp" and cfg.family == "deep") else "scalar"
    env = _build_environment(cfg, env_rng, obs_kind)

    # oracle values are fixed, so compute them once up front (a fresh env
    # keeps evaluation on canonical states regardless of training position)
    eval_env = _build_environment(cfg, np.random.default_rng(0), obs_kind)
    points, states, oracle = _eval_points(cfg, eval_env)
    taus = cfg.probe_taus()
    timescales = {tau: Timescale.from_tau(tau) for tau in taus}
    truth = {tau: oracle(timescales[tau].gamma) for tau in taus}
    interval = cfg.checkpoint_interval

    snapshots: list[tuple[int, dict]] = []

    def snapshot(step: int, predict):
        snap = {}
        for tau in taus:
            preds = np.array([predict(s, timescales[tau]) for s in states])
            snap[tau] = float(np.mean((preds - truth[tau]) ** 2))
        snapshots.append((step, snap))

    if cfg.family == "linear":
        net = _build_linear(cfg, env, build_rng)
        run_online(net, env, cfg.steps, cfg.timescale_set_spec(), sample_rng,
                   decay_to_zero=bool(cfg.learner.get("decay_to_zero", False)),
                   checkpoint_every=interval,
                   checkpoint_cb=lambda step: snapshot(step, net.predict))
        predict = net.predict
    else:
        phi_dim = env.n_states if cfg.kind == "mdp" else _state_dim(cfg, env) \
            if cfg.kind != "trace" else env.obs_dim
        net = _build_deep(cfg, phi_dim, build_rng)
        replay = deep_mod.PrioritizedReplay(
            capacity=int(cfg.learner.get("replay_capacity", 100_000)),
            n_step=int(cfg.learner.get("n_step", 4)),
            batch_size=int(cfg.learner.get("batch_size", 32)),
            min_history=int(cfg.learner.get("min_history", 20_000)),
        )
        optimizer = deep_mod.Adam(
            net.params, step_size=float(cfg.learner.get("learning_rate", 6.25e-5))
        )
        train_every = int(cfg.learner.get("train_every", 4))
        deep_mod.run_deep_training(
            net, env, replay, cfg.timescale_set_spec(), cfg.steps, optimizer,
            sample_rng,
            train_every=train_every,
            sync_interval=int(cfg.learner.get("sync_interval", 10_000)),
            checkpoint_every=max(1, interval // train_every) if interval else 0,
            checkpoint_cb=lambda ts_done, n: snapshot(ts_done * train_every,
                                                      n.forward),
        )
        predict = net.forward

    # final evaluation is always the last checkpoint; headline metrics
    # average the final 10% of checkpoints (steady-state window)
    if not snapshots or snapshots[-1][0] != cfg.steps:
        snapshot(cfg.steps, predict)
    window = max(1, -(-len(snapshots) // 10))
    tail = [snap for _, snap in snapshots[-window:]]
    per_tau_mse = {tau: float(np.mean([s[tau] for s in tail])) for tau in taus}

    per_tau_corr, rows = {}, []
    all_true, all_pred = [], []
    for tau in taus:
        true_vals = truth[tau]
        preds = np.array([predict(s, timescales[tau]) for s in states])
        per_tau_corr[tau] = prediction_correlation(true_vals, preds) \
            if len(points) >= 2 and np.std(true_vals) > 0 else float("nan")
        all_true.extend(true_vals)
        all_pred.extend(preds)
        rows.extend(
            (cfg.name, tau, p, float(pr), float(tv))
            for p, pr, tv in zip(points, preds, true_vals)
        )
    overall = prediction_correlation(all_true, all_pred) \
        if np.std(all_true) > 0 else float("nan")
    curve_rows = [(cfg.name, step, tau, snap[tau])
                  for step, snap in snapshots for tau in taus]
    return SeedResult(seed, per_tau_mse, per_tau_corr, overall, rows,
                      curve_rows)


# -- output files ------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "nan" if np.isnan(v) else repr(float(v))
    return str(v)


def write_predictions_csv(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(PREDICTIONS_CSV_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_learning_curve_csv(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(LEARNING_CURVE_CSV_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _seed_worker(raw: dict, path: str, seed: int) -> SeedResult:
    return run_single_seed(validate(raw, path), seed)


def run_experiment(config_path, seeds=None, out_dir=None,
                   dry_run: bool = False) -> int:
    cfg = load_config(config_path)
    if dry_run:
        print(f"config OK: {cfg.name} ({cfg.kind}/{cfg.family}), "
              f"hash={cfg.config_hash()}, seeds={cfg.seeds}")
        return 0
    seeds = list(seeds) if seeds else cfg.seeds
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    chash = cfg.config_hash()

    n_workers = int(os.environ.get("GAMMANET_THREADS", "1"))
    if n_workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_seed_worker, [cfg.raw] * len(seeds),
                                    [cfg.path] * len(seeds), seeds))
    else:
        results = [run_single_seed(cfg, s) for s in seeds]

    taus = cfg.probe_taus()
    for res in results:
        table = {cfg.name: {t: (res.per_tau_mse[t], 0.0) for t in taus}}
        report = normalized_mse(table, corr={cfg.name: res.per_tau_corr})
        report.write_csv(out / f"{cfg.name}_{chash}_seed{res.seed}_metrics.csv")
        write_predictions_csv(
            out / f"{cfg.name}_{chash}_seed{res.seed}_predictions.csv",
            res.prediction_rows,
        )
        if cfg.checkpoint_interval:
            write_learning_curve_csv(
                out / f"{cfg.name}_{chash}_seed{res.seed}_learning_curve.csv",
                res.curve_rows,
            )

    # aggregate across seeds: mean/variance of per-seed MSE, mean correlation
    agg = {}
    agg_corr = {}
    for t in taus:
        vals = np.array([r.per_tau_mse[t] for r in results])
        agg[t] = (float(vals.mean()), float(vals.var()))
        corrs = np.array([r.per_tau_corr[t] for r in results])
        agg_corr[t] = float(np.nanmean(corrs)) if not np.all(np.isnan(corrs)) \
            else float("nan")
    report = normalized_mse({cfg.name: agg}, corr={cfg.name: agg_corr},
                            meta={"seeds": seeds, "config_hash": chash})
    agg_path = out / f"{cfg.name}_{chash}_aggregate.csv"
    report.write_csv(agg_path)

    summary = {
        "name": cfg.name,
        "config_hash": chash,
        "kind": cfg.kind,
        "family": cfg.family,
        "seeds": seeds,
        "probes": taus,
        "avg_norm_mse": report.bars[cfg.name][0],
        "avg_norm_var": report.bars[cfg.name][1],
        "overall_corr_by_seed": {str(r.seed): r.overall_corr for r in results},
        "mse_mean_by_tau": {str(t): agg[t][0] for t in taus},
        "corr_by_tau": {str(t): agg_corr[t] for t in taus},
    }
    with open(out / f"{cfg.name}_{chash}_summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, allow_nan=True)
    print(f"wrote {agg_path}")
    return 0


def compare_series(metric_files, out_path) -> int:
    """Join aggregate metrics files and renormalize across their series."""
    table, corr = {}, {}
    tau_sets = []
    for f in metric_files:
        report = MetricsReport.read_csv(f)
        tau_sets.append(tuple(report.taus()))
        for r in report.rows:
            table.setdefault(r["series"], {})[r["tau"]] = (r["mse_mean"], r["mse_var"])
            corr.setdefault(r["series"], {})[r["tau"]] = r["corr"]
    if len(set(tau_sets)) != 1:
        raise ValueError(f"probe sets differ across inputs: {sorted(set(tau_sets))}")
    combined = normalized_mse(table, corr=corr)
    combined.write_csv(out_path)
    print(f"wrote {out_path}")
    return 0


def _linear_probe_suite(cfg: ExperimentConfig, seed: int):
    if cfg.family != "linear":
        raise ConfigError("probe training is implemented for the linear family")
    ss = np.random.SeedSequence([seed, 0xBA5E])
    env_rng, coder_rng = (np.random.default_rng(s) for s in ss.spawn(2))
    env0 = _build_environment(cfg, env_rng)
    index_space = int(cfg.learner.get("index_space", 0)) or None
    coder = build_tile_coder(
        _tile_layers(cfg), input_dim=_state_dim(cfg, env0),
        index_space=index_space,
        include_bias=bool(cfg.learner.get("bias", False)), rng=coder_rng,
    )

    def baseline_factory(ts):
        return FixedBaseline(
            coder, ts,
            step_size=float(cfg.learner.get("step_size", 0.1)),
            divide_by_active=bool(cfg.learner.get("divide_by_active", True)),
            loss_scaling=cfg.loss_scaling,
        )

    def env_factory():
        return _build_environment(cfg, np.random.default_rng(seed))

    probes = [Timescale.from_tau(t) for t in cfg.probe_taus()]
    return train_probe_suite(probes, baseline_factory, env_factory, cfg.steps,
                             decay_to_zero=bool(cfg.learner.get("decay_to_zero", False)))


def run_probes(config_path, out_dir=None) -> int:
    cfg = load_config(config_path)
    suite = _linear_probe_suite(cfg, cfg.seeds[0])
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    eval_env = _build_environment(cfg, np.random.default_rng(0))
    points, states, oracle = _eval_points(cfg, eval_env)
    rows, table, corr = [], {"probes": {}}, {"probes": {}}
    for tau, baseline in suite.baselines.items():
        ts = baseline.timescale
        true_vals = oracle(ts.gamma)
        preds = np.array([baseline.predict(s) for s in states])
        table["probes"][tau] = (float(np.mean((preds - true_vals) ** 2)), 0.0)
        corr["probes"][tau] = prediction_correlation(true_vals, preds) \
            if np.std(true_vals) > 0 else float("nan")
        rows.extend(("probes", tau, p, float(pr), float(tv))
                    for p, pr, tv in zip(points, preds, true_vals))
    chash = cfg.config_hash()
    normalized_mse(table, corr=corr).write_csv(
        out / f"{cfg.name}_{chash}_probes_metrics.csv")
    write_predictions_csv(out / f"{cfg.name}_{chash}_probes_predictions.csv", rows)
    print(f"wrote {out / f'{cfg.name}_{chash}_probes_metrics.csv'}")
    return 0


def run_interp(config_path, out_dir=None) -> int:
    """Interpolation-baseline sweep at midpoints between the probes."""
    cfg = load_config(config_path)
    suite = _linear_probe_suite(cfg, cfg.seeds[0])
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    eval_env = _build_environment(cfg, np.random.default_rng(0))
    points, states, oracle = _eval_points(cfg, eval_env)
    probe_taus = sorted(suite.baselines)
    queries = [Timescale.from_tau((a + b) / 2.0)
               for a, b in zip(probe_taus, probe_taus[1:])]
    rows, table, corr = [], {}, {}
    for scale in ("tau", "gamma"):
        series = f"interp_{scale}"
        table[series], corr[series] = {}, {}
        for q in queries:
            true_vals = oracle(q.gamma)
            preds = np.empty(len(states))
            for i, s in enumerate(states):
                pairs = [(b.timescale, b.predict(s))
                         for b in suite.baselines.values()]
                preds[i] = interpolate_prediction(pairs, q, scale=scale)
            table[series][q.tau] = (float(np.mean((preds - true_vals) ** 2)), 0.0)
            corr[series][q.tau] = prediction_correlation(true_vals, preds) \
                if np.std(true_vals) > 0 else float("nan")
            rows.extend((series, q.tau, p, float(pr), float(tv))
                        for p, pr, tv in zip(points, preds, true_vals))
    chash = cfg.config_hash()
    normalized_mse(table, corr=corr).write_csv(
        out / f"{cfg.name}_{chash}_interp_metrics.csv")
    write_predictions_csv(out / f"{cfg.name}_{chash}_interp_predictions.csv", rows)
    print(f"wrote {out / f'{cfg.name}_{chash}_interp_metrics.csv'}")
    return 0


def run_oracle_mdp(config_path) -> int:
    cfg = load_config(config_path)
    if cfg.kind != "mdp":
        raise ConfigError("oracle mdp requires an mdp experiment config")
    env = _build_environment(cfg, np.random.default_rng(0))
    print("tau,state,value")
    for tau in cfg.probe_taus():
        ts = Timescale.from_tau(tau)
        for s, v in enumerate(analytic_mdp_values(env, ts.gamma)):
            print(f"{_fmt(float(tau))},{s},{_fmt(float(v))}")
    return 0


# -- argument parsing --------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="gammanet")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a training + evaluation experiment")
    p_run.add_argument("config")
    p_run.add_argument("--seeds", type=int, nargs="+")
    p_run.add_argument("--out-dir")
    p_run.add_argument("--dry-run", action="store_true")

    p_cmp = sub.add_parser("compare", help="join metric files into one table")
    p_cmp.add_argument("files", nargs="+")
    p_cmp.add_argument("-o", "--output", required=True)

    p_orc = sub.add_parser("oracle", help="print exact values")
    orc_sub = p_orc.add_subparsers(dest="oracle_kind", required=True)
    p_orc_mdp = orc_sub.add_parser("mdp")
    p_orc_mdp.add_argument("config")

    p_prb = sub.add_parser("probes", help="train fixed-timescale baselines")
    p_prb.add_argument("config")
    p_prb.add_argument("--out-dir")

    p_int = sub.add_parser("interp", help="interpolation baseline sweep")
    p_int.add_argument("config")
    p_int.add_argument("--out-dir")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return run_experiment(args.config, args.seeds, args.out_dir,
                                  args.dry_run)
        if args.command == "compare":
            return compare_series(args.files, args.output)
        if args.command == "oracle":
            return run_oracle_mdp(args.config)
        if args.command == "probes":
            return run_probes(args.config, args.out_dir)
        if args.command == "interp":
            return run_interp(args.config, args.out_dir)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
