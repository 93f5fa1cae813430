"""Command line interface.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import checker, experiments, lppm, markov, twoworld
from .config import ExperimentConfig, load_config
from .errors import ConfigError, DataError, PristeError
from .events import load_events
from .ingest import ingest_trajectories, write_trajectories
from .release import EnforceParams, ReleaseSession
from .statespace import GridMap

log = logging.getLogger("priste")

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _globals(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="TOML experiment config")
    parser.add_argument("--seed", type=int, default=default, help="master seed")
    parser.add_argument("--out", default=default, help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)


def _grid_args(p):
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--cell-size-m", type=float)
    p.add_argument("--origin-lat", type=float)
    p.add_argument("--origin-lon", type=float)


def _mech_args(p):
    p.add_argument("--mechanism", choices=lppm.MECHANISMS)
    p.add_argument("--alpha", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--subsamples", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="priste", description=__doc__.splitlines()[0])
    _globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    _globals(common, suppress=True)

    p = sub.add_parser("train", parents=[common], help="fit a Markov model to trajectory CSVs")
    p.add_argument("--trajectories", required=True)
    _grid_args(p)
    p.add_argument("--smoothing", type=float)
    p.add_argument("--resample-seconds", type=float)
    p.add_argument("--model-out")

    p = sub.add_parser("synth", parents=[common], help="Gaussian-kernel synthetic model")
    _grid_args(p)
    p.add_argument("--sigma", type=float)
    p.add_argument("--model-out")
    p.add_argument("--trajectories-out")
    p.add_argument("--n", type=int, default=1, help="trajectories to sample")
    p.add_argument("--T", type=int, default=50)

    p = sub.add_parser("quantify", parents=[common], help="check observations against events")
    p.add_argument("--model", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--emissions", help="CSV, one likelihood column per row")
    p.add_argument("--observations", help="t,cell CSV of released cells")
    p.add_argument("--pi", help="JSON list with a fixed initial distribution")
    p.add_argument("--budget-ms", type=float)
    p.add_argument("--feasible-set", choices=("simplex", "box"), default="simplex")
    _grid_args(p)
    _mech_args(p)

    p = sub.add_parser("enforce", parents=[common], help="run the release loop on one trajectory")
    p.add_argument("--model", required=True)
    p.add_argument("--trajectory", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--decay", type=float, default=0.5)
    p.add_argument("--check-budget-ms", type=float)
    p.add_argument("--max-halvings", type=int, default=40)
    p.add_argument("--resample-seconds", type=float)
    _grid_args(p)
    _mech_args(p)

    p = sub.add_parser("simulate", parents=[common], help="repeated enforcement from a config")
    p.add_argument("--repetitions", type=int)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("bench", parents=[common], help="fast path vs enumeration timings")
    p.add_argument("--m", default="3", help="comma-separated state counts")
    p.add_argument("--lengths", default="5,6,7,8,9,10")
    p.add_argument("--widths", default="2")
    p.add_argument("--kind", choices=("presence", "pattern"), default="presence")
    p.add_argument("--min-time", type=float, default=0.02)

    p = sub.add_parser("sweep-threshold", parents=[common], help="conservative release vs time cap")
    p.add_argument("--thresholds", help="comma-separated caps in ms; 'inf' disables the cap")
    p.add_argument("--repetitions", type=int)
    return parser


# helpers ---------------------------------------------------------------------

def _config(args) -> ExperimentConfig | None:
    return load_config(args.config) if args.config else None


def _require_config(args) -> ExperimentConfig:
    if not args.config:
        raise ConfigError(f"'{args.command}' needs --config")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _grid(args, cfg, model_path=None, m=None) -> GridMap:
    if getattr(args, "rows", None) and getattr(args, "cols", None):
        block = {"rows": args.rows, "cols": args.cols}
        for key in ("cell_size_m", "origin_lat", "origin_lon"):
            if getattr(args, key, None) is not None:
                block[key] = getattr(args, key)
        return GridMap.from_config(block)
    if cfg is not None:
        return cfg.grid
    if model_path is not None:
        block = markov.load_model_grid(model_path)
        if block:
            return GridMap.from_config(block)
    raise ConfigError("grid unknown: pass --rows/--cols, a --config with [grid], or a model with a grid block")


def _mechanism(args, cfg) -> lppm.LppmSpec:
    spec = cfg.mechanism if cfg is not None else lppm.LppmSpec()
    updates = {k: getattr(args, k) for k in ("mechanism", "alpha", "delta", "subsamples")
               if getattr(args, k, None) is not None}
    return replace(spec, **updates)


def _out_dir(args) -> Path | None:
    if not args.out:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(payload: dict, args, name: str) -> None:
    text = experiments.dumps_json(payload)
    out = _out_dir(args)
    if out is not None:
        (out / name).write_text(text)
    print(text)


def _read_matrix_csv(path) -> np.ndarray:
    try:
        rows = [[float(x) for x in line.split(",")]
                for line in Path(path).read_text().splitlines() if line.strip()]
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    return np.asarray(rows, dtype=float)


# commands --------------------------------------------------------------------

def cmd_train(args) -> int:
    cfg = _config(args)
    grid = _grid(args, cfg)
    smoothing = args.smoothing if args.smoothing is not None else (cfg.model.smoothing if cfg else 0.01)
    resample = args.resample_seconds if args.resample_seconds is not None else (
        cfg.model.resample_seconds if cfg else None)
    trajs = ingest_trajectories(args.trajectories, grid, resample)
    model = markov.train(trajs, grid.m, smoothing)
    path = Path(args.model_out) if args.model_out else (_out_dir(args) or Path(".")) / "model.json"
    markov.save_model(path, model, grid=grid.to_config())
    print(json.dumps({"model": str(path), "m": grid.m, "trajectories": len(trajs), "dropped_rows": trajs.dropped}))
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = _config(args)
    grid = _grid(args, cfg)
    sigma = args.sigma if args.sigma is not None else (cfg.model.sigma if cfg else 3.0)
    model = markov.synth_gaussian(grid.rows, grid.cols, sigma)
    out = _out_dir(args) or Path(".")
    path = Path(args.model_out) if args.model_out else out / "model.json"
    markov.save_model(path, model, grid=grid.to_config())
    result = {"model": str(path), "m": grid.m, "sigma": sigma}
    if args.trajectories_out:
        seed = args.seed if args.seed is not None else (cfg.seed if cfg else 0)
        trajs = [markov.sample_trajectory(model, markov.uniform(grid.m), args.T,
                                          np.random.default_rng([seed, k])) for k in range(args.n)]
        write_trajectories(args.trajectories_out, trajs)
        result["trajectories"] = args.trajectories_out
    print(json.dumps(result))
    return EXIT_OK


def _observation_columns(args, cfg, model, pi):
    if bool(args.emissions) == bool(args.observations):
        raise ConfigError("pass exactly one of --emissions or --observations")
    if args.emissions:
        cols = _read_matrix_csv(args.emissions)
        if cols.ndim != 2 or cols.shape[1] != model.m:
            raise DataError(f"{args.emissions}: each row needs {model.m} likelihoods")
        return list(cols)
    grid = _grid(args, cfg, args.model)
    spec = _mechanism(args, cfg)
    obs = ingest_trajectories(args.observations, grid)[0]
    cols, p_plus = [], None
    for t, o in enumerate(obs, start=1):
        prior = pi if t == 1 else p_plus @ model.matrix_at(t - 1)
        matrix = lppm.emission_matrix(grid, spec, prior=prior)
        cols.append(matrix[:, o])
        p_plus = lppm.posterior(prior, matrix[:, o])
    return cols


def cmd_quantify(args) -> int:
    cfg = _config(args)
    model, pi = markov.load_model(args.model)
    events = load_events(args.events, model.m)
    cols = _observation_columns(args, cfg, model, pi)
    fixed = None
    if args.pi:
        raw = Path(args.pi).read_text() if Path(args.pi).exists() else args.pi
        fixed = markov.as_distribution(json.loads(raw), model.m)
    simplex = args.feasible_set == "simplex"
    results = []
    for ev in events:
        verdicts = checker.check_sequence(ev, model, cols, args.epsilon,
                                          budget_ms=args.budget_ms, simplex=simplex)
        entry = {
            "event": ev.to_dict(),
            "per_timestamp": [{"t": t, "fwd": f.status, "bwd": b.status,
                               "fwd_upper": f.upper, "bwd_upper": b.upper}
                              for t, (f, b) in enumerate(verdicts, start=1)],
            "certified": all(f.certified and b.certified for f, b in verdicts),
        }
        if fixed is not None:
            chain = twoworld.build_chain(ev, model, max(len(cols), ev.end))
            entry["prior"] = twoworld.prior(chain, fixed)
            fwd, bwd, holds = checker.quantify_fixed_pi(ev, model, fixed, cols, args.epsilon)
            entry.update(ratio_fwd=fwd, ratio_bwd=bwd, holds=holds)
        results.append(entry)
    _emit({"epsilon": args.epsilon, "n_observations": len(cols), "events": results}, args, "quantify.json")
    return EXIT_OK


def cmd_enforce(args) -> int:
    cfg = _config(args)
    model, pi = markov.load_model(args.model)
    grid = _grid(args, cfg, args.model)
    if grid.m != model.m:
        raise ConfigError(f"grid has {grid.m} cells, model has {model.m} states")
    events = load_events(args.events, model.m)
    traj = ingest_trajectories(args.trajectory, grid, args.resample_seconds)[0]
    spec = _mechanism(args, cfg)
    params = EnforceParams(args.epsilon, args.decay, args.check_budget_ms, args.max_halvings)
    seed = args.seed if args.seed is not None else (cfg.seed if cfg else 0)
    session = ReleaseSession(grid, model, events, len(traj), spec, params, pi, seed)
    rows = []
    for cell in traj:
        r = session.step(cell)
        rows.append({"t": r.t, "true_cell": r.true_cell, "obs_cell": r.observed_cell,
                     "alpha": r.alpha_used, "halvings": r.halvings, "dist_km": r.distance_km})
    out = _out_dir(args)
    if out is not None:
        experiments.write_csv(out / "release.csv", rows)
    else:
        print("t,true_cell,obs_cell,alpha,halvings,dist_km")
        for r in rows:
            print(",".join(str(experiments._fmt(v)) for v in r.values()))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _require_config(args)
    if args.repetitions:
        cfg = replace(cfg, repetitions=args.repetitions)
    if args.workers:
        cfg = replace(cfg, workers=args.workers)
    report = experiments.run_experiment(cfg)
    out = _out_dir(args) or Path(".")
    experiments.write_report(report, out)
    for s in report.settings:
        print(f"{s.setting.label}: mean_alpha={s.mean_alpha:.4f} mean_dist_km={s.mean_dist_km:.3f} "
              f"conservative={s.conservative_releases}")
    return EXIT_OK


def cmd_bench(args) -> int:
    seed = args.seed if args.seed is not None else 0
    rows = experiments.run_scaling_bench(_ints(args.m), _ints(args.lengths), _ints(args.widths),
                                         args.kind, seed, args.min_time)
    out = _out_dir(args) or Path(".")
    experiments.write_csv(out / "bench.csv", rows)
    for r in rows:
        naive = "-" if r["naive_ns"] is None else f"{r['naive_ns'] / 1e6:.3f}"
        print(f"m={r['m']} length={r['length']} width={r['width']} "
              f"fast_ms={r['fast_ns'] / 1e6:.3f} naive_ms={naive}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _require_config(args)
    if args.repetitions:
        cfg = replace(cfg, repetitions=args.repetitions)
    thresholds = _floats(args.thresholds) if args.thresholds else None
    rows, report = experiments.run_threshold_sweep(cfg, thresholds)
    out = _out_dir(args) or Path(".")
    experiments.write_report(report, out, {"sweep": rows})
    experiments.write_csv(out / "sweep.csv", rows)
    for r in rows:
        print(f"cap={r['threshold_ms']:g}ms runtime={r['mean_runtime_s']:.2f}s "
              f"conservative={r['conservative_releases']} mean_alpha={r['mean_alpha']:.4f}")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train, "synth": cmd_synth, "quantify": cmd_quantify, "enforce": cmd_enforce,
    "simulate": cmd_simulate, "bench": cmd_bench, "sweep-threshold": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (PristeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
