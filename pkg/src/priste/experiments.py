"""Experiment runners: repeated enforcement, threshold sweeps, scaling benchmarks.

Every repetition gets a seed derived from ``(master seed, run index)``
only, so the same run index sees the same trajectory and the same random
draws under every parameter setting.  Aggregation folds runs in index
order, so results do not depend on the number of workers.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import events as ev_mod
from . import markov, oracle
from .config import ExperimentConfig
from .errors import DataError, TooLarge
from .ingest import ingest_trajectories
from .lppm import LppmSpec
from .release import EnforceParams, ReleaseSession
from .statespace import GridMap

log = logging.getLogger(__name__)


def run_seed(master: int, run: int) -> int:
    """Counter-based split of the master seed."""
    return int(np.random.SeedSequence([int(master), int(run)]).generate_state(1, np.uint32)[0])


def resolve_model(config: ExperimentConfig):
    """``(model, pi, trajectories or None)`` for the configured source."""
    src = config.model
    if src.source == "synth":
        model = markov.synth_gaussian(config.grid.rows, config.grid.cols, src.sigma)
        return model, markov.uniform(config.grid.m), None
    if src.source == "json":
        model, pi = markov.load_model(src.path)
        if model.m != config.grid.m:
            raise DataError(f"{src.path}: model has {model.m} states, grid has {config.grid.m}")
        return model, pi, None
    trajs = ingest_trajectories(src.path, config.grid, src.resample_seconds)
    model = markov.train(trajs, config.grid.m, src.smoothing)
    long_enough = [t[: config.T] for t in trajs if len(t) >= config.T]
    if not long_enough:
        raise DataError(f"{src.path}: no trajectory has at least T = {config.T} steps")
    return model, markov.uniform(config.grid.m), long_enough


@dataclass(frozen=True)
class Setting:
    epsilon: float
    alpha: float
    delta: float
    check_budget_ms: float | None = None

    @property
    def label(self) -> str:
        cap = "inf" if self.check_budget_ms is None else f"{self.check_budget_ms:g}"
        return f"eps={self.epsilon:g},alpha={self.alpha:g},delta={self.delta:g},cap={cap}"


@dataclass
class RunResult:
    run: int
    seed: int
    alphas: np.ndarray
    dists: np.ndarray
    halvings: np.ndarray
    unknowns: int
    timed_out: int
    forced: int
    runtime_s: float


@dataclass
class SettingReport:
    setting: Setting
    repetitions: int
    mean_alpha_t: np.ndarray
    std_alpha_t: np.ndarray
    mean_dist_t: np.ndarray
    mean_alpha: float
    mean_dist_km: float
    halvings_hist: dict
    conservative_releases: int
    timeouts: int
    forced: int
    runtime_mean_s: float
    runtime_std_s: float
    runs: list = field(repr=False, default_factory=list)

    def summary(self) -> dict:
        return {
            **asdict(self.setting),
            "label": self.setting.label,
            "repetitions": self.repetitions,
            "mean_alpha": self.mean_alpha,
            "mean_dist_km": self.mean_dist_km,
            "halvings_hist": self.halvings_hist,
            "conservative_releases": self.conservative_releases,
            "timeouts": self.timeouts,
            "forced": self.forced,
            "runtime_mean_s": self.runtime_mean_s,
            "runtime_std_s": self.runtime_std_s,
            "mean_alpha_t": self.mean_alpha_t.tolist(),
            "std_alpha_t": self.std_alpha_t.tolist(),
        }


@dataclass
class ExperimentReport:
    name: str
    settings: list

    def to_json(self) -> dict:
        return {"name": self.name, "settings": [s.summary() for s in self.settings]}

    def by_label(self) -> dict:
        return {s.setting.label: s for s in self.settings}


def _mechanism(config: ExperimentConfig, setting: Setting) -> LppmSpec:
    return replace(config.mechanism, alpha=setting.alpha, delta=setting.delta)


def run_once(config: ExperimentConfig, model, pi, setting: Setting, run: int,
             trajectory=None, events=None) -> RunResult:
    seed = run_seed(config.seed, run)
    if trajectory is None:
        trajectory = markov.sample_trajectory(model, pi, config.T, np.random.default_rng([seed, 0]))
    params = EnforceParams(setting.epsilon, config.enforce.decay, setting.check_budget_ms,
                           config.enforce.max_halvings, config.enforce.simplex)
    session = ReleaseSession(config.grid, model, events or config.events, config.T,
                             _mechanism(config, setting), params, pi, seed)
    t0 = time.perf_counter()
    recs = [session.step(c) for c in trajectory]
    runtime = time.perf_counter() - t0
    return RunResult(
        run, seed,
        np.array([r.alpha_used for r in recs]),
        np.array([r.distance_km for r in recs]),
        np.array([r.halvings for r in recs]),
        sum(r.unknowns for r in recs), sum(r.timed_out for r in recs), sum(r.forced for r in recs),
        runtime,
    )


def _run_job(args):
    return run_once(*args)


def _runs(config, model, pi, setting, trajectories, events=None) -> list[RunResult]:
    jobs = []
    for run in range(config.repetitions):
        traj = None if trajectories is None else trajectories[run % len(trajectories)]
        jobs.append((config, model, pi, setting, run, traj, events))
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            return list(pool.map(_run_job, jobs))
    return [_run_job(j) for j in jobs]


def aggregate(setting: Setting, runs: Sequence[RunResult]) -> SettingReport:
    runs = sorted(runs, key=lambda r: r.run)
    A = np.vstack([r.alphas for r in runs])
    D = np.vstack([r.dists for r in runs])
    H = np.concatenate([r.halvings for r in runs])
    vals, counts = np.unique(H, return_counts=True)
    rt = np.array([r.runtime_s for r in runs])
    return SettingReport(
        setting, len(runs), A.mean(axis=0), A.std(axis=0), D.mean(axis=0),
        float(A.mean()), float(D.mean()),
        {int(v): int(c) for v, c in zip(vals, counts)},
        sum(r.unknowns for r in runs), sum(r.timed_out for r in runs), sum(r.forced for r in runs),
        float(rt.mean()), float(rt.std()), runs,
    )


def settings_for(config: ExperimentConfig) -> list[Setting]:
    return [Setting(e, a, d, config.enforce.check_budget_ms)
            for e in config.enforce.epsilons for a in config.alphas for d in config.deltas]


def run_experiment(config: ExperimentConfig, settings: Sequence[Setting] | None = None,
                   events=None) -> ExperimentReport:
    model, pi, trajectories = resolve_model(config)
    settings = settings_for(config) if settings is None else settings
    out = []
    for s in settings:
        log.info("running %s x %d", s.label, config.repetitions)
        out.append(aggregate(s, _runs(config, model, pi, s, trajectories, events)))
    return ExperimentReport(config.name, out)


def run_threshold_sweep(config: ExperimentConfig, thresholds_ms: Sequence[float] | None = None):
    """One row per cap: runtime, conservative releases, mean alpha and distance."""
    thresholds_ms = config.enforce.thresholds_ms if thresholds_ms is None else thresholds_ms
    if any(not t > 0 for t in thresholds_ms):
        raise ValueError("thresholds must be positive")
    e, a, d = config.enforce.epsilons[0], config.alphas[0], config.deltas[0]
    settings = [Setting(e, a, d, None if math.isinf(t) else float(t)) for t in thresholds_ms]
    report = run_experiment(config, settings)
    rows = []
    for t, rep in zip(thresholds_ms, report.settings):
        rows.append({
            "threshold_ms": float(t),
            "mean_runtime_s": rep.runtime_mean_s,
            "conservative_releases": rep.conservative_releases,
            "timeouts": rep.timeouts,
            "mean_alpha": rep.mean_alpha,
            "mean_dist_km": rep.mean_dist_km,
        })
    return rows, report


# Scaling benchmark -----------------------------------------------------------

def bench_instance(m: int, length: int, width: int, kind: str = ev_mod.PRESENCE,
                   seed: int = 0) -> oracle.BenchInstance:
    """Random model, event over window ``[1, length]`` with ``width`` cells per mask."""
    if not 1 <= width <= m:
        raise ValueError(f"width must lie in [1, m], got {width} for m = {m}")
    rng = np.random.default_rng([seed, m, length, width])
    model = markov.MarkovModel(rng.dirichlet(np.ones(m), size=m))
    pi = rng.dirichlet(np.ones(m))
    if kind == ev_mod.PRESENCE:
        event = ev_mod.presence(m, rng.choice(m, width, replace=False), 1, length)
    else:
        event = ev_mod.pattern(m, [rng.choice(m, width, replace=False) for _ in range(length)], 1)
    emissions = tuple(rng.uniform(0.05, 1.0, size=m) for _ in range(length))
    return oracle.BenchInstance(event, model, pi, emissions, length)


def run_scaling_bench(m_grid, length_grid, width_grid, kind: str = ev_mod.PRESENCE,
                      seed: int = 0, min_time: float = 0.02) -> list[dict]:
    rows = []
    for m in m_grid:
        for length in length_grid:
            for width in width_grid:
                if width > m:
                    continue
                inst = bench_instance(m, length, width, kind, seed)
                row = {"m": m, "length": length, "width": width, "kind": kind}
                try:
                    fast_ns, naive_ns = oracle.bench_pair(inst, min_time=min_time)
                    row.update(fast_ns=fast_ns, naive_ns=naive_ns, status="ok")
                except TooLarge:
                    row.update(fast_ns=oracle.time_call(oracle.fast_joint, inst, min_time=min_time),
                               naive_ns=None, status="too_large")
                rows.append(row)
    return rows


# Output ----------------------------------------------------------------------

def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return x


def write_csv(path, rows: Sequence[dict]) -> None:
    if not rows:
        Path(path).write_text("")
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})


def per_timestamp_rows(report: ExperimentReport) -> list[dict]:
    rows = []
    for rep in report.settings:
        s = rep.setting
        for k in range(rep.mean_alpha_t.shape[0]):
            rows.append({"label": s.label, "epsilon": s.epsilon, "alpha0": s.alpha, "delta": s.delta,
                         "t": k + 1, "mean_alpha": float(rep.mean_alpha_t[k]),
                         "std_alpha": float(rep.std_alpha_t[k]), "mean_dist_km": float(rep.mean_dist_t[k])})
    return rows


def per_run_rows(report: ExperimentReport) -> list[dict]:
    # runtimes stay out of the CSVs so identical seeds give identical files
    rows = []
    for rep in report.settings:
        s = rep.setting
        for r in rep.runs:
            rows.append({"label": s.label, "epsilon": s.epsilon, "alpha0": s.alpha, "delta": s.delta,
                         "run": r.run, "seed": r.seed, "mean_alpha": float(r.alphas.mean()),
                         "mean_dist_km": float(r.dists.mean()), "halvings": int(r.halvings.sum()),
                         "unknowns": r.unknowns, "timeouts": r.timed_out, "forced": r.forced})
    return rows


def write_report(report: ExperimentReport, out_dir, extra: dict | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = report.to_json()
    if extra:
        payload.update(extra)
    (out / "report.json").write_text(dumps_json(payload))
    write_csv(out / "per_timestamp.csv", per_timestamp_rows(report))
    write_csv(out / "per_run.csv", per_run_rows(report))
    return out


def _finite(x):
    # strict JSON has no Infinity; caps of inf are written as "inf"
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else "-inf" if x < 0 else None
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    return x


def dumps_json(payload) -> str:
    return json.dumps(_finite(payload), indent=2, default=_json_default, allow_nan=False)


def _json_default(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    raise TypeError(f"not JSON serializable: {type(x)}")
