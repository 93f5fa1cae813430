"""Per-timestamp budget trends on the synthetic grid.

Runs the epsilon sweep for one event, then the single-event and joint runs
for two windows, and writes report files under --out.
"""

import argparse
import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from priste import experiments
from priste.config import load_config

ROOT = Path(__file__).resolve().parent.parent


def window_means(rep, start, end):
    at = rep.mean_alpha_t
    inside = at[start - 1:end].mean()
    outside = np.concatenate([at[:start - 1], at[end:]]).mean()
    return float(inside), float(outside)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/trends")
    ap.add_argument("--repetitions", type=int)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    single = load_config(ROOT / "configs/synthetic.toml")
    joint = load_config(ROOT / "configs/two_events.toml")
    if args.repetitions:
        single = replace(single, repetitions=args.repetitions)
        joint = replace(joint, repetitions=args.repetitions)
    single = replace(single, workers=args.workers)
    joint = replace(joint, workers=args.workers)
    out = Path(args.out)

    sweep = experiments.run_experiment(single)
    experiments.write_report(sweep, out / "epsilon")
    ev = single.events[0]
    for rep in sweep.settings:
        inside, outside = window_means(rep, ev.start, ev.end)
        print(f"eps={rep.setting.epsilon:g}: mean alpha {rep.mean_alpha:.4f} "
              f"(window {inside:.4f}, elsewhere {outside:.4f}), mean dist {rep.mean_dist_km:.3f} km")

    setting = experiments.Setting(0.5, joint.alphas[0], joint.deltas[0], joint.enforce.check_budget_ms)
    for name, evs in (("first", joint.events[:1]), ("second", joint.events[1:]), ("both", joint.events)):
        rep = experiments.run_experiment(replace(joint, events=evs), [setting])
        experiments.write_report(rep, out / name)
        print(f"{name}: mean alpha {rep.settings[0].mean_alpha:.4f}")


if __name__ == "__main__":
    main()
