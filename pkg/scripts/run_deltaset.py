"""Mean budget of the delta-location-set mechanism across delta."""

import argparse
import logging
from dataclasses import replace
from pathlib import Path

from priste import experiments
from priste.config import load_config

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(ROOT / "configs/deltaset.toml"))
    ap.add_argument("--out", default="out/deltaset")
    ap.add_argument("--repetitions", type=int)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cfg = load_config(args.config)
    if args.repetitions:
        cfg = replace(cfg, repetitions=args.repetitions)
    report = experiments.run_experiment(cfg)
    experiments.write_report(report, args.out)
    for rep in report.settings:
        print(f"delta={rep.setting.delta:g}: mean alpha {rep.mean_alpha:.4f}, "
              f"mean dist {rep.mean_dist_km:.3f} km")


if __name__ == "__main__":
    main()
