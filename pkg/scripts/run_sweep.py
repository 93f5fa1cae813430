"""Conservative releases and utility as the per-check time cap varies."""

import argparse
import logging
from dataclasses import replace
from pathlib import Path

from priste import experiments
from priste.config import load_config

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(ROOT / "configs/sweep.toml"))
    ap.add_argument("--out", default="out/sweep")
    ap.add_argument("--repetitions", type=int)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cfg = load_config(args.config)
    if args.repetitions:
        cfg = replace(cfg, repetitions=args.repetitions)
    rows, report = experiments.run_threshold_sweep(cfg)
    out = Path(args.out)
    experiments.write_report(report, out, {"sweep": rows})
    experiments.write_csv(out / "sweep.csv", rows)
    print("cap_ms,runtime_s,conservative,timeouts,mean_alpha,mean_dist_km")
    for r in rows:
        print(f"{r['threshold_ms']:g},{r['mean_runtime_s']:.2f},{r['conservative_releases']},"
              f"{r['timeouts']},{r['mean_alpha']:.4f},{r['mean_dist_km']:.3f}")


if __name__ == "__main__":
    main()
