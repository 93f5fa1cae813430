"""Fast two-world evaluation against brute-force enumeration, by event length."""

import argparse
from pathlib import Path

import numpy as np

from priste import experiments


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/scaling")
    ap.add_argument("--min-time", type=float, default=0.05)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    # enumeration is only feasible for tiny state spaces
    rows = experiments.run_scaling_bench([3], range(4, 12), [2], min_time=args.min_time)
    rows += experiments.run_scaling_bench([9], range(5, 16), [3], min_time=args.min_time)
    experiments.write_csv(out / "bench.csv", rows)
    for m in (3, 9):
        sel = [r for r in rows if r["m"] == m]
        L = np.array([r["length"] for r in sel], dtype=float)
        fast = np.array([r["fast_ns"] for r in sel], dtype=float)
        print(f"m={m}: fast log-log slope {np.polyfit(np.log(L), np.log(fast), 1)[0]:.2f}")
        naive = [(r["length"], r["naive_ns"]) for r in sel if r["naive_ns"] is not None]
        if len(naive) > 1:
            (l0, n0), (l1, n1) = naive[0], naive[-1]
            print(f"m={m}: naive grows x{(n1 / n0) ** (1 / (l1 - l0)):.2f} per added step")


if __name__ == "__main__":
    main()
