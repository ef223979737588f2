"""Excess risk of the quantized and restricted means on uniform [0, 1] data.

Writes a CSV report and a log-log SVG chart for the squared-norm loss (the
mean) and the norm loss (the median).

    python scripts/mean_convergence.py --out results/
"""

import argparse
import os

from frechetq.cli import atomic_write, emit_convergence_svg
from frechetq.experiments import Sampler, run_mean_convergence
from frechetq.metric import norm, squared_norm


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--grid", type=int, nargs="+", default=[64, 256, 1024, 4096])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--mc-m", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    sampler = Sampler("uniform-scalar", {"low": 0.0, "high": 1.0})
    for name, spec in (("squared", squared_norm()), ("norm", norm())):
        rep = run_mean_convergence(
            spec, sampler, args.grid, range(args.seeds), args.mc_m, master_seed=args.seed, jobs=args.jobs
        )
        base = os.path.join(args.out, f"mean_{name}")
        atomic_write(base + ".csv", rep.to_csv())
        emit_convergence_svg(rep, base + ".svg")
        print(f"{name} loss, oracle risk {rep.rows[0].oracle_risk:.6f}")
        for est, curve in rep.median_excess().items():
            print("  " + est.ljust(11) + "  ".join(f"n={n}: {v:+.2e}" for n, v in curve.items()))


if __name__ == "__main__":
    main()
