"""Excess risk of the Voronoi regression estimate, y = x + U[-0.1, 0.1].

    python scripts/regression_convergence.py --out results/
"""

import argparse
import os

from frechetq.cli import atomic_write, emit_convergence_svg
from frechetq.experiments import Sampler, run_regression_convergence
from frechetq.metric import squared_norm


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--grid", type=int, nargs="+", default=[256, 1024, 4096])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--mc-m", type=int, default=100_000)
    ap.add_argument("--link", default="identity", choices=["identity", "square", "sine"])
    ap.add_argument("--noise", type=float, default=0.1, help="half-width of the uniform noise")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    pair = Sampler(
        "regression-pair",
        {"x": {"kind": "uniform-scalar"}, "link": args.link, "noise": {"kind": "uniform", "scale": args.noise}},
    )
    rep = run_regression_convergence(
        squared_norm(), pair, args.grid, range(args.seeds), "sqrt", args.mc_m, master_seed=args.seed, jobs=args.jobs
    )
    base = os.path.join(args.out, f"regression_{args.link}")
    atomic_write(base + ".csv", rep.to_csv())
    emit_convergence_svg(rep, base + ".svg")
    print(f"oracle risk (noise variance) {rep.rows[0].oracle_risk:.6f}")
    for n, v in rep.median_excess()["voronoi"].items():
        k = next(r.k for r in rep.rows if r.n == n)
        print(f"  n={n:<6} k={k:<4} median excess {v:+.2e}")


if __name__ == "__main__":
    main()
