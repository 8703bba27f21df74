"""Runtime growth with dimension: doubles d by appending uniform-noise
features and fits the log-log slope of first-solve time per solver.

    python3 scripts/dims_sweep.py --dataset sg --steps 4
"""

import argparse
import sys

import numpy as np

from altclust.cli import bench_solvers, DEFAULTS
from altclust.data import GENERATORS, preprocess_center_scale

HYPER = {"sg": (1.0, 0.04, 1), "moon": (0.1, 1.0, 3)}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--dataset", default="sg", choices=sorted(HYPER))
    ap.add_argument("--steps", type=int, default=4)
    ap.add_argument("--solvers", default="ism,sm,dg")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    sigma, lam, q = HYPER[args.dataset]
    cfg = dict(DEFAULTS, sigma=sigma, q=q, k=2, seed=args.seed, **{"lambda": lam})
    ds = GENERATORS[args.dataset](args.seed)
    ds.X = preprocess_center_scale(ds.X)
    rng = np.random.default_rng(args.seed)
    solvers = args.solvers.split(",")
    times = {s: [] for s in solvers}
    dims = []
    X = ds.X
    for _ in range(args.steps):
        ds.X = X
        dims.append(X.shape[1])
        for row in bench_solvers(ds, cfg, solvers):
            times[row["solver"]].append(row["first_solve_time_s"])
            print(f"{row['solver']:>3} d={row['d']:<4} it={row['first_solve_iterations']:<5} "
                  f"t={row['first_solve_time_s']:.4f}s", flush=True)
        X = np.hstack([X, preprocess_center_scale(rng.uniform(0, 1, X.shape))])
    if len(dims) > 1:
        for s in solvers:
            slope = np.polyfit(np.log(dims), np.log(times[s]), 1)[0]
            print(f"{s}: log-log slope of time vs d = {slope:.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
