"""Drift MSE of the plug-in estimator against the closed-form Gaussian bridge.

Prints the median MSE table and per-tau log-log slopes.

    python3 scripts/gaussian_mse.py --dims 1 --out runs/gauss-d1
"""

import argparse
import time

from sinkhorn_bridge.gaussian import loglog_slopes, mse_experiment, summarize, write_mse_csv
from pathlib import Path

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--dims", type=int, default=3)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--n-mc", type=int, default=10_000)
    p.add_argument("--max-log2n", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="runs/gaussian-mse")
    args = p.parse_args()

    n_grid = [2**k for k in range(6, args.max_log2n + 1)]
    taus = [0.2, 0.5, 0.8]
    start = time.perf_counter()
    rows = mse_experiment(args.dims, args.eps, n_grid, taus, args.trials, args.n_mc, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_mse_csv(rows, out / "mse.csv")
    print(f"{'n':>6} {'tau':>5} {'median':>12} {'q1':>12} {'q3':>12}")
    for c in summarize(rows):
        print(f"{c['n']:>6} {c['tau']:>5} {c['median']:>12.4e} {c['q1']:>12.4e} {c['q3']:>12.4e}")
    for tau, slope in loglog_slopes(rows).items():
        print(f"tau={tau}: slope {slope:.3f}")
    print(f"elapsed {time.perf_counter() - start:.1f}s")
