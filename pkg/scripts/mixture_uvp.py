"""BW-UVP of Gaussian -> 8-mode mixture samples over seeded trials, at several fit sizes.

    python3 scripts/mixture_uvp.py --sizes 256,4096 --trials 5
"""

import argparse

import numpy as np

from sinkhorn_bridge.experiments import mixture_uvp_trial

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", default="256,4096")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    for n in [int(v) for v in args.sizes.split(",")]:
        vals = []
        for trial in range(args.trials):
            res = mixture_uvp_trial(n=n, seed=args.seed + trial)
            vals.append(res.bw_uvp)
            print(f"n={n} trial={trial} bw-uvp={res.bw_uvp:.4f} iterations={res.iterations}", flush=True)
        print(f"n={n}: {np.mean(vals):.4f} +/- {np.std(vals):.4f}")
