"""Toy 2-D bridges: fit on n training points, simulate fresh source draws, write snapshots.

    python3 scripts/toy_bridges.py --out runs/toy
"""

import argparse
import sys

from sinkhorn_bridge import cli

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs/toy-bridges")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=2000)
    args = p.parse_args()
    sys.exit(cli.main(["demo", "toy-bridges", "--out", args.out, "--seed", str(args.seed),
                       "--n", str(args.n)]))
