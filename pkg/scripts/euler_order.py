"""Endpoint error of the zero-noise Föllmer flow versus the number of Euler steps."""

import argparse

import numpy as np
from scipy.integrate import solve_ivp

from sinkhorn_bridge import SampleSet, SimConfig, drift, follmer_model, simulate

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--eps", type=float, default=1.0)
    args = p.parse_args()

    atoms = SampleSet(np.array([[1.0, 0.0], [-0.5, 0.8], [0.2, -0.9]]))
    model = follmer_model(atoms, args.eps)
    x0 = np.zeros((1, 2))
    ref = solve_ivp(lambda t, x: drift(model, t, x), (0.0, args.tau), x0[0],
                    rtol=1e-12, atol=1e-13, method="DOP853").y[:, -1]
    prev = None
    for N in (25, 50, 100, 200, 400):
        end = simulate(model, x0, SimConfig(args.tau, N, args.eps, zero_noise=True)).states[0, -1]
        err = float(np.linalg.norm(end - ref))
        ratio = "" if prev is None else f"  ratio {prev / err:.3f}"
        print(f"N={N:4d}  error {err:.3e}{ratio}")
        prev = err
