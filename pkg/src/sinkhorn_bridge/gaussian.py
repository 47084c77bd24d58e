"""Closed-form Schrödinger bridge between two Gaussians, and the drift-MSE harness.

The entropic plan between N(a, A) and N(b, B) (cost ``0.5 |x - y|^2``,
regularisation ``eps``) is Gaussian with cross-covariance

    C = A^{1/2} (A^{1/2} B A^{1/2} + eps^2/4 I)^{1/2} A^{-1/2} - eps/2 I.

The bridge is a mixture of Brownian bridges over that plan, so every
time-marginal is Gaussian and the drift ``E[X_1 - z | X_t = z] / (1 - t)``
is affine in ``z``.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .data import SampleSet
from .drift import BridgeModel, drift_batch, from_potentials
from .errors import DimensionError
from .sinkhorn import SolverConfig, fit

EIG_FLOOR = 1e-12


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _eig_checked(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = np.linalg.eigh(_sym(M))
    if vals.min() < EIG_FLOOR:
        raise ValueError(f"matrix is not positive definite (smallest eigenvalue {vals.min():.3e})")
    return vals, vecs


def sqrtm_spd(M: np.ndarray) -> np.ndarray:
    vals, vecs = _eig_checked(M)
    return _sym((vecs * np.sqrt(vals)) @ vecs.T)


def inv_sqrtm_spd(M: np.ndarray) -> np.ndarray:
    vals, vecs = _eig_checked(M)
    return _sym((vecs / np.sqrt(vals)) @ vecs.T)


def _matvec_rows(Z: np.ndarray, G: np.ndarray) -> np.ndarray:
    # Z @ G.T without BLAS so results do not depend on thread count or batch shape.
    return (Z[:, None, :] * G[None, :, :]).sum(axis=2)


@dataclass(frozen=True, eq=False)
class GaussianParams:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        mean = np.array(self.mean, dtype=np.float64).reshape(-1)
        cov = np.array(self.cov, dtype=np.float64)
        if cov.ndim == 0:
            cov = cov.reshape(1, 1)
        if cov.shape != (mean.size, mean.size):
            raise DimensionError(f"covariance shape {cov.shape} does not match mean of length {mean.size}")
        if np.abs(cov - cov.T).max() > 1e-12:
            raise ValueError("covariance is not symmetric")
        _eig_checked(cov)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    def sample(self, count: int, seed: int) -> SampleSet:
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        L = sqrtm_spd(self.cov)
        xi = rng.standard_normal((count, self.dim))
        return SampleSet(self.mean + _matvec_rows(xi, L))


@dataclass(frozen=True, eq=False)
class GaussianBridge:
    source: GaussianParams
    target: GaussianParams
    eps: float
    cross_cov: np.ndarray

    @property
    def dim(self) -> int:
        return self.source.dim

    def joint_cov(self) -> np.ndarray:
        A, B, C = self.source.cov, self.target.cov, self.cross_cov
        return np.block([[A, C], [C.T, B]])

    def marginal(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.source.mean, self.target.mean
        A, B, C = self.source.cov, self.target.cov, self.cross_cov
        s = 1.0 - t
        mean = s * a + t * b
        cov = s * s * A + t * t * B + t * s * (C + C.T) + t * s * self.eps * np.eye(self.dim)
        return mean, _sym(cov)

    def drift_coefficients(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """``(G_t, h_t)`` with ``b_t(z) = G_t z + h_t``."""
        if not t < 1.0:
            raise ValueError(f"drift is singular at t >= 1 (got t={t})")
        s = 1.0 - t
        m_t, S_t = self.marginal(t)
        cross = s * self.cross_cov.T + t * self.target.cov  # Cov(X_1, X_t)
        K = np.linalg.solve(S_t, cross.T).T
        G = (K - np.eye(self.dim)) / s
        h = (self.target.mean - K @ m_t) / s
        return G, h

    def target_potential(self) -> tuple[np.ndarray, np.ndarray]:
        """Quadratic ``g(y) = 0.5 y'Qy + q'y`` (up to a constant) of the optimal plan.

        Read off the conditional law of ``Y | X = x`` under the plan.
        """
        A, B, C = self.source.cov, self.target.cov, self.cross_cov
        a, b = self.source.mean, self.target.mean
        Ainv_C = np.linalg.solve(A, C)
        S = _sym(B - C.T @ Ainv_C)
        Sinv, Binv = np.linalg.inv(S), np.linalg.inv(B)
        Q = np.eye(self.dim) + self.eps * (Binv - Sinv)
        q = self.eps * (Sinv @ (b - Ainv_C.T @ a) - Binv @ b)
        return _sym(Q), q


def gaussian_bridge(source: GaussianParams, target: GaussianParams, eps: float) -> GaussianBridge:
    if source.dim != target.dim:
        raise DimensionError("source and target dimensions differ")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    A, B = source.cov, target.cov
    d = source.dim
    As = sqrtm_spd(A)
    As_inv = inv_sqrtm_spd(A)
    core = sqrtm_spd(As @ B @ As + (eps * eps / 4.0) * np.eye(d))
    C = As @ core @ As_inv - (eps / 2.0) * np.eye(d)
    return GaussianBridge(source, target, float(eps), C)


def reversed_bridge(bridge: GaussianBridge) -> GaussianBridge:
    return gaussian_bridge(bridge.target, bridge.source, bridge.eps)


def oracle_drift(bridge: GaussianBridge, t: float, z) -> np.ndarray:
    G, h = bridge.drift_coefficients(t)
    return G @ np.asarray(z, dtype=np.float64) + h


def oracle_drift_batch(bridge: GaussianBridge, t: float, Z) -> np.ndarray:
    G, h = bridge.drift_coefficients(t)
    return _matvec_rows(np.asarray(Z, dtype=np.float64), G) + h


def oracle_marginal(bridge: GaussianBridge, t: float) -> GaussianParams:
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    if t == 0.0:
        return bridge.source
    if t == 1.0:
        return bridge.target
    mean, cov = bridge.marginal(t)
    return GaussianParams(mean, cov)


def sample_marginal(bridge: GaussianBridge, t: float, count: int, seed: int) -> SampleSet:
    return oracle_marginal(bridge, t).sample(count, seed)


def random_spd(dim: int, seed: int, low: float = 0.5, high: float = 2.0) -> np.ndarray:
    """``Q diag(lam) Q'`` with ``Q`` from a seeded QR and ``lam ~ U[low, high]``."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    Q, R = np.linalg.qr(rng.standard_normal((dim, dim)))
    Q = Q * np.sign(np.diag(R))
    lam = rng.uniform(low, high, size=dim)
    return _sym((Q * lam) @ Q.T)


# -- drift MSE experiment -----------------------------------------------------


@dataclass(frozen=True)
class MSERow:
    n: int
    tau: float
    trial: int
    mse: float


def drift_mse(model: BridgeModel | GaussianBridge, oracle: GaussianBridge, t: float,
              n_mc: int, seed: int) -> float:
    """Monte Carlo ``E ||b_hat_t(Z) - b_t(Z)||^2`` with ``Z`` from the oracle marginal."""
    Z = sample_marginal(oracle, t, n_mc, seed).points
    return drift_mse_at(model, oracle, t, Z)


def drift_mse_at(model: BridgeModel | GaussianBridge, oracle: GaussianBridge, t: float,
                 Z: np.ndarray) -> float:
    if isinstance(model, GaussianBridge):
        est = oracle_drift_batch(model, t, Z)
    else:
        est = drift_batch(model, t, Z)
    err = est - oracle_drift_batch(oracle, t, Z)
    return float((err * err).sum(axis=1).mean())


def benchmark_bridge(dim: int, eps: float, seed: int) -> GaussianBridge:
    """Centered ``N(0, I) -> N(0, B)`` with a seeded random SPD ``B``."""
    src = GaussianParams(np.zeros(dim), np.eye(dim))
    tgt = GaussianParams(np.zeros(dim), random_spd(dim, seed))
    return gaussian_bridge(src, tgt, eps)


def mse_experiment(
    dim: int,
    eps: float,
    n_grid: Sequence[int],
    tau_grid: Sequence[float],
    trials: int,
    n_mc: int,
    seed: int,
    bridge: GaussianBridge | None = None,
    tol: float = 1e-6,
    max_iter: int = 10_000,
) -> list[MSERow]:
    """Drift MSE of the Sinkhorn plug-in estimator over an ``(n, tau)`` grid.

    ``B`` is drawn once per experiment. Within a trial the Monte Carlo points
    for each ``tau`` are shared across ``n``.
    """
    if any(not 0.0 <= t < 1.0 for t in tau_grid):
        raise ValueError("every tau must lie in [0, 1)")
    if bridge is None:
        bridge = benchmark_bridge(dim, eps, seed)
    cfg = SolverConfig(eps=eps, tol=tol, max_iter=max_iter)
    rows: list[MSERow] = []
    for trial in range(trials):
        mc = [sample_marginal(bridge, tau, n_mc, _mix(seed, trial, 0, k)).points
              for k, tau in enumerate(tau_grid)]
        for n in n_grid:
            X = bridge.source.sample(n, _mix(seed, trial, n, 1))
            Y = bridge.target.sample(n, _mix(seed, trial, n, 2))
            pair = fit(X, Y, cfg)
            model = from_potentials(pair, X, Y, "forward")
            for tau, Z in zip(tau_grid, mc):
                rows.append(MSERow(int(n), float(tau), trial, drift_mse_at(model, bridge, tau, Z)))
    return rows


def _mix(*parts: int) -> int:
    return int(np.random.SeedSequence([p & (2**64 - 1) for p in parts]).generate_state(1, np.uint64)[0])


def summarize(rows: Iterable[MSERow]) -> list[dict]:
    """Median and interquartile range of the MSE for every ``(n, tau)`` cell."""
    cells: dict[tuple[int, float], list[float]] = {}
    for r in rows:
        cells.setdefault((r.n, r.tau), []).append(r.mse)
    out = []
    for (n, tau), vals in sorted(cells.items()):
        q1, med, q3 = np.percentile(vals, [25, 50, 75])
        out.append({"n": n, "tau": tau, "median": float(med), "q1": float(q1), "q3": float(q3),
                    "trials": len(vals)})
    return out


def loglog_slopes(rows: Iterable[MSERow]) -> dict[float, float]:
    """Least-squares slope of ``log median MSE`` against ``log n``, per tau."""
    by_tau: dict[float, list[tuple[int, float]]] = {}
    for cell in summarize(rows):
        by_tau.setdefault(cell["tau"], []).append((cell["n"], cell["median"]))
    slopes = {}
    for tau, pts in by_tau.items():
        ns, meds = np.array(pts, dtype=np.float64).T
        slopes[tau] = float(np.polyfit(np.log(ns), np.log(meds), 1)[0])
    return slopes


def write_mse_csv(rows: Iterable[MSERow], path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "tau", "trial", "mse"])
        for r in rows:
            w.writerow([r.n, repr(r.tau), r.trial, repr(r.mse)])
