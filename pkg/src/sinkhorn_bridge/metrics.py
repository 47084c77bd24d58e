"""Sample-quality metrics: BW-UVP, energy distance, 1-D W2, drift MSE."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import numpy as np

from ._parallel import map_blocks
from .data import SampleSet
from .errors import DimensionError
from .gaussian import GaussianBridge, drift_mse
from .drift import BridgeModel

ENERGY_MAX_POINTS = 4000


@dataclass(frozen=True, eq=False)
class MomentSummary:
    mean: np.ndarray
    cov: np.ndarray
    count: int

    @property
    def dim(self) -> int:
        return self.mean.size


def empirical_moments(samples: SampleSet) -> MomentSummary:
    """Weighted mean and covariance, normalised by the total weight (no Bessel correction)."""
    if samples.n < 2:
        raise ValueError("moments need at least two samples")
    w = samples.weights[:, None]
    mean = (samples.points * w).sum(axis=0)
    centered = samples.points - mean
    weighted = centered * w
    cov = np.stack([(weighted * centered[:, k, None]).sum(axis=0) for k in range(samples.dim)])
    return MomentSummary(mean, 0.5 * (cov + cov.T), samples.n)


def _psd_sqrt(M: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (M + M.T))
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def bures_wasserstein_sq(p: MomentSummary, q: MomentSummary) -> float:
    """Squared 2-Wasserstein distance between the Gaussians with these moments."""
    if p.dim != q.dim:
        raise DimensionError(f"moment summaries of dimension {p.dim} and {q.dim}")
    if np.array_equal(p.mean, q.mean) and np.array_equal(p.cov, q.cov):
        return 0.0  # the square-root route leaves roundoff here
    sp = _psd_sqrt(p.cov)
    cross = _psd_sqrt(sp @ q.cov @ sp)
    diff = p.mean - q.mean
    val = float(diff @ diff + np.trace(p.cov) + np.trace(q.cov) - 2.0 * np.trace(cross))
    return max(val, 0.0)


def bw_uvp(generated: SampleSet, reference: SampleSet) -> float:
    """``100 * BW^2(N_gen, N_ref) / (0.5 * tr Cov_ref)``, in percent."""
    ref = empirical_moments(reference)
    total_var = float(np.trace(ref.cov))
    if not total_var > 0:
        raise ValueError("reference set has zero total variance")
    return 100.0 * bures_wasserstein_sq(empirical_moments(generated), ref) / (0.5 * total_var)


def mse_drift(model: BridgeModel | GaussianBridge, oracle: GaussianBridge, t: float,
              n_mc: int, seed: int) -> float:
    return drift_mse(model, oracle, t, n_mc, seed)


def _weighted_mean_distance(X: np.ndarray, wx: np.ndarray, Y: np.ndarray, wy: np.ndarray) -> float:
    block = max(1, (1 << 20) // Y.shape[0])

    def work(s: slice) -> float:
        sq = np.zeros((s.stop - s.start, Y.shape[0]))
        for k in range(X.shape[1]):
            diff = X[s, k, None] - Y[None, :, k]
            sq += diff * diff
        return float((wx[s] * (np.sqrt(sq) * wy[None, :]).sum(axis=1)).sum())

    return float(np.sum(map_blocks(work, X.shape[0], block)))


def _subsample(s: SampleSet, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    if s.n <= ENERGY_MAX_POINTS:
        return s.points, s.weights
    if s.is_uniform:
        idx = np.sort(rng.choice(s.n, ENERGY_MAX_POINTS, replace=False))
    else:
        idx = rng.choice(s.n, ENERGY_MAX_POINTS, replace=True, p=s.weights)
    return s.points[idx], np.full(ENERGY_MAX_POINTS, 1.0 / ENERGY_MAX_POINTS)


def energy_distance(a: SampleSet, b: SampleSet, seed: int = 0) -> float:
    """Energy distance between the two weighted empirical measures.

    ``2 E|X - Y| - E|X - X'| - E|Y - Y'|`` with all pairs, diagonal included,
    so identical sets give exactly zero. Sets above ``ENERGY_MAX_POINTS`` are
    subsampled with the given seed.
    """
    if a.dim != b.dim:
        raise DimensionError(f"sets of dimension {a.dim} and {b.dim}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    X, wx = _subsample(a, rng)
    Y, wy = _subsample(b, rng)
    exy = _weighted_mean_distance(X, wx, Y, wy)
    exx = _weighted_mean_distance(X, wx, X, wx)
    eyy = _weighted_mean_distance(Y, wy, Y, wy)
    return max(2.0 * exy - exx - eyy, 0.0)


def w2_1d(a: SampleSet, b: SampleSet) -> float:
    """Exact 2-Wasserstein distance on the line via the quantile coupling."""
    if a.dim != 1 or b.dim != 1:
        raise DimensionError("w2-1d needs one-dimensional samples")
    xa, xb = a.points[:, 0], b.points[:, 0]
    ia, ib = np.argsort(xa, kind="stable"), np.argsort(xb, kind="stable")
    xa, wa = xa[ia], a.weights[ia]
    xb, wb = xb[ib], b.weights[ib]
    if a.is_uniform and b.is_uniform and a.n == b.n:
        return float(np.sqrt(np.mean((xa - xb) ** 2)))
    ca, cb = np.cumsum(wa), np.cumsum(wb)
    ca[-1] = cb[-1] = 1.0
    cuts = np.union1d(ca, cb)
    mass = np.diff(np.concatenate([[0.0], cuts]))
    mid = cuts - 0.5 * mass
    qa = xa[np.minimum(np.searchsorted(ca, mid), a.n - 1)]
    qb = xb[np.minimum(np.searchsorted(cb, mid), b.n - 1)]
    return float(np.sqrt(np.sum(mass * (qa - qb) ** 2)))


LEDGER_HEADER = ["metric", "value", "params", "seed"]


def append_ledger(path: str | os.PathLike, metric: str, value: float, params: dict, seed: int) -> None:
    """Append one ``(metric, value, params-json, seed)`` row, writing a header for new files."""
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(LEDGER_HEADER)
        w.writerow([metric, repr(float(value)), json.dumps(params, sort_keys=True), seed])
