"""Euler-Maruyama simulation of a bridge SDE and an exact marginal sampler.

Noise is drawn per trajectory from a Philox stream keyed by
``(seed, trajectory index)``; the step index selects the position in the
stream. A path therefore never depends on batch size or scheduling.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .data import SampleSet
from .drift import BridgeModel, drift_batch
from .errors import DimensionError, NumericalError
from .sinkhorn import PlanView

MASK64 = (1 << 64) - 1
CHUNK = 2048


@dataclass(frozen=True)
class SimConfig:
    tau: float
    steps: int
    eps: float
    seed: int = 0
    zero_noise: bool = False  # test hook: drop the Brownian increment
    keep_paths: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")

    @property
    def step_size(self) -> float:
        return self.tau / self.steps

    def time_grid(self) -> np.ndarray:
        times = np.arange(self.steps + 1) * self.step_size
        times[-1] = self.tau
        return times


@dataclass(frozen=True, eq=False)
class TrajectoryBatch:
    """``states`` is ``B x (N + 1) x d``, or ``B x 1 x d`` with ``keep_paths=False``."""

    times: np.ndarray
    states: np.ndarray
    seed: int
    config: SimConfig

    @property
    def count(self) -> int:
        return self.states.shape[0]


def trajectory_noise(seed: int, traj: int, steps: int, dim: int) -> np.ndarray:
    """Standard normal increments ``steps x dim`` for one trajectory."""
    bitgen = np.random.Philox(key=np.array([seed & MASK64, traj], dtype=np.uint64))
    return np.random.Generator(bitgen).standard_normal((steps, dim))


def _initial_states(model: BridgeModel, init: SampleSet | np.ndarray) -> np.ndarray:
    pts = init.points if isinstance(init, SampleSet) else np.asarray(init, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != model.dim:
        raise DimensionError(f"initial points have shape {pts.shape}, model is {model.dim}-D")
    return np.array(pts, dtype=np.float64)


def simulate(model: BridgeModel, init: SampleSet | np.ndarray, cfg: SimConfig) -> TrajectoryBatch:
    """Run ``x <- x + eta * b(k eta, x) + sqrt(eta * eps) * xi`` for ``k < N``.

    One trajectory per row of ``init``.
    """
    if not math.isclose(model.eps, cfg.eps, rel_tol=1e-12):
        raise ValueError(f"model eps {model.eps} differs from simulation eps {cfg.eps}")
    x0 = _initial_states(model, init)
    B, d = x0.shape
    N, eta = cfg.steps, cfg.step_size
    times = cfg.time_grid()
    scale = 0.0 if cfg.zero_noise else math.sqrt(eta * cfg.eps)
    states = np.empty((B, N + 1 if cfg.keep_paths else 1, d))

    for start in range(0, B, CHUNK):
        rows = slice(start, min(start + CHUNK, B))
        x = x0[rows].copy()
        if cfg.zero_noise:
            noise = None
        else:
            noise = np.stack([trajectory_noise(cfg.seed, i, N, d) for i in range(rows.start, rows.stop)])
        if cfg.keep_paths:
            states[rows, 0] = x
        for k in range(N):
            x = x + eta * drift_batch(model, k * eta, x)
            if noise is not None:
                x = x + scale * noise[:, k]
            if not np.all(np.isfinite(x)):
                bad = rows.start + int(np.flatnonzero(~np.isfinite(x).all(axis=1))[0])
                raise NumericalError(f"non-finite state in trajectory {bad} at step {k + 1}")
            if cfg.keep_paths:
                states[rows, k + 1] = x
        if not cfg.keep_paths:
            states[rows, 0] = x
    if not cfg.keep_paths:
        times = times[-1:]
    return TrajectoryBatch(times, states, cfg.seed, cfg)


def endpoints(batch: TrajectoryBatch) -> SampleSet:
    return SampleSet(batch.states[:, -1, :].copy(), label="endpoints")


def write_trajectories(batch: TrajectoryBatch, path: str | os.PathLike) -> None:
    """CSV with columns ``traj, step, t, x0..x{d-1}``."""
    B, T, d = batch.states.shape
    steps = range(T) if T > 1 else [batch.config.steps]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["traj", "step", "t"] + [f"x{k}" for k in range(d)])
        for b in range(B):
            for col, step in enumerate(steps):
                t = batch.times[col]
                w.writerow([b, step, repr(float(t))] + [repr(float(v)) for v in batch.states[b, col]])


def bridge_mixture_sample(view: PlanView, t: float, count: int, seed: int) -> SampleSet:
    """Exact draws from the time-``t`` marginal of the Brownian-bridge mixture over the plan."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    if count < 1:
        raise ValueError("count must be positive")
    plan = view.coupling().ravel()
    total = plan.sum()
    if not (np.isfinite(total) and total > 0):
        raise NumericalError("plan is numerically degenerate (no positive mass)")
    rng = np.random.default_rng(np.random.SeedSequence(seed & MASK64))
    idx = rng.choice(plan.size, size=count, p=plan / total)
    n = view.target.n
    X = view.source.points[idx // n]
    Y = view.target.points[idx % n]
    xi = rng.standard_normal(X.shape)
    pts = t * Y + (1.0 - t) * X + math.sqrt(t * (1.0 - t) * view.pair.eps) * xi
    return SampleSet(pts, label=f"bridge-mixture t={t}")
