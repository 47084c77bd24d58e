"""Log-domain Sinkhorn for entropic OT with cost ``0.5 * ||x - y||^2``.

Potentials are kept without the Gaussian normalising constant, so the plan
density against ``a (x) b`` is ``exp((f_i + g_j - c_ij) / eps)``. Drift
estimates only depend on the potentials up to an additive constant.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._parallel import map_blocks
from .data import SampleSet
from .errors import DimensionError, NumericalError

log = logging.getLogger(__name__)

# Cache the scaled cost (and its transpose) below this many entries.
CACHE_ENTRIES = 1 << 25
BLOCK_ENTRIES = 1 << 16


def cost(x, y) -> float:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise DimensionError(f"cost between vectors of length {x.size} and {y.size}")
    diff = x - y
    return 0.5 * float(np.dot(diff, diff))


def cost_matrix(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Pairwise ``0.5 * ||X_i - Y_j||^2``, accumulated coordinate by coordinate.

    Avoids the ``|x|^2 + |y|^2 - 2 x.y`` expansion: no cancellation, no BLAS,
    and ``cost_matrix(X, Y).T`` equals ``cost_matrix(Y, X)`` bitwise.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape[1] != Y.shape[1]:
        raise DimensionError(f"point dimensions differ: {X.shape[1]} vs {Y.shape[1]}")
    out = np.zeros((X.shape[0], Y.shape[0]))
    for k in range(X.shape[1]):
        diff = X[:, k, None] - Y[None, :, k]
        out += diff * diff
    out *= 0.5
    return out


@dataclass(frozen=True)
class SolverConfig:
    eps: float
    tol: float = 1e-6
    max_iter: int = 10_000
    check_every: int = 10

    def __post_init__(self) -> None:
        if not (self.eps > 0 and math.isfinite(self.eps)):
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1 or self.check_every < 1:
            raise ValueError("max_iter and check_every must be >= 1")


@dataclass(frozen=True, eq=False)
class PotentialPair:
    f: np.ndarray
    g: np.ndarray
    eps: float
    iterations: int = 0
    marginal_error: float = math.inf
    converged: bool = False

    def __post_init__(self) -> None:
        f = np.array(self.f, dtype=np.float64).reshape(-1)
        g = np.array(self.g, dtype=np.float64).reshape(-1)
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
            raise NumericalError("potentials contain non-finite entries")
        f.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)

    def shifted(self, c: float) -> "PotentialPair":
        """Gauge transform ``(f + c, g - c)``; the plan is unchanged."""
        return PotentialPair(self.f + c, self.g - c, self.eps, self.iterations,
                             self.marginal_error, self.converged)

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "f": self.f.tolist(),
            "g": self.g.tolist(),
            "iterations": self.iterations,
            "marginal_error": self.marginal_error,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PotentialPair":
        return cls(np.array(d["f"]), np.array(d["g"]), float(d["eps"]), int(d["iterations"]),
                   float(d["marginal_error"]), bool(d["converged"]))

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "PotentialPair":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


class _ScaledCost:
    """Row blocks of ``C / eps`` and ``C.T / eps``, cached or recomputed.

    Both paths produce bitwise-identical blocks, so caching is invisible.
    """

    def __init__(self, X: np.ndarray, Y: np.ndarray, eps: float):
        self.X, self.Y, self.eps = X, Y, eps
        self.m, self.n = X.shape[0], Y.shape[0]
        self.cached = self.m * self.n <= CACHE_ENTRIES
        if self.cached:
            self._rows = cost_matrix(X, Y) / eps
            self._cols = np.ascontiguousarray(self._rows.T)

    def rows(self, s: slice) -> np.ndarray:
        return self._rows[s] if self.cached else cost_matrix(self.X[s], self.Y) / self.eps

    def cols(self, s: slice) -> np.ndarray:
        return self._cols[s] if self.cached else cost_matrix(self.Y[s], self.X) / self.eps


def _neg_softmin(blocks: Callable[[slice], np.ndarray], count: int, width: int,
                 h: np.ndarray) -> np.ndarray:
    """For each row r return ``logsumexp_k(h_k - K_rk)`` with max-subtraction."""
    block = max(1, BLOCK_ENTRIES // max(width, 1))

    def work(s: slice) -> np.ndarray:
        A = np.subtract(h[None, :], blocks(s))
        M = A.max(axis=1)
        M[~np.isfinite(M)] = 0.0
        A -= M[:, None]
        np.exp(A, out=A)
        return M + np.log(A.sum(axis=1))

    return np.concatenate(map_blocks(work, count, block))


def _log_weights(w: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(w)


class _Updates:
    """Exact block updates of the dual potentials."""

    def __init__(self, source: SampleSet, target: SampleSet, eps: float):
        if source.dim != target.dim:
            raise DimensionError(f"source is {source.dim}-D but target is {target.dim}-D")
        self.eps = eps
        self.loga = _log_weights(source.weights)
        self.logb = _log_weights(target.weights)
        self.a, self.b = source.weights, target.weights
        self.K = _ScaledCost(source.points, target.points, eps)

    def f_from_g(self, g: np.ndarray) -> np.ndarray:
        K = self.K
        return -self.eps * _neg_softmin(K.rows, K.m, K.n, g / self.eps + self.logb)

    def g_from_f(self, f: np.ndarray) -> np.ndarray:
        K = self.K
        return -self.eps * _neg_softmin(K.cols, K.n, K.m, f / self.eps + self.loga)

    def row_masses(self, f: np.ndarray, g: np.ndarray) -> np.ndarray:
        return self.a * np.exp((f - self.f_from_g(g)) / self.eps)

    def col_masses(self, f: np.ndarray, g: np.ndarray) -> np.ndarray:
        return self.b * np.exp((g - self.g_from_f(f)) / self.eps)


def update_f(source: SampleSet, target: SampleSet, g: np.ndarray, eps: float) -> np.ndarray:
    """``f_i = -eps * log sum_j b_j exp((g_j - c_ij) / eps)``."""
    return _Updates(source, target, eps).f_from_g(np.asarray(g, dtype=np.float64))


def update_g(source: SampleSet, target: SampleSet, f: np.ndarray, eps: float) -> np.ndarray:
    """``g_j = -eps * log sum_i a_i exp((f_i - c_ij) / eps)``."""
    return _Updates(source, target, eps).g_from_f(np.asarray(f, dtype=np.float64))


def _check_finite(v: np.ndarray, what: str, iteration: int) -> None:
    if not np.all(np.isfinite(v)):
        raise NumericalError(f"non-finite {what} at Sinkhorn iteration {iteration}")


def fit(
    source: SampleSet,
    target: SampleSet,
    cfg: SolverConfig,
    callback: Optional[Callable[[int, np.ndarray, np.ndarray], None]] = None,
) -> PotentialPair:
    """Run Sinkhorn from ``f = 0``; one sweep is a g-update then an f-update.

    The marginal error is checked every ``cfg.check_every`` sweeps and at the
    last one. ``callback(k, f, g)`` is invoked after each sweep ``k``.
    Running out of iterations is reported through ``converged=False``.
    """
    up = _Updates(source, target, cfg.eps)
    f = np.zeros(source.n)
    g_next: Optional[np.ndarray] = None
    err = math.inf
    k = 0
    for k in range(1, cfg.max_iter + 1):
        g = up.g_from_f(f) if g_next is None else g_next
        g_next = None
        _check_finite(g, "g", k)
        f = up.f_from_g(g)
        _check_finite(f, "f", k)
        if callback is not None:
            callback(k, f, g)
        if k % cfg.check_every == 0 or k == cfg.max_iter:
            # f was just updated so rows are exact; the next g-update gives the column error.
            g_next = up.g_from_f(f)
            err = float(np.abs(up.b * np.exp((g - g_next) / cfg.eps) - up.b).sum())
            if err <= cfg.tol:
                break
    converged = err <= cfg.tol
    if not converged:
        log.warning("Sinkhorn stopped after %d iterations with marginal error %.3e", k, err)
    return PotentialPair(f, g, cfg.eps, k, err, converged)


def marginal_error(source: SampleSet, target: SampleSet, pair: PotentialPair) -> float:
    """``||pi 1 - a||_1 + ||pi^T 1 - b||_1`` for the plan defined by ``pair``."""
    up = _Updates(source, target, pair.eps)
    rows = up.row_masses(pair.f, pair.g)
    cols = up.col_masses(pair.f, pair.g)
    return float(np.abs(rows - up.a).sum() + np.abs(cols - up.b).sum())


def dual_objective(source: SampleSet, target: SampleSet, pair: PotentialPair) -> float:
    up = _Updates(source, target, pair.eps)
    mass = float(up.row_masses(pair.f, pair.g).sum())
    return float(up.a @ pair.f + up.b @ pair.g) - pair.eps * (mass - 1.0)


@dataclass(frozen=True)
class PlanView:
    source: SampleSet
    target: SampleSet
    pair: PotentialPair

    def __post_init__(self) -> None:
        if self.pair.f.shape[0] != self.source.n or self.pair.g.shape[0] != self.target.n:
            raise DimensionError("potential lengths do not match the sample sets")
        if self.source.dim != self.target.dim:
            raise DimensionError("source and target dimensions differ")

    def log_density(self) -> np.ndarray:
        p = self.pair
        C = cost_matrix(self.source.points, self.target.points)
        return (p.f[:, None] + p.g[None, :] - C) / p.eps

    def density(self) -> np.ndarray:
        """``gamma_ij``: density of the plan against ``a (x) b``."""
        return np.exp(self.log_density())

    def coupling(self) -> np.ndarray:
        """The discrete plan ``a_i b_j gamma_ij``."""
        return self.source.weights[:, None] * self.target.weights[None, :] * self.density()

    def primal_objective(self) -> float:
        """``<pi, c> + eps * KL(pi || a (x) b)`` evaluated directly."""
        logd = self.log_density()
        pi = self.source.weights[:, None] * self.target.weights[None, :] * np.exp(logd)
        C = cost_matrix(self.source.points, self.target.points)
        return float((pi * C).sum() + self.pair.eps * (pi * logd).sum())


def plan_density(view: PlanView, i: int, j: int) -> float:
    if not (0 <= i < view.source.n and 0 <= j < view.target.n):
        raise IndexError(f"plan index ({i}, {j}) out of range for {view.source.n} x {view.target.n}")
    p = view.pair
    c = cost(view.source.points[i], view.target.points[j])
    return math.exp((p.f[i] + p.g[j] - c) / p.eps)
