"""Plug-in Schrödinger bridge drift from a potential on endpoint atoms.

For atoms ``Y_j`` carrying potential ``g_j`` the drift is

    b_t(z) = (bary_t(z) - z) / (1 - t),
    bary_t(z) = sum_j w_j(t, z) Y_j,
    w_j(t, z) ∝ exp((g_j - ||z - Y_j||^2 / (2 (1 - t))) / eps).

``bary_t`` is the entropic barycentric map toward the atoms at
regularisation ``(1 - t) eps``.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass
from typing import Literal

import numpy as np

from ._parallel import map_blocks
from .data import SampleSet
from .errors import DimensionError
from .sinkhorn import PotentialPair

log = logging.getLogger(__name__)

BLOCK_ENTRIES = 1 << 16


@dataclass(frozen=True, eq=False)
class BridgeModel:
    atoms: np.ndarray
    potential: np.ndarray
    eps: float

    def __post_init__(self) -> None:
        atoms = np.array(self.atoms, dtype=np.float64)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        pot = np.array(self.potential, dtype=np.float64).reshape(-1)
        if atoms.ndim != 2 or atoms.shape[0] < 1:
            raise DimensionError(f"atoms must be an n x d matrix, got shape {atoms.shape}")
        if pot.shape[0] != atoms.shape[0]:
            raise DimensionError(f"{pot.shape[0]} potential values for {atoms.shape[0]} atoms")
        if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(pot))):
            raise ValueError("bridge model has non-finite entries")
        if not (self.eps > 0 and math.isfinite(self.eps)):
            raise ValueError(f"eps must be positive, got {self.eps}")
        atoms.setflags(write=False)
        pot.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "potential", pot)
        object.__setattr__(self, "eps", float(self.eps))
        object.__setattr__(self, "atoms_t", np.ascontiguousarray(atoms.T))
        object.__setattr__(self, "half_sq_norms", 0.5 * (atoms**2).sum(axis=1))

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def n(self) -> int:
        return self.atoms.shape[0]

    def radius(self) -> float:
        return float(np.sqrt((self.atoms**2).sum(axis=1)).max())

    def to_dict(self) -> dict:
        return {"eps": self.eps, "atoms": self.atoms.tolist(), "potential": self.potential.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "BridgeModel":
        return cls(np.array(d["atoms"], dtype=np.float64), np.array(d["potential"]), float(d["eps"]))

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "BridgeModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class SoftmaxWeights:
    logits: np.ndarray
    weights: np.ndarray


def _check_time(t: float) -> None:
    if not t < 1.0:
        raise ValueError(f"drift is singular at t >= 1 (got t={t})")
    if not t >= 0.0:
        raise ValueError(f"time must lie in [0, 1), got t={t}")


def _check_points(model: BridgeModel, Z: np.ndarray) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] != model.dim:
        raise DimensionError(f"expected points of dimension {model.dim}, got shape {Z.shape}")
    if not np.all(np.isfinite(Z)):
        raise ValueError("evaluation points must be finite")
    return Z


def _logits(model: BridgeModel, t: float, Z: np.ndarray) -> np.ndarray:
    """Logits up to a per-row constant.

    ``-|z - y|^2 / (2s)`` is expanded and the ``|z|^2`` term, constant
    across atoms, is dropped; the softmax does not see it.
    """
    s = 1.0 - t
    Yt = model.atoms_t
    base = (model.potential - model.half_sq_norms / s) / model.eps
    L = np.multiply(Z[:, 0, None], Yt[0][None, :])
    if model.dim > 1:
        tmp = np.empty_like(L)
        for k in range(1, model.dim):
            np.multiply(Z[:, k, None], Yt[k][None, :], out=tmp)
            L += tmp
    L *= 1.0 / (s * model.eps)
    L += base
    return L


def _softmax(logits: np.ndarray) -> np.ndarray:
    w = np.exp(logits - logits.max(axis=1, keepdims=True))
    w /= w.sum(axis=1, keepdims=True)
    return w


def _barycenters(model: BridgeModel, t: float, Z: np.ndarray) -> np.ndarray:
    E = _logits(model, t, Z)
    E -= E.max(axis=1, keepdims=True)
    np.exp(E, out=E)
    total = E.sum(axis=1)
    out = np.empty_like(Z)
    # einsum's own loops, not BLAS: each row's result is independent of the batch.
    for k in range(model.dim):
        out[:, k] = np.einsum("ij,j->i", E, model.atoms_t[k]) / total
    return out


def weights(model: BridgeModel, t: float, z) -> SoftmaxWeights:
    _check_time(t)
    Z = _check_points(model, np.asarray(z, dtype=np.float64).reshape(1, -1))
    lg = _logits(model, t, Z)
    w = _softmax(lg)[0]
    lg = lg[0] - float(Z[0] @ Z[0]) / (2.0 * (1.0 - t) * model.eps)
    return SoftmaxWeights(lg, w)


def barycentric_map_batch(model: BridgeModel, t: float, Z) -> np.ndarray:
    _check_time(t)
    Z = _check_points(model, Z)
    block = max(1, BLOCK_ENTRIES // model.n)
    parts = map_blocks(lambda s: _barycenters(model, t, Z[s]), Z.shape[0], block)
    return np.concatenate(parts) if parts else np.empty_like(Z)


def barycentric_map(model: BridgeModel, t: float, z) -> np.ndarray:
    return barycentric_map_batch(model, t, np.asarray(z, dtype=np.float64).reshape(1, -1))[0]


def drift_batch(model: BridgeModel, t: float, Z) -> np.ndarray:
    """Row-wise drift; each row is computed independently of the others."""
    Z = np.asarray(Z, dtype=np.float64)
    return (barycentric_map_batch(model, t, Z) - Z) / (1.0 - t)


def drift(model: BridgeModel, t: float, z) -> np.ndarray:
    return drift_batch(model, t, np.asarray(z, dtype=np.float64).reshape(1, -1))[0]


def follmer_model(target: SampleSet, eps: float) -> BridgeModel:
    """Bridge from a point mass at the origin; the potential is ``|Y_j|^2 / 2``."""
    pot = 0.5 * (target.points**2).sum(axis=1)
    return BridgeModel(target.points, pot, eps)


def from_potentials(
    pair: PotentialPair,
    source: SampleSet,
    target: SampleSet,
    direction: Literal["forward", "backward"] = "forward",
    eps: float | None = None,
) -> BridgeModel:
    """Forward: drift toward the target atoms with ``g``. Backward: toward the source with ``f``."""
    if pair.f.shape[0] != source.n or pair.g.shape[0] != target.n:
        raise DimensionError(
            f"potentials of lengths ({pair.f.shape[0]}, {pair.g.shape[0]}) "
            f"do not match sets of sizes ({source.n}, {target.n})"
        )
    if source.dim != target.dim:
        raise DimensionError("source and target dimensions differ")
    if not pair.converged:
        log.warning("building a bridge from unconverged potentials (marginal error %.3e)",
                    pair.marginal_error)
    eps = pair.eps if eps is None else eps
    if direction == "forward":
        return BridgeModel(target.points, pair.g, eps)
    if direction == "backward":
        return BridgeModel(source.points, pair.f, eps)
    raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")


def lipschitz_bound(model: BridgeModel, t: float, R: float | None = None) -> float:
    """Upper bound on the operator norm of the drift Jacobian at time ``t``.

    ``(1 - t)^-1 * max(1, R^2 / ((1 - t) eps))`` for atoms inside the ball of radius ``R``.
    """
    _check_time(t)
    if R is None:
        R = model.radius()
    s = 1.0 - t
    return max(1.0, R * R / (s * model.eps)) / s
