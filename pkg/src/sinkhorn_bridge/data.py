"""Weighted point clouds, toy dataset generators and sample-file I/O."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DimensionError, SampleFileError

WEIGHT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SampleSet:
    """An empirical measure: ``n`` atoms in R^d with simplex weights.

    ``points`` and ``weights`` are stored as read-only float64 arrays.
    Weights default to uniform.
    """

    points: np.ndarray
    weights: Optional[np.ndarray] = None
    label: str = ""

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise DimensionError(f"points must be an n x d matrix with n, d >= 1, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points contain non-finite entries")
        n = pts.shape[0]
        if self.weights is None:
            w = np.full(n, 1.0 / n)
        else:
            w = np.array(self.weights, dtype=np.float64).reshape(-1)
            if w.shape[0] != n:
                raise DimensionError(f"{w.shape[0]} weights for {n} points")
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise ValueError("weights must be finite and nonnegative")
            if abs(w.sum() - 1.0) > WEIGHT_TOL:
                raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == 1.0 / self.n))

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SampleSet):
            return NotImplemented
        return (
            self.points.shape == other.points.shape
            and bool(np.array_equal(self.points, other.points))
            and bool(np.array_equal(self.weights, other.weights))
            and self.label == other.label
        )

    __hash__ = None  # type: ignore[assignment]


# -- toy datasets -------------------------------------------------------------

DATASETS = ("gaussian", "gaussian-mixture", "moons", "circles", "s-curve", "checkerboard")
PLANAR = frozenset({"moons", "circles", "s-curve", "checkerboard"})
DEFAULT_NOISE = {
    "gaussian": 0.0,
    "gaussian-mixture": 0.5,
    "moons": 0.05,
    "circles": 0.05,
    "s-curve": 0.05,
    "checkerboard": 0.0,
}
MIXTURE_MODES = 8
MIXTURE_RADIUS = 8.0


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    n: int
    seed: int = 0
    noise: Optional[float] = None
    dim: int = 2

    def __post_init__(self) -> None:
        if self.name not in DATASETS:
            raise ValueError(f"unknown dataset {self.name!r}; choose from {', '.join(DATASETS)}")
        if self.n < 1:
            raise ValueError(f"dataset size must be positive, got {self.n}")
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if self.name in PLANAR and self.dim != 2:
            raise ValueError(f"{self.name} is a planar dataset; dim must be 2")
        if self.noise is not None and not (self.noise >= 0 and math.isfinite(self.noise)):
            raise ValueError(f"noise must be a nonnegative real, got {self.noise}")

    @property
    def noise_level(self) -> float:
        return DEFAULT_NOISE[self.name] if self.noise is None else float(self.noise)

    @classmethod
    def parse(cls, text: str, dim: int = 2) -> "DatasetSpec":
        """Parse ``name:n:seed[:noise]``."""
        parts = text.split(":")
        if not 3 <= len(parts) <= 4:
            raise ValueError(f"dataset spec must look like name:n:seed[:noise], got {text!r}")
        try:
            n = int(parts[1])
            seed = int(parts[2])
            noise = float(parts[3]) if len(parts) == 4 else None
        except ValueError as exc:
            raise ValueError(f"bad dataset spec {text!r}: {exc}") from None
        return cls(parts[0], n, seed, noise, dim)

    def as_text(self) -> str:
        out = f"{self.name}:{self.n}:{self.seed}"
        return out if self.noise is None else f"{out}:{self.noise!r}"


def _moons(rng: np.random.Generator, n: int) -> np.ndarray:
    n_out = n // 2
    theta = rng.uniform(0.0, math.pi, size=n)
    outer = np.column_stack([np.cos(theta), np.sin(theta)])
    inner = np.column_stack([1.0 - np.cos(theta), 0.5 - np.sin(theta)])
    return np.where((np.arange(n) < n_out)[:, None], outer, inner)


def _circles(rng: np.random.Generator, n: int) -> np.ndarray:
    theta = rng.uniform(0.0, 2.0 * math.pi, size=n)
    radius = np.where(np.arange(n) < n // 2, 1.0, 0.5)
    return radius[:, None] * np.column_stack([np.cos(theta), np.sin(theta)])


def _s_curve(rng: np.random.Generator, n: int) -> np.ndarray:
    t = 3.0 * math.pi * (rng.uniform(size=n) - 0.5)
    return np.column_stack([np.sin(t), np.sign(t) * (np.cos(t) - 1.0)])


def _checkerboard(rng: np.random.Generator, n: int) -> np.ndarray:
    x1 = rng.uniform(-2.0, 2.0, size=n)
    x2 = rng.uniform(size=n) - 2.0 * rng.integers(0, 2, size=n) + np.floor(x1) % 2
    return 2.0 * np.column_stack([x1, x2])


def _mixture(rng: np.random.Generator, n: int, dim: int, std: float) -> np.ndarray:
    comp = rng.integers(0, MIXTURE_MODES, size=n)
    angle = 2.0 * math.pi * comp / MIXTURE_MODES
    centers = np.zeros((n, dim))
    if dim == 1:
        centers[:, 0] = np.linspace(-MIXTURE_RADIUS, MIXTURE_RADIUS, MIXTURE_MODES)[comp]
    else:
        centers[:, 0] = MIXTURE_RADIUS * np.cos(angle)
        centers[:, 1] = MIXTURE_RADIUS * np.sin(angle)
    return centers + std * rng.standard_normal((n, dim))


def generate(spec: DatasetSpec) -> SampleSet:
    """Draw ``spec.n`` points; a pure function of the spec fields."""
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed & (2**64 - 1)))
    noise = spec.noise_level
    if spec.name == "gaussian":
        pts = rng.standard_normal((spec.n, spec.dim))
    elif spec.name == "gaussian-mixture":
        pts = _mixture(rng, spec.n, spec.dim, noise)
    else:
        shape = {"moons": _moons, "circles": _circles, "s-curve": _s_curve, "checkerboard": _checkerboard}
        pts = shape[spec.name](rng, spec.n)
        if noise > 0:
            pts = pts + noise * rng.standard_normal(pts.shape)
    return SampleSet(pts, label=spec.as_text())


# -- file I/O -----------------------------------------------------------------


def _infer_format(path: str | os.PathLike, fmt: Optional[str]) -> str:
    if fmt is None:
        fmt = "json" if str(path).lower().endswith(".json") else "csv"
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown sample format {fmt!r}")
    return fmt


def _parse_float(text: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise SampleFileError(f"line {line}: cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise SampleFileError(f"line {line}: non-finite value {text!r}")
    return value


def _read_csv(path: Path) -> SampleSet:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SampleFileError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    weighted = bool(header) and header[-1] == "weight"
    width = len(header)
    data, weights = [], []
    for idx, row in enumerate(rows[1:]):
        if not row:
            continue
        if len(row) != width:
            raise DimensionError(
                f"{path}: row {idx} (line {idx + 2}) has {len(row)} fields, expected {width}"
            )
        values = [_parse_float(v, idx + 2) for v in row]
        if weighted:
            weights.append(values.pop())
        data.append(values)
    if not data:
        raise SampleFileError(f"{path}: no data rows")
    return SampleSet(np.array(data), np.array(weights) if weighted else None)


def _read_json(path: Path) -> SampleSet:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SampleFileError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    pts = payload.get("points") if isinstance(payload, dict) else None
    if not isinstance(pts, list) or not pts:
        raise SampleFileError(f"{path}: missing or empty 'points'")
    width = len(pts[0]) if isinstance(pts[0], list) else -1
    for idx, row in enumerate(pts):
        if not isinstance(row, list) or len(row) != width:
            raise DimensionError(f"{path}: row {idx} does not have {width} coordinates")
    arr = np.array(pts, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise SampleFileError(f"{path}: non-finite value in points")
    return SampleSet(arr, payload.get("weights"), payload.get("label") or "")


def read_samples(path: str | os.PathLike, format: Optional[str] = None) -> SampleSet:
    fmt = _infer_format(path, format)
    path = Path(path)
    return _read_json(path) if fmt == "json" else _read_csv(path)


def write_samples(samples: SampleSet, path: str | os.PathLike, format: Optional[str] = None) -> None:
    """Write with shortest round-trip float formatting.

    CSV carries a trailing ``weight`` column only for non-uniform sets.
    """
    fmt = _infer_format(path, format)
    if fmt == "json":
        payload = {
            "points": samples.points.tolist(),
            "weights": samples.weights.tolist(),
            "label": samples.label,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh)
        return
    header = [f"x{k}" for k in range(samples.dim)]
    weighted = not samples.is_uniform
    if weighted:
        header.append("weight")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i, row in enumerate(samples.points):
            vals = [repr(float(v)) for v in row]
            if weighted:
                vals.append(repr(float(samples.weights[i])))
            writer.writerow(vals)
