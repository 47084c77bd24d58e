"""Sinkhorn bridge: entropic OT potentials turned into a simulable SDE drift."""

from .data import DATASETS, DatasetSpec, SampleSet, generate, read_samples, write_samples
from .drift import BridgeModel, drift, drift_batch, follmer_model, from_potentials, lipschitz_bound
from .errors import DimensionError, NumericalError, SampleFileError, SinkhornBridgeError
from .gaussian import GaussianBridge, GaussianParams, gaussian_bridge, oracle_drift
from .metrics import bw_uvp, energy_distance, w2_1d
from .sde import SimConfig, TrajectoryBatch, simulate
from .sinkhorn import PlanView, PotentialPair, SolverConfig, dual_objective, fit, marginal_error

__all__ = [
    "DATASETS", "DatasetSpec", "SampleSet", "generate", "read_samples", "write_samples",
    "BridgeModel", "drift", "drift_batch", "follmer_model", "from_potentials", "lipschitz_bound",
    "DimensionError", "NumericalError", "SampleFileError", "SinkhornBridgeError",
    "GaussianBridge", "GaussianParams", "gaussian_bridge", "oracle_drift",
    "bw_uvp", "energy_distance", "w2_1d",
    "SimConfig", "TrajectoryBatch", "simulate",
    "PlanView", "PotentialPair", "SolverConfig", "dual_objective", "fit", "marginal_error",
]
