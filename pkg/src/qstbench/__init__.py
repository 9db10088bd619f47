"""Simulated quantum state tomography benchmarks.

Neural-network and Gaussian maximum-likelihood reconstruction of 1-4 qubit
density matrices from overcomplete projective measurements.
"""

from qstbench.errors import (
    CorruptCheckpointError,
    DecompositionError,
    DegenerateParameterError,
    DimensionError,
    LineSearchStalled,
    OptimizationError,
    ParseError,
    UnsupportedFormatError,
)
from qstbench.measurement import (
    MeasurementRecord,
    ProjectorSet,
    build_projectors,
    depolarize,
    ideal_probabilities,
    sample_record,
    squared_difference,
)
from qstbench.mle import MleConfig, MleResult, reconstruct_mle
from qstbench.qstate import (
    density_from_tau,
    fidelity,
    haar_random_pure,
    purity,
    tau_from_density,
    to_density,
)

__version__ = "0.1.0"

__all__ = [
    "CorruptCheckpointError",
    "DecompositionError",
    "DegenerateParameterError",
    "DimensionError",
    "LineSearchStalled",
    "MeasurementRecord",
    "MleConfig",
    "MleResult",
    "OptimizationError",
    "ParseError",
    "ProjectorSet",
    "UnsupportedFormatError",
    "build_projectors",
    "density_from_tau",
    "depolarize",
    "fidelity",
    "haar_random_pure",
    "ideal_probabilities",
    "purity",
    "reconstruct_mle",
    "sample_record",
    "squared_difference",
    "tau_from_density",
    "to_density",
]
