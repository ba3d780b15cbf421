"""Numerical verification of the Navier-Stokes (Chapman-Enskog) approximation
of the hard-sphere Boltzmann equation in a slab with diffuse walls."""

from .errors import (
    AlignmentError,
    ArtifactError,
    CapacityError,
    ConfigError,
    DegenerateStateError,
    InvalidParameterError,
    NumericalError,
    ShapeError,
    StepSizeError,
    WeightDominationError,
)
from .kinetic_core import (
    REFERENCE_STATE,
    MaxwellParams,
    SpatialGrid,
    VelocityGrid,
    maxwellian,
    maxwellian_field,
    moments,
    project_macro,
    weighted_norm,
)
from .state import FluidState

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "ArtifactError",
    "CapacityError",
    "ConfigError",
    "DegenerateStateError",
    "FluidState",
    "InvalidParameterError",
    "MaxwellParams",
    "NumericalError",
    "REFERENCE_STATE",
    "ShapeError",
    "SpatialGrid",
    "StepSizeError",
    "VelocityGrid",
    "WeightDominationError",
    "maxwellian",
    "maxwellian_field",
    "moments",
    "project_macro",
    "weighted_norm",
]
