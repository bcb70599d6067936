from priorci.artifacts import McReport, RunManifest, SplineArtifact
from priorci.config import ProblemConfig
from priorci.errors import (
    ArtifactError,
    ConfigMismatchError,
    ConvergenceError,
    DomainError,
    InsufficientGridError,
    InvalidShapeError,
    PriorCIError,
    SplineConstructionError,
)
from priorci.known_variance import (
    AcceptanceFamily,
    AcceptanceRegion,
    build_family,
    confidence_set,
    expected_length,
    pratt_interval,
    standard_interval,
)
from priorci.spline_b import MonotoneCubicB
from priorci.types import EfficiencyCurve, Interval
from priorci.unknown_variance import (
    coverage,
    interval_from_data,
    optimize_b,
    scaled_expected_length,
)

__all__ = [
    "AcceptanceFamily",
    "AcceptanceRegion",
    "ArtifactError",
    "ConfigMismatchError",
    "ConvergenceError",
    "DomainError",
    "EfficiencyCurve",
    "InsufficientGridError",
    "Interval",
    "InvalidShapeError",
    "McReport",
    "MonotoneCubicB",
    "PriorCIError",
    "ProblemConfig",
    "RunManifest",
    "SplineArtifact",
    "SplineConstructionError",
    "build_family",
    "confidence_set",
    "coverage",
    "expected_length",
    "interval_from_data",
    "optimize_b",
    "pratt_interval",
    "scaled_expected_length",
    "standard_interval",
]
