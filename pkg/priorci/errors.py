from __future__ import annotations


class PriorCIError(Exception):
    """Base class for errors raised by priorci."""


class DomainError(PriorCIError, ValueError):
    """An argument lies outside the domain of the requested function."""


class ConvergenceError(PriorCIError, RuntimeError):
    """An iterative solver did not reach its tolerance within its iteration cap."""


class SplineConstructionError(PriorCIError, ValueError):
    """Knot data does not describe a valid b spline (length or endpoint mismatch)."""


class InvalidShapeError(PriorCIError, ValueError):
    """The spline violates monotonicity or b(y) >= -b(-y)."""

    def __init__(self, message: str, y: float) -> None:
        super().__init__(f"{message} (at y={y:.6g})")
        self.y = y


class InsufficientGridError(PriorCIError, ValueError):
    """The theta grid of an acceptance family does not cover the requested data value."""


class ConfigMismatchError(PriorCIError, ValueError):
    """Explicit configuration disagrees with a loaded artifact."""


class ArtifactError(PriorCIError, RuntimeError):
    """A persisted artifact could not be read or did not match its schema."""
