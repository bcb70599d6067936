from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from priorci.errors import DomainError


@dataclass(frozen=True, slots=True)
class Interval:
    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not self.lower <= self.upper:
            raise DomainError(f"Interval lower={self.lower!r} exceeds upper={self.upper!r}.")

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def scaled(self, factor: float) -> Interval:
        """Multiply both endpoints by a positive ``factor``."""
        if factor <= 0:
            raise DomainError(f"Scale factor must be positive, got {factor!r}.")
        return Interval(self.lower * factor, self.upper * factor)


@dataclass(frozen=True, slots=True, eq=False)
class EfficiencyCurve:
    """Squared expected-length ratio of a candidate interval to the standard one, per theta."""

    thetas: NDArray[np.float64]
    values: NDArray[np.float64]
    e_at_zero: float
    e_max: float

    @classmethod
    def from_values(cls, thetas: ArrayLike, values: ArrayLike) -> EfficiencyCurve:
        thetas = np.asarray(thetas, dtype=float)
        values = np.asarray(values, dtype=float)
        if thetas.shape != values.shape or thetas.ndim != 1 or thetas.size == 0:
            raise DomainError("Efficiency curve needs matching, non-empty 1-d theta and value grids.")
        if np.any(values <= 0.0):
            raise DomainError("Efficiencies must be strictly positive.")
        zero_index = int(np.argmin(np.abs(thetas)))
        if abs(thetas[zero_index]) > 1e-12:
            raise DomainError("Efficiency curve grid must contain theta = 0.")
        return cls(
            thetas=thetas,
            values=values,
            e_at_zero=float(values[zero_index]),
            e_max=float(values.max()),
        )

    def at(self, theta: float) -> float:
        return float(np.interp(theta, self.thetas, self.values))
