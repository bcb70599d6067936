"""The endpoint function b of the unknown-variance interval.

Inside [-q, q] b is a clamped cubic spline on equally spaced knots with end values
``+-q + t_quant`` and end slopes 1; outside it is the line ``y + t_quant``, so the
interval coincides with the standard t interval once ``|sqrt(n) xbar / s| >= q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cache
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.interpolate import CubicSpline

from priorci.artifacts import RunManifest, SplineArtifact
from priorci.errors import InvalidShapeError, SplineConstructionError

SHAPE_SAMPLES = 10_000
_ENDPOINT_TOL = 1e-9
_SYMMETRY_TOL = 1e-12
_INVERSE_TOL = 1e-13
_NEWTON_STEPS = 2


@dataclass(frozen=True, slots=True, eq=False)
class MonotoneCubicB:
    q: float
    t_quant: float
    knots: NDArray[np.float64]
    values: NDArray[np.float64]
    _spline: CubicSpline = field(init=False, repr=False)
    _slope: Any = field(init=False, repr=False)

    def __post_init__(self) -> None:
        spline = CubicSpline(self.knots, self.values, bc_type=((1, 1.0), (1, 1.0)))
        object.__setattr__(self, "_spline", spline)
        object.__setattr__(self, "_slope", spline.derivative(1))

    @classmethod
    def standard(cls, q: float, t_quant: float, knot_step: float = 1.0) -> MonotoneCubicB:
        """b(y) = y + t_quant: the endpoint function of the standard t interval."""
        knots = equally_spaced_knots(q, knot_step)
        return build(knots + t_quant, q, t_quant)

    @classmethod
    def from_artifact(cls, artifact: SplineArtifact) -> MonotoneCubicB:
        b = build(artifact.values, artifact.q, artifact.t_quant)
        if not np.allclose(b.knots, artifact.knots, rtol=0.0, atol=1e-12):
            raise SplineConstructionError("Artifact knots are not equally spaced on [-q, q].")
        return b

    def to_artifact(
        self,
        n: int,
        alpha: float,
        w: float,
        *,
        objective: float | None = None,
        min_coverage: float | None = None,
        converged: bool = True,
        manifest: RunManifest | None = None,
    ) -> SplineArtifact:
        return SplineArtifact(
            q=self.q,
            t_quant=self.t_quant,
            n=n,
            alpha=alpha,
            w=w,
            knots=[float(knot) for knot in self.knots],
            values=[float(value) for value in self.values],
            objective=objective,
            min_coverage=min_coverage,
            converged=converged,
            manifest=manifest,
        )

    @property
    def free_values(self) -> NDArray[np.float64]:
        """Knot values the optimizer may move: every knot except the two fixed ends."""
        return self.values[1:-1].copy()

    def with_free_values(self, free_values: ArrayLike) -> MonotoneCubicB:
        values = self.values.copy()
        values[1:-1] = np.asarray(free_values, dtype=float)
        return build(values, self.q, self.t_quant)

    def __call__(self, y: ArrayLike) -> NDArray[np.float64] | float:
        y = np.asarray(y, dtype=float)
        inside = np.abs(y) < self.q
        result = np.where(inside, self._spline(np.clip(y, -self.q, self.q)), y + self.t_quant)
        return result if result.ndim else float(result)

    def derivative(self, y: ArrayLike) -> NDArray[np.float64] | float:
        y = np.asarray(y, dtype=float)
        inside = np.abs(y) < self.q
        result = np.where(inside, self._slope(np.clip(y, -self.q, self.q)), 1.0)
        return result if result.ndim else float(result)

    def inverse(self, v: ArrayLike) -> NDArray[np.float64] | float:
        """The y with b(y) = v; closed form on the linear extension, bisection inside."""
        v = np.asarray(v, dtype=float)
        flat = np.atleast_1d(v)
        inside = (flat > -self.q + self.t_quant) & (flat < self.q + self.t_quant)
        result = flat - self.t_quant
        if np.any(inside):
            result[inside] = self._invert_inside(flat[inside])
        result = result.reshape(v.shape)
        return result if result.ndim else float(result)

    def knot_basis(self, y: ArrayLike) -> NDArray[np.float64]:
        """d b(y) / d free_values, shape ``y.shape + (free_count,)``; zero outside [-q, q]."""
        y = np.asarray(y, dtype=float)
        basis = _interior_basis(self.q, self.knots.size)(np.clip(y, -self.q, self.q))
        return np.where((np.abs(y) < self.q)[..., None], basis, 0.0)

    def knot_basis_slope(self, y: ArrayLike) -> NDArray[np.float64]:
        """d b'(y) / d free_values, shape ``y.shape + (free_count,)``."""
        y = np.asarray(y, dtype=float)
        slopes = _interior_basis(self.q, self.knots.size).derivative(1)(np.clip(y, -self.q, self.q))
        return np.where((np.abs(y) < self.q)[..., None], slopes, 0.0)

    def shape_violation(self, samples: int = SHAPE_SAMPLES) -> InvalidShapeError | None:
        """First violation of strict monotonicity or b(y) >= -b(-y) on a dense sample."""
        grid = np.linspace(-self.q, self.q, samples)
        slopes = self._slope(grid)
        if np.any(slopes <= 0.0):
            y = float(grid[np.argmax(slopes <= 0.0)])
            return InvalidShapeError("b is not strictly increasing", y)
        gaps = self._spline(grid) + self._spline(-grid)
        if np.any(gaps < -_SYMMETRY_TOL):
            y = float(grid[np.argmax(gaps < -_SYMMETRY_TOL)])
            return InvalidShapeError("b(y) < -b(-y)", y)
        return None

    def _invert_inside(self, targets: NDArray[np.float64]) -> NDArray[np.float64]:
        lo = np.full_like(targets, -self.q)
        hi = np.full_like(targets, self.q)
        iterations = math.ceil(math.log2(2.0 * self.q / _INVERSE_TOL))
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            below = self._spline(mid) < targets
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        y = 0.5 * (lo + hi)
        for _ in range(_NEWTON_STEPS):
            y = np.clip(y - (self._spline(y) - targets) / self._slope(y), lo, hi)
        return y


def equally_spaced_knots(q: float, knot_step: float) -> NDArray[np.float64]:
    count = 2.0 * q / knot_step
    if abs(count - round(count)) > 1e-9 or round(count) < 1:
        raise SplineConstructionError(f"knot_step={knot_step} does not divide 2q={2.0 * q}.")
    return np.linspace(-q, q, round(count) + 1)


def build(
    knot_values: ArrayLike, q: float, t_quant: float, knot_step: float | None = None
) -> MonotoneCubicB:
    """Clamped cubic spline through ``knot_values`` on equally spaced knots over [-q, q]."""
    values = np.array(knot_values, dtype=float)
    if q <= 0:
        raise SplineConstructionError(f"q must be positive, got {q!r}.")
    if values.ndim != 1 or values.size < 2:
        raise SplineConstructionError("A b spline needs at least two knot values.")
    if knot_step is not None and values.size != equally_spaced_knots(q, knot_step).size:
        raise SplineConstructionError(
            f"Expected {equally_spaced_knots(q, knot_step).size} knot values, got {values.size}."
        )

    for end_value, expected in ((values[0], -q + t_quant), (values[-1], q + t_quant)):
        if abs(end_value - expected) > _ENDPOINT_TOL * max(1.0, abs(expected)):
            raise SplineConstructionError(
                f"End knot value {end_value!r} must equal {expected!r} (+-q + t_quant)."
            )

    _check_spline_exactness()
    b = MonotoneCubicB(
        q=float(q), t_quant=float(t_quant), knots=np.linspace(-q, q, values.size), values=values
    )
    violation = b.shape_violation()
    if violation is not None:
        raise violation
    return b


@cache
def _interior_basis(q: float, knot_count: int) -> CubicSpline:
    knots = np.linspace(-q, q, knot_count)
    unit_values = np.zeros((knot_count, knot_count - 2))
    unit_values[1:-1, :] = np.eye(knot_count - 2)
    end_slopes = np.zeros(knot_count - 2)
    return CubicSpline(knots, unit_values, axis=0, bc_type=((1, end_slopes), (1, end_slopes)))


@cache
def _check_spline_exactness() -> None:
    # A clamped cubic spline must reproduce cubic data exactly.
    knots = np.linspace(-2.0, 2.0, 5)
    cubic = knots**3 - 0.5 * knots + 0.25
    spline = CubicSpline(knots, cubic, bc_type=((1, 3.0 * 4.0 - 0.5), (1, 3.0 * 4.0 - 0.5)))
    grid = np.linspace(-2.0, 2.0, 41)
    if np.max(np.abs(spline(grid) - (grid**3 - 0.5 * grid + 0.25))) > 1e-12:
        raise SplineConstructionError("Cubic spline backend failed to reproduce cubic data.")
