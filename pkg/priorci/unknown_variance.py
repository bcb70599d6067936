"""Unknown-variance intervals K = [-(S/sqrt(n)) b(-T), (S/sqrt(n)) b(T)], T = sqrt(n) xbar / S.

Coverage and scaled expected length are functions of theta = sqrt(n) mu / sigma alone, which
lets b be optimized without knowing sigma. All theta-indexed quantities are even in theta,
so profiles are evaluated on theta >= 0 only.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterator
from dataclasses import dataclass
from functools import cache
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import minimize

from priorci.config import ProblemConfig
from priorci.errors import DomainError, InvalidShapeError
from priorci.known_variance import (
    AcceptanceFamily,
    build_family,
    confidence_set,
    efficiency_curve,
    known_efficiency_curve,
)
from priorci.special_fns import (
    composite_gauss_legendre,
    mean_R,
    normal_cdf,
    normal_pdf,
    r_quadrature,
    t_quantile,
)
from priorci.spline_b import MonotoneCubicB
from priorci.types import EfficiencyCurve, Interval

_log = logging.getLogger(__name__)

# Linear shape constraints imposed during the search; the 10,000-point check runs afterwards.
_SHAPE_SAMPLES_PER_KNOT = 32
_SLOPE_MARGIN = 1e-4
_SLSQP_FTOL = 1e-12

WarmStart = Literal["standard", "known"]


@dataclass(frozen=True, slots=True, eq=False)
class CoverageProfile:
    thetas: NDArray[np.float64]
    coverage: NDArray[np.float64]

    @property
    def minimum(self) -> float:
        return float(self.coverage.min())


@dataclass(frozen=True, slots=True, eq=False)
class OptimizationResult:
    b: MonotoneCubicB
    objective: float
    min_coverage: float
    iterations: int
    converged: bool


@dataclass(frozen=True, slots=True, eq=False)
class _Quadrature:
    r_nodes: NDArray[np.float64]
    r_weights: NDArray[np.float64]  # already multiplied by f_R
    y_nodes: NDArray[np.float64]
    y_weights: NDArray[np.float64]


@cache
def _quadrature(n: int, panels: int, order: int, q: float, knot_count: int) -> _Quadrature:
    r_nodes, r_weights = r_quadrature(n, panels, order)
    y_nodes, y_weights = composite_gauss_legendre(np.linspace(-q, q, knot_count), order)
    return _Quadrature(r_nodes=r_nodes, r_weights=r_weights, y_nodes=y_nodes, y_weights=y_weights)


def _rule(b: MonotoneCubicB, n: int, panels: int, order: int) -> _Quadrature:
    return _quadrature(n, panels, order, b.q, b.knots.size)


def coverage(theta: float, b: MonotoneCubicB, n: int, panels: int = 40, order: int = 10) -> float:
    return float(_coverage(np.array([theta]), b, _rule(b, n, panels, order))[0])


def coverage_profile(
    b: MonotoneCubicB, config: ProblemConfig, thetas: ArrayLike | None = None
) -> CoverageProfile:
    thetas = config.verification_thetas() if thetas is None else np.asarray(thetas, dtype=float)
    rule = _rule(b, config.n, config.quadrature_panels, config.quadrature_order)
    return CoverageProfile(thetas=thetas, coverage=_coverage(thetas, b, rule))


def scaled_expected_length(
    theta: float, b: MonotoneCubicB, n: int, panels: int = 40, order: int = 10
) -> float:
    """(sqrt(n) / sigma) E(length): 2 t E(R) plus the departure of b from the standard line."""
    return float(_scaled_lengths(np.array([theta]), b, n, _rule(b, n, panels, order))[0])


def efficiency_unknown(
    theta: float, b: MonotoneCubicB, n: int, alpha: float, panels: int = 40, order: int = 10
) -> float:
    standard_length = 2.0 * t_quantile(alpha / 2, n - 1) * mean_R(n)
    return (scaled_expected_length(theta, b, n, panels, order) / standard_length) ** 2


def efficiency_profile(
    b: MonotoneCubicB, config: ProblemConfig, thetas: ArrayLike | None = None
) -> EfficiencyCurve:
    thetas = config.verification_thetas() if thetas is None else np.asarray(thetas, dtype=float)
    rule = _rule(b, config.n, config.quadrature_panels, config.quadrature_order)
    standard_length = 2.0 * config.t_half * mean_R(config.n)
    lengths = _scaled_lengths(thetas, b, config.n, rule)
    return EfficiencyCurve.from_values(thetas, (lengths / standard_length) ** 2)


def scaled_length_profile(
    b: MonotoneCubicB, config: ProblemConfig, thetas: ArrayLike
) -> NDArray[np.float64]:
    rule = _rule(b, config.n, config.quadrature_panels, config.quadrature_order)
    return _scaled_lengths(np.asarray(thetas, dtype=float), b, config.n, rule)


def objective(b: MonotoneCubicB, config: ProblemConfig) -> float:
    """Weighted excess scaled length, renormalized so the standard interval scores 0."""
    weights = _objective_weights(config, b.q, b.knots.size)
    rule = _rule(b, config.n, config.quadrature_panels, config.quadrature_order)
    return float(np.dot(weights, _excess(b, rule.y_nodes)))


def optimize_b(
    config: ProblemConfig,
    initial: MonotoneCubicB | None = None,
    warm_start: WarmStart = "standard",
) -> OptimizationResult:
    """Minimize the weighted criterion over the interior knot values of b.

    Constraints: strictly increasing b, b(y) >= -b(-y), and coverage >= 1 - alpha on the
    constraint theta grid. The result is re-verified on a 4x denser grid; when verification
    fails the last verified iterate (ultimately the standard b) is returned unconverged.
    """
    standard = MonotoneCubicB.standard(config.q, config.t_half, config.knot_step)
    start = initial if initial is not None else _warm_start(config, standard, warm_start)
    if start is not standard and not _is_feasible(start, config, config.constraint_thetas()):
        _log.warning("Starting spline is infeasible; starting from the standard interval instead.")
        start = standard

    rule = _rule(standard, config.n, config.quadrature_panels, config.quadrature_order)
    constraint_thetas = config.constraint_thetas()
    target = 1.0 - config.alpha

    weights = _objective_weights(config, config.q, standard.knots.size)
    gradient = weights @ (standard.knot_basis(rule.y_nodes) + standard.knot_basis(-rule.y_nodes))
    base_free = standard.free_values
    base_objective = float(np.dot(weights, _excess(standard, rule.y_nodes)))

    def criterion(free: NDArray[np.float64]) -> float:
        return base_objective + float(np.dot(gradient, free - base_free))

    coverage_constraint = _CoverageConstraint(standard, constraint_thetas, rule, target)
    slope_rows, slope_offset, symmetry_rows, symmetry_offset = _shape_constraints(standard)

    history: list[NDArray[np.float64]] = []
    result = minimize(
        criterion,
        start.free_values,
        jac=lambda free: gradient,
        method="SLSQP",
        constraints=[
            {"type": "ineq", "fun": coverage_constraint.values, "jac": coverage_constraint.jacobian},
            {
                "type": "ineq",
                "fun": lambda free: slope_rows @ (free - base_free) + slope_offset,
                "jac": lambda free: slope_rows,
            },
            {
                "type": "ineq",
                "fun": lambda free: symmetry_rows @ (free - base_free) + symmetry_offset,
                "jac": lambda free: symmetry_rows,
            },
        ],
        options={"maxiter": config.max_iterations, "ftol": _SLSQP_FTOL},
        callback=lambda free: history.append(np.array(free, dtype=float)),
    )
    _log.info("SLSQP finished after %d iterations: %s", result.nit, result.message)

    dense_thetas = config.verification_thetas()
    for candidate_free, is_final in _candidates(result.x, history):
        candidate = _verified(standard, candidate_free, config, dense_thetas)
        if candidate is None:
            continue
        b, profile = candidate
        converged = bool(result.success) and is_final
        if not converged:
            _log.warning("Optimizer did not converge; returning the best verified iterate.")
        return OptimizationResult(
            b=b,
            objective=objective(b, config),
            min_coverage=profile.minimum,
            iterations=int(result.nit),
            converged=converged,
        )

    _log.warning("No optimizer iterate passed verification; returning the standard interval.")
    return OptimizationResult(
        b=standard,
        objective=objective(standard, config),
        min_coverage=coverage_profile(standard, config, dense_thetas).minimum,
        iterations=int(result.nit),
        converged=False,
    )


def standard_t_interval(xbar: float, s: float, n: int, alpha: float) -> Interval:
    _check_sample(s, n)
    return _t_interval(xbar, s / math.sqrt(n), t_quantile(alpha / 2, n - 1))


def bofinger_interval(xbar: float, s: float, n: int, alpha: float) -> Interval:
    """The t analogue of Pratt's interval; a reference formula, not an optimized rule."""
    _check_sample(s, n)
    half_width = t_quantile(alpha, n - 1) * s / math.sqrt(n)
    return Interval(min(0.0, xbar - half_width), max(0.0, xbar + half_width))


def reverts_to_standard(xbar: float, s: float, n: int, b: MonotoneCubicB) -> bool:
    _check_sample(s, n)
    return abs(math.sqrt(n) * xbar / s) >= b.q


def interval_from_data(xbar: float, s: float, n: int, b: MonotoneCubicB) -> Interval:
    _check_sample(s, n)
    scale = s / math.sqrt(n)
    if reverts_to_standard(xbar, s, n, b):
        return _t_interval(xbar, scale, b.t_quant)
    statistic = xbar / scale
    return Interval(-scale * b(-statistic), scale * b(statistic))


def compare_known_unknown(
    config: ProblemConfig,
    b: MonotoneCubicB,
    thetas: ArrayLike | None = None,
    family: AcceptanceFamily | None = None,
) -> tuple[EfficiencyCurve, EfficiencyCurve]:
    """Known-variance mixed-interval efficiency and the unknown-variance one on a shared grid."""
    thetas = config.verification_thetas() if thetas is None else np.asarray(thetas, dtype=float)
    known_full = efficiency_curve(family) if family is not None else known_efficiency_curve(config)
    known = EfficiencyCurve.from_values(thetas, [known_full.at(float(theta)) for theta in thetas])
    return known, efficiency_profile(b, config, thetas)


class _CoverageConstraint:
    """Coverage minus 1 - alpha on the constraint grid with its analytic Jacobian.

    With y = b^{-1}(v), d y / d v_k = -B_k(y) / b'(y), B_k the interior knot basis.
    """

    def __init__(
        self,
        template: MonotoneCubicB,
        thetas: NDArray[np.float64],
        rule: _Quadrature,
        target: float,
    ) -> None:
        self._template = template
        self._thetas = thetas
        self._rule = rule
        self._target = target
        self._cached_free: NDArray[np.float64] | None = None
        self._cached: tuple[NDArray[np.float64], NDArray[np.float64]] | None = None

    def values(self, free: NDArray[np.float64]) -> NDArray[np.float64]:
        return self._evaluate(free)[0]

    def jacobian(self, free: NDArray[np.float64]) -> NDArray[np.float64]:
        return self._evaluate(free)[1]

    def _evaluate(self, free: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        if self._cached is not None and np.array_equal(free, self._cached_free):
            return self._cached

        b = _unchecked(self._template, free)
        r = self._rule.r_nodes[None, :]
        theta = self._thetas[:, None]
        y_neg = b.inverse(-theta / r)
        y_pos = b.inverse(theta / r)
        arg_neg = -r * y_neg - theta
        arg_pos = r * y_pos - theta
        weights = self._rule.r_weights

        values = (normal_cdf(arg_neg) - normal_cdf(arg_pos)) @ weights - self._target
        dy_neg = -b.knot_basis(y_neg) / b.derivative(y_neg)[..., None]
        dy_pos = -b.knot_basis(y_pos) / b.derivative(y_pos)[..., None]
        integrand = -(normal_pdf(arg_neg) * r)[..., None] * dy_neg - (
            normal_pdf(arg_pos) * r
        )[..., None] * dy_pos
        jacobian = np.einsum("trk,r->tk", integrand, weights)

        self._cached_free = np.array(free, dtype=float)
        self._cached = (values, jacobian)
        return self._cached


def _coverage(thetas: NDArray[np.float64], b: MonotoneCubicB, rule: _Quadrature) -> NDArray[np.float64]:
    r = rule.r_nodes[None, :]
    theta = thetas[:, None]
    lower_tail = normal_cdf(-r * b.inverse(-theta / r) - theta)
    upper_tail = normal_cdf(r * b.inverse(theta / r) - theta)
    return (lower_tail - upper_tail) @ rule.r_weights


def _excess(b: MonotoneCubicB, y: NDArray[np.float64]) -> NDArray[np.float64]:
    """b(y) + b(-y) - 2 t, zero for |y| >= q."""
    return b(y) + b(-y) - 2.0 * b.t_quant


def _scaled_lengths(
    thetas: NDArray[np.float64], b: MonotoneCubicB, n: int, rule: _Quadrature
) -> NDArray[np.float64]:
    r = rule.r_nodes
    excess = _excess(b, rule.y_nodes) * rule.y_weights
    radial = rule.r_weights * r * r
    lengths = np.empty_like(thetas)
    for index, theta in enumerate(thetas):
        density = normal_pdf(r[:, None] * rule.y_nodes[None, :] - theta)
        lengths[index] = radial @ density @ excess
    return 2.0 * b.t_quant * mean_R(n) + lengths


def _objective_weights(config: ProblemConfig, q: float, knot_count: int) -> NDArray[np.float64]:
    rule = _quadrature(config.n, config.quadrature_panels, config.quadrature_order, q, knot_count)
    r = rule.r_nodes
    radial = rule.r_weights * r * r
    weight = config.w + normal_pdf(r[:, None] * rule.y_nodes[None, :])
    return (radial @ weight) * rule.y_weights


def _shape_constraints(
    standard: MonotoneCubicB,
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Linear rows for b'(y) >= margin on [-q, q] and b(y) + b(-y) >= 0 on [0, q]."""
    intervals = standard.knots.size - 1
    slope_grid = np.linspace(-standard.q, standard.q, intervals * _SHAPE_SAMPLES_PER_KNOT + 1)
    half_grid = slope_grid[slope_grid >= 0.0]

    slope_rows = standard.knot_basis_slope(slope_grid)
    slope_offset = np.asarray(standard.derivative(slope_grid)) - _SLOPE_MARGIN

    symmetry_rows = standard.knot_basis(half_grid) + standard.knot_basis(-half_grid)
    symmetry_offset = np.asarray(standard(half_grid) + standard(-half_grid))
    return slope_rows, slope_offset, symmetry_rows, symmetry_offset


def _unchecked(template: MonotoneCubicB, free: ArrayLike) -> MonotoneCubicB:
    values = template.values.copy()
    values[1:-1] = np.asarray(free, dtype=float)
    return MonotoneCubicB(q=template.q, t_quant=template.t_quant, knots=template.knots, values=values)


def _candidates(
    final: NDArray[np.float64], history: list[NDArray[np.float64]]
) -> Iterator[tuple[NDArray[np.float64], bool]]:
    yield final, True
    for free in reversed(history):
        yield free, False


def _verified(
    standard: MonotoneCubicB,
    free: NDArray[np.float64],
    config: ProblemConfig,
    dense_thetas: NDArray[np.float64],
) -> tuple[MonotoneCubicB, CoverageProfile] | None:
    # Shape checks are cheap and run before any integral.
    try:
        b = standard.with_free_values(free)
    except InvalidShapeError as exc:
        _log.debug("Rejected iterate: %s", exc)
        return None
    profile = coverage_profile(b, config, dense_thetas)
    if profile.minimum < 1.0 - config.alpha - config.coverage_slack:
        _log.debug("Rejected iterate: minimum coverage %.8f", profile.minimum)
        return None
    return b, profile


def _is_feasible(b: MonotoneCubicB, config: ProblemConfig, thetas: NDArray[np.float64]) -> bool:
    if b.shape_violation() is not None:
        return False
    return coverage_profile(b, config, thetas).minimum >= 1.0 - config.alpha - config.coverage_slack


def _warm_start(
    config: ProblemConfig, standard: MonotoneCubicB, warm_start: WarmStart
) -> MonotoneCubicB:
    if warm_start == "standard":
        return standard
    if config.w <= 0:
        raise DomainError("A known-variance warm start needs w > 0.")

    # Upper endpoint of the known-variance mixed interval, moved from z to t at the ends.
    family = build_family(config)
    shift = config.t_half - config.z_half
    interior = [
        confidence_set(float(y), family, refine=False).upper + shift for y in standard.knots[1:-1]
    ]
    try:
        return standard.with_free_values(interior)
    except InvalidShapeError:
        _log.warning("Known-variance warm start has an invalid shape; using the standard b.")
        return standard


def _t_interval(xbar: float, scale: float, t_quant: float) -> Interval:
    return Interval(xbar - t_quant * scale, xbar + t_quant * scale)


def _check_sample(s: float, n: int) -> None:
    if not s > 0:
        raise DomainError(f"s must be positive, got {s!r}.")
    if int(n) != n or n < 2:
        raise DomainError(f"n must be an integer >= 2, got {n!r}.")
