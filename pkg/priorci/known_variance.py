"""Known-variance intervals for theta given X ~ N(theta, 1).

The mixed interval minimizes the average expected length under the weight
``nu(x) = w x + H(x)``. Its acceptance region at theta is the sublevel set
``{x : (w + phi(x)) / phi(x - theta) < c}`` with ``c`` chosen so that the region has
probability ``1 - alpha`` under theta. Inverting the family of regions over a theta grid
gives the confidence set.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from typing import Literal

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import brentq

from priorci.config import ProblemConfig
from priorci.errors import ConvergenceError, DomainError, InsufficientGridError
from priorci.special_fns import (
    LOG_SQRT_2PI,
    SQRT_2PI,
    composite_gauss_legendre,
    normal_cdf,
    normal_pdf,
    normal_quantile,
)
from priorci.types import EfficiencyCurve, Interval

_log = logging.getLogger(__name__)

# Beyond this many standard deviations from the widest region the acceptance
# probability of a false value is below 1e-12.
_TAIL_SIGMAS = 7.5
# Gauss-Legendre points per theta-grid cell in the expected-length integral.
_CELL_ORDER = 4
_MAX_EXPANSIONS = 60
_MAX_SOLVER_ITERATIONS = 200

FamilyKind = Literal["mixed", "standard"]


@dataclass(frozen=True, slots=True)
class AcceptanceRegion:
    theta: float
    lower: float
    upper: float
    c: float | None

    def check(self, config: ProblemConfig) -> None:
        """Raise if the region breaks finiteness, coverage or the critical-constant bracket."""
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ConvergenceError(f"Acceptance region at theta={self.theta} is not finite.")
        if not self.lower < self.upper:
            raise ConvergenceError(f"Acceptance region at theta={self.theta} is empty.")
        coverage = region_probability(self.lower, self.upper, self.theta)
        if abs(coverage - (1.0 - config.alpha)) > config.tol_coverage:
            raise ConvergenceError(
                f"Acceptance region at theta={self.theta} has probability {coverage:.12g}, "
                f"expected {1.0 - config.alpha}."
            )
        if self.c is not None:
            c_lo, c_hi = critical_constant_bracket(config.w, config.alpha)
            if not c_lo <= self.c <= c_hi:
                raise ConvergenceError(
                    f"Critical constant {self.c:.12g} at theta={self.theta} lies outside "
                    f"[{c_lo:.12g}, {c_hi:.12g}]."
                )


@dataclass(frozen=True, slots=True, eq=False)
class AcceptanceFamily:
    """Acceptance regions over a symmetric theta grid, stored column-wise."""

    thetas: NDArray[np.float64]
    lowers: NDArray[np.float64]
    uppers: NDArray[np.float64]
    critical: NDArray[np.float64]
    config: ProblemConfig
    kind: FamilyKind = "mixed"

    @property
    def regions(self) -> list[AcceptanceRegion]:
        return [self.region(index) for index in range(self.thetas.size)]

    def region(self, index: int) -> AcceptanceRegion:
        c = float(self.critical[index])
        return AcceptanceRegion(
            theta=float(self.thetas[index]),
            lower=float(self.lowers[index]),
            upper=float(self.uppers[index]),
            c=c if math.isfinite(c) else None,
        )

    def region_at(self, theta: float) -> AcceptanceRegion:
        """Exact region at an arbitrary theta, off-grid included."""
        if self.kind == "standard":
            return _standard_region(theta, self.config.z_half)
        return acceptance_region(theta, self.config)

    def endpoints_at(
        self, theta_prime: ArrayLike
    ) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Interpolated region endpoints, reverting to the standard region off the grid."""
        theta_prime = np.asarray(theta_prime, dtype=float)
        z_half = self.config.z_half
        inside = (theta_prime >= self.thetas[0]) & (theta_prime <= self.thetas[-1])
        lowers = np.where(
            inside, np.interp(theta_prime, self.thetas, self.lowers), theta_prime - z_half
        )
        uppers = np.where(
            inside, np.interp(theta_prime, self.thetas, self.uppers), theta_prime + z_half
        )
        return lowers, uppers

    @property
    def max_half_width(self) -> float:
        return float(max(np.max(self.uppers - self.thetas), np.max(self.thetas - self.lowers)))

    def to_frame(self) -> pd.DataFrame:
        """One row per grid point; ``c`` is empty for families without critical constants."""
        return pd.DataFrame(
            {"theta": self.thetas, "lower": self.lowers, "upper": self.uppers, "c": self.critical}
        )


def standard_interval(x: float, alpha: float) -> Interval:
    z_half = normal_quantile(alpha / 2)
    return Interval(x - z_half, x + z_half)


def pratt_interval(x: float, alpha: float) -> Interval:
    z = normal_quantile(alpha)
    return Interval(min(0.0, x - z), max(0.0, x + z))


def mu_interval(interval: Interval, sigma: float, n: int) -> Interval:
    """Map an interval for theta = sqrt(n) mu / sigma to the mu scale."""
    if sigma <= 0:
        raise DomainError(f"sigma must be positive, got {sigma!r}.")
    if n < 1:
        raise DomainError(f"n must be positive, got {n!r}.")
    return interval.scaled(sigma / math.sqrt(n))


def g_value(x: float, c: float, theta: float, w: float) -> float:
    if w < 0:
        raise DomainError(f"w must be nonnegative, got {w!r}.")
    try:
        inverse_density = SQRT_2PI * math.exp(0.5 * (x - theta) ** 2)
    except OverflowError:
        return math.inf
    return (w + float(normal_pdf(x))) * inverse_density - c


def critical_constant_bracket(w: float, alpha: float) -> tuple[float, float]:
    scale = math.exp(0.5 * normal_quantile(alpha / 2) ** 2)
    return w * SQRT_2PI * scale, (w * SQRT_2PI + 1.0) * scale


def region_probability(lower: float, upper: float, theta: float) -> float:
    return float(normal_cdf(upper - theta) - normal_cdf(lower - theta))


def sublevel_interval(c: float, theta: float, w: float, xtol: float = 1e-13) -> Interval | None:
    """The set {x : g(x, c, theta) < 0}; ``None`` when it is empty."""
    if w <= 0 or c <= 0:
        raise DomainError(f"sublevel_interval requires w > 0 and c > 0, got w={w!r}, c={c!r}.")
    return _sublevel(c, theta, w, _g_minimizer(theta, w, xtol), xtol)


def acceptance_region(theta: float, config: ProblemConfig) -> AcceptanceRegion:
    """Mixed-interval acceptance region at ``theta``, solving for its critical constant."""
    w = config.w
    if w <= 0:
        raise DomainError("The mixed acceptance region needs w > 0; use pratt_interval for w = 0.")

    xtol = 1e-3 * config.tol_root
    target = 1.0 - config.alpha
    minimizer = _g_minimizer(theta, w, xtol)

    def coverage_gap(c: float) -> float:
        region = _sublevel(c, theta, w, minimizer, xtol)
        if region is None:
            return -target
        return region_probability(region.lower, region.upper, theta) - target

    c_lo, c_hi = critical_constant_bracket(w, config.alpha)
    gap_lo, gap_hi = coverage_gap(c_lo), coverage_gap(c_hi)
    # Far from 0 the critical constant sits on the lower bracket end up to rounding.
    if 0 < gap_lo <= config.tol_coverage:
        gap_lo = 0.0
    if -config.tol_coverage <= gap_hi < 0:
        gap_hi = 0.0
    if gap_lo > 0 or gap_hi < 0:
        raise ConvergenceError(
            f"Coverage at theta={theta} does not cross 1 - alpha on the critical-constant "
            f"bracket [{c_lo:.6g}, {c_hi:.6g}]."
        )

    if gap_lo == 0:
        c = c_lo
    elif gap_hi == 0:
        c = c_hi
    else:
        c = brentq(
            coverage_gap,
            c_lo,
            c_hi,
            xtol=1e-14 * c_hi,
            maxiter=_MAX_SOLVER_ITERATIONS,
        )

    region = _sublevel(c, theta, w, minimizer, xtol)
    if region is None:
        raise ConvergenceError(f"Acceptance region at theta={theta} collapsed to the empty set.")

    accepted = AcceptanceRegion(theta=float(theta), lower=region.lower, upper=region.upper, c=c)
    accepted.check(config)
    return accepted


def build_family(config: ProblemConfig) -> AcceptanceFamily:
    """Mixed-interval acceptance regions at every point of the configured theta grid."""
    thetas = config.theta_grid()
    lowers = np.empty_like(thetas)
    uppers = np.empty_like(thetas)
    critical = np.empty_like(thetas)
    _log.debug("Building mixed acceptance family: w=%s, %d grid points", config.w, thetas.size)

    for index, theta in enumerate(thetas):
        region = acceptance_region(float(theta), config)
        lowers[index] = region.lower
        uppers[index] = region.upper
        critical[index] = region.c

    return AcceptanceFamily(
        thetas=thetas, lowers=lowers, uppers=uppers, critical=critical, config=config
    )


def standard_family(config: ProblemConfig) -> AcceptanceFamily:
    thetas = config.theta_grid()
    return AcceptanceFamily(
        thetas=thetas,
        lowers=thetas - config.z_half,
        uppers=thetas + config.z_half,
        critical=np.full_like(thetas, np.nan),
        config=config,
        kind="standard",
    )


def confidence_set(x: float, family: AcceptanceFamily, refine: bool = True) -> Interval:
    """Invert the family at ``x``: the interval of theta values whose region accepts ``x``.

    Grid-level membership locates the boundary cells; with ``refine`` each boundary is then
    solved exactly in theta, otherwise it is interpolated linearly within the cell.
    """
    margins = np.minimum(x - family.lowers, family.uppers - x)
    accepted = np.flatnonzero(margins >= 0.0)
    if accepted.size == 0:
        raise InsufficientGridError(f"No theta on the grid accepts x={x!r}.")

    first, last = int(accepted[0]), int(accepted[-1])
    if first == 0 or last == family.thetas.size - 1:
        raise InsufficientGridError(
            f"The confidence set at x={x!r} reaches the edge of the theta grid; "
            "widen theta_grid_max."
        )
    if last - first + 1 != accepted.size:
        _log.warning(
            "Grid-level confidence set at x=%.6g is not contiguous; reporting its enclosing interval.",
            x,
        )

    def margin(theta: float) -> float:
        region = family.region_at(theta)
        return min(x - region.lower, region.upper - x)

    lower = _boundary(family, margins, first - 1, first, margin, refine)
    upper = _boundary(family, margins, last, last + 1, margin, refine)
    return Interval(lower, upper)


def expected_length(theta: float, family: AcceptanceFamily) -> float:
    """E_theta of the confidence-set length, as the integral of false-value acceptance probability."""
    step = family.config.theta_grid_step
    half_window = family.max_half_width + _TAIL_SIGMAS
    edges = np.arange(
        math.floor((theta - half_window) / step), math.ceil((theta + half_window) / step) + 1
    ) * step
    nodes, weights = composite_gauss_legendre(edges, _CELL_ORDER)
    lowers, uppers = family.endpoints_at(nodes)
    integrand = normal_cdf(uppers - theta) - normal_cdf(lowers - theta)
    return float(np.dot(weights, integrand))


def expected_length_direct(
    theta: float, family: AcceptanceFamily, panels: int = 64, order: int = 8
) -> float:
    """Brute-force E_theta length: integrate the inverted set length against phi(x - theta)."""
    half_window = 8.0
    nodes, weights = composite_gauss_legendre(
        np.linspace(theta - half_window, theta + half_window, panels + 1), order
    )
    lengths = np.array([confidence_set(float(x), family, refine=False).length for x in nodes])
    return float(np.dot(weights * normal_pdf(nodes - theta), lengths))


def efficiency_curve(family: AcceptanceFamily) -> EfficiencyCurve:
    standard_length = 2.0 * family.config.z_half
    lengths = np.array([expected_length(float(theta), family) for theta in family.thetas])
    return EfficiencyCurve.from_values(family.thetas, (lengths / standard_length) ** 2)


def pratt_expected_length(theta: ArrayLike, alpha: float) -> NDArray[np.float64] | float:
    """Closed-form E_theta length of Pratt's interval, sum of E(X + z)^+ and E(z - X)^+."""
    theta = np.asarray(theta, dtype=float)
    z = normal_quantile(alpha)
    upper_arm = z + theta
    lower_arm = z - theta
    return (
        upper_arm * normal_cdf(upper_arm)
        + normal_pdf(upper_arm)
        + lower_arm * normal_cdf(lower_arm)
        + normal_pdf(lower_arm)
    )


def pratt_efficiency_curve(thetas: ArrayLike, alpha: float) -> EfficiencyCurve:
    thetas = np.asarray(thetas, dtype=float)
    standard_length = 2.0 * normal_quantile(alpha / 2)
    values = (pratt_expected_length(thetas, alpha) / standard_length) ** 2
    return EfficiencyCurve.from_values(thetas, values)


def known_efficiency_curve(config: ProblemConfig) -> EfficiencyCurve:
    """Efficiency of the standard interval relative to the mixed interval (Pratt's when w = 0)."""
    if config.w == 0:
        return pratt_efficiency_curve(config.theta_grid(), config.alpha)
    return efficiency_curve(build_family(config))


def _standard_region(theta: float, z_half: float) -> AcceptanceRegion:
    return AcceptanceRegion(theta=theta, lower=theta - z_half, upper=theta + z_half, c=None)


def _log_ratio(x: float, theta: float, w: float) -> float:
    """log((w + phi(x)) / phi(x - theta)); same sign pattern against log c as g."""
    return math.log(w + math.exp(-0.5 * x * x) / SQRT_2PI) + 0.5 * (x - theta) ** 2 + LOG_SQRT_2PI


def _slope_sign(x: float, theta: float, w: float) -> float:
    """Has the sign of dg/dx: w (x - theta) - theta phi(x)."""
    return w * (x - theta) - theta * math.exp(-0.5 * x * x) / SQRT_2PI


def _g_minimizer(theta: float, w: float, xtol: float) -> float:
    lo, hi = theta - 1.0, theta + 1.0
    for _ in range(_MAX_EXPANSIONS):
        if _slope_sign(lo, theta, w) <= 0.0 <= _slope_sign(hi, theta, w):
            break
        width = hi - lo
        lo, hi = lo - width, hi + width
    else:
        raise ConvergenceError(f"Could not bracket the minimizer of g at theta={theta}.")

    if _slope_sign(lo, theta, w) == 0.0:
        return lo
    if _slope_sign(hi, theta, w) == 0.0:
        return hi
    return brentq(_slope_sign, lo, hi, args=(theta, w), xtol=xtol, maxiter=_MAX_SOLVER_ITERATIONS)


def _sublevel(
    c: float, theta: float, w: float, minimizer: float, xtol: float
) -> Interval | None:
    log_c = math.log(c)

    def level(x: float) -> float:
        return _log_ratio(x, theta, w) - log_c

    if level(minimizer) >= 0.0:
        return None
    lower = _outward_root(level, minimizer, -1.0, xtol)
    upper = _outward_root(level, minimizer, 1.0, xtol)
    return Interval(lower, upper)


def _outward_root(
    level: Callable[[float], float], start: float, direction: float, xtol: float
) -> float:
    step = 1.0
    for _ in range(_MAX_EXPANSIONS):
        outer = start + direction * step
        if level(outer) > 0.0:
            a, b = sorted((start, outer))
            return brentq(level, a, b, xtol=xtol, maxiter=_MAX_SOLVER_ITERATIONS)
        step *= 2.0
    raise ConvergenceError("Could not bracket an endpoint of the sublevel set.")


def _boundary(
    family: AcceptanceFamily,
    margins: NDArray[np.float64],
    outside: int,
    inside: int,
    margin: Callable[[float], float],
    refine: bool,
) -> float:
    theta_a, theta_b = float(family.thetas[outside]), float(family.thetas[inside])
    margin_a, margin_b = float(margins[outside]), float(margins[inside])
    if not refine:
        return theta_a + (theta_b - theta_a) * margin_a / (margin_a - margin_b)
    if margin_b == 0.0:
        return theta_b
    lo, hi = sorted((theta_a, theta_b))
    return brentq(margin, lo, hi, xtol=family.config.tol_root, maxiter=_MAX_SOLVER_ITERATIONS)
