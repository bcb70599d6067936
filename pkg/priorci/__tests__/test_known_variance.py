from __future__ import annotations

import math

import numpy as np
import pytest

from priorci.config import ProblemConfig
from priorci.errors import ConvergenceError, DomainError, InsufficientGridError
from priorci.known_variance import (
    AcceptanceFamily,
    AcceptanceRegion,
    acceptance_region,
    build_family,
    confidence_set,
    critical_constant_bracket,
    efficiency_curve,
    expected_length,
    expected_length_direct,
    g_value,
    known_efficiency_curve,
    mu_interval,
    pratt_efficiency_curve,
    pratt_expected_length,
    pratt_interval,
    region_probability,
    standard_family,
    standard_interval,
    sublevel_interval,
)
from priorci.special_fns import SQRT_2PI, normal_quantile
from priorci.types import Interval

Z_HALF = normal_quantile(0.025)
SYMMETRIC_XS = [0.0, -0.5, 0.5, -1.0, 1.0, -2.0, 2.0, -5.0, 5.0, -10.0, 10.0]


@pytest.fixture(scope="module")
def nested_families() -> tuple[AcceptanceFamily, AcceptanceFamily]:
    return (
        build_family(ProblemConfig(alpha=0.05, theta_grid_step=0.05)),
        build_family(ProblemConfig(alpha=0.10, theta_grid_step=0.05)),
    )


def test_standard_interval_is_centered_with_fixed_width() -> None:
    interval = standard_interval(0.0, 0.05)
    assert interval.lower == pytest.approx(-1.95996, abs=1e-5)
    assert interval.upper == pytest.approx(1.95996, abs=1e-5)

    shifted = standard_interval(3.0, 0.05)
    assert shifted.lower == pytest.approx(1.04004, abs=1e-5)
    assert shifted.upper == pytest.approx(4.95996, abs=1e-5)
    assert shifted.length == pytest.approx(2.0 * Z_HALF, abs=1e-9)


def test_pratt_interval_always_contains_zero() -> None:
    assert pratt_interval(0.0, 0.05).upper == pytest.approx(1.64485, abs=1e-5)
    assert pratt_interval(0.0, 0.05).lower == pytest.approx(-1.64485, abs=1e-5)

    far_right = pratt_interval(10.0, 0.05)
    assert far_right.lower == 0.0
    assert far_right.upper == pytest.approx(11.64485, abs=1e-5)

    far_left = pratt_interval(-10.0, 0.05)
    assert far_left.lower == pytest.approx(-11.64485, abs=1e-5)
    assert far_left.upper == 0.0


@pytest.mark.parametrize("x", SYMMETRIC_XS)
def test_pratt_interval_is_reflection_invariant(x: float) -> None:
    assert pratt_interval(x, 0.05).lower == pytest.approx(-pratt_interval(-x, 0.05).upper, abs=1e-9)


def test_mu_interval_rescales_theta_endpoints() -> None:
    interval = mu_interval(standard_interval(0.0, 0.05), sigma=1.0, n=4)
    assert interval.upper == pytest.approx(0.97998, abs=1e-5)
    with pytest.raises(DomainError):
        mu_interval(interval, sigma=0.0, n=4)


def test_g_value_closed_forms() -> None:
    assert g_value(0.0, 0.0, 0.0, 0.0) == pytest.approx(1.0)
    assert g_value(0.0, 0.0, 0.0, 0.1) == pytest.approx(1.0 + 0.1 * SQRT_2PI)
    assert g_value(20.0, 1.0, 0.0, 0.1) > 1e6
    assert g_value(-20.0, 1.0, 0.0, 0.1) > 1e6
    with pytest.raises(DomainError):
        g_value(0.0, 1.0, 0.0, -0.1)


def test_critical_constant_bracket_at_five_percent() -> None:
    c_lo, c_hi = critical_constant_bracket(0.1, 0.05)
    scale = math.exp(0.5 * Z_HALF**2)

    assert c_lo == pytest.approx(0.1 * SQRT_2PI * scale, rel=1e-9)
    assert c_hi == pytest.approx((0.1 * SQRT_2PI + 1.0) * scale, rel=1e-9)
    assert c_lo == pytest.approx(1.7104, rel=1e-3)
    assert c_hi == pytest.approx(8.5332, rel=1e-3)


def test_sublevel_interval_is_empty_below_the_minimum_of_g() -> None:
    # At theta = 0 the minimum of (w + phi(x)) / phi(x) is 1 + w sqrt(2 pi).
    assert sublevel_interval(1.0, 0.0, 0.1) is None


def test_sublevel_interval_endpoints_are_roots_of_g() -> None:
    region = sublevel_interval(3.0, 0.7, 0.1)

    assert region is not None
    assert abs(g_value(region.lower, 3.0, 0.7, 0.1)) <= 1e-9 * 3.0
    assert abs(g_value(region.upper, 3.0, 0.7, 0.1)) <= 1e-9 * 3.0


def test_acceptance_region_at_zero(flagship_config: ProblemConfig) -> None:
    region = acceptance_region(0.0, flagship_config)
    c_lo, c_hi = critical_constant_bracket(0.1, 0.05)

    assert region.c is not None
    assert c_lo <= region.c <= c_hi
    assert region_probability(region.lower, region.upper, 0.0) == pytest.approx(0.95, abs=1e-8)
    assert region.lower == pytest.approx(-region.upper, abs=1e-9)

    sublevel = sublevel_interval(region.c, 0.0, 0.1)
    assert sublevel is not None
    assert region_probability(sublevel.lower, sublevel.upper, 0.0) == pytest.approx(0.95, abs=1e-8)


def test_acceptance_region_approaches_the_standard_region(flagship_config: ProblemConfig) -> None:
    region = acceptance_region(5.0, flagship_config)
    assert region.lower == pytest.approx(5.0 - Z_HALF, abs=0.05)
    assert region.upper == pytest.approx(5.0 + Z_HALF, abs=0.05)


@pytest.mark.parametrize("theta", [-15.0, -10.5, 10.5, 15.0])
def test_acceptance_region_at_the_grid_edge_uses_the_lower_bracket_end(theta: float) -> None:
    config = ProblemConfig()
    region = acceptance_region(theta, config)
    c_lo, _ = critical_constant_bracket(config.w, config.alpha)

    assert region.c == pytest.approx(c_lo, rel=1e-6)
    assert region_probability(region.lower, region.upper, theta) == pytest.approx(0.95, abs=1e-8)
    assert region.lower == pytest.approx(theta - Z_HALF, abs=1e-6)


@pytest.mark.parametrize("x", [-6.0, -2.0, -0.5, 0.0, 0.5, 1.0, 3.0, 6.0])
def test_smaller_confidence_level_gives_a_nested_interval(
    nested_families: tuple[AcceptanceFamily, AcceptanceFamily], x: float
) -> None:
    wide_family, narrow_family = nested_families
    wide = confidence_set(x, wide_family)
    narrow = confidence_set(x, narrow_family)

    assert wide.lower <= narrow.lower + 1e-9
    assert narrow.upper <= wide.upper + 1e-9


@pytest.mark.parametrize("theta", [0.3, 1.7, 4.2])
def test_acceptance_regions_are_reflection_symmetric(
    flagship_config: ProblemConfig, theta: float
) -> None:
    right = acceptance_region(theta, flagship_config)
    left = acceptance_region(-theta, flagship_config)

    tolerance = 10 * flagship_config.tol_root
    assert left.lower == pytest.approx(-right.upper, abs=tolerance)
    assert left.upper == pytest.approx(-right.lower, abs=tolerance)


def test_acceptance_region_requires_positive_w() -> None:
    with pytest.raises(DomainError):
        acceptance_region(0.0, ProblemConfig(w=0.0))


def test_region_check_rejects_wrong_coverage(flagship_config: ProblemConfig) -> None:
    with pytest.raises(ConvergenceError):
        AcceptanceRegion(theta=0.0, lower=-1.0, upper=1.0, c=None).check(flagship_config)


@pytest.mark.parametrize("w", [0.01, 0.1, 1.0])
def test_every_critical_constant_lies_in_its_bracket(w: float) -> None:
    family = build_family(ProblemConfig(w=w, theta_grid_step=0.05))
    c_lo, c_hi = critical_constant_bracket(w, 0.05)

    assert np.all(np.isfinite(family.critical))
    assert np.all((family.critical >= c_lo) & (family.critical <= c_hi))
    assert np.all(family.lowers < family.uppers)


def test_family_grid_is_symmetric(mixed_family: AcceptanceFamily) -> None:
    assert mixed_family.thetas[0] == -mixed_family.thetas[-1]
    assert np.allclose(mixed_family.lowers, -mixed_family.uppers[::-1], atol=1e-9)


@pytest.mark.parametrize("x", SYMMETRIC_XS)
def test_mixed_confidence_set_is_reflection_invariant(
    mixed_family: AcceptanceFamily, x: float
) -> None:
    interval = confidence_set(float(x), mixed_family)
    mirrored = confidence_set(float(-x), mixed_family)

    tolerance = 10 * mixed_family.config.tol_root
    assert interval.lower == pytest.approx(-mirrored.upper, abs=tolerance)
    assert interval.upper == pytest.approx(-mirrored.lower, abs=tolerance)


@pytest.mark.parametrize("x", [-10.0, 10.0])
def test_mixed_confidence_set_reverts_to_standard_far_from_zero(
    mixed_family: AcceptanceFamily, x: float
) -> None:
    interval = confidence_set(x, mixed_family)
    assert interval.lower == pytest.approx(x - Z_HALF, abs=1e-3)
    assert interval.upper == pytest.approx(x + Z_HALF, abs=1e-3)


def test_large_w_gives_nearly_the_standard_interval() -> None:
    family = build_family(ProblemConfig(w=100.0, theta_grid_step=0.05))
    for x in (-6.0, -2.0, 0.0, 1.5, 4.0):
        interval = confidence_set(x, family, refine=False)
        assert interval.lower == pytest.approx(x - Z_HALF, abs=2e-2)
        assert interval.upper == pytest.approx(x + Z_HALF, abs=2e-2)


def test_standard_family_inverts_to_the_standard_interval() -> None:
    family = standard_family(ProblemConfig(theta_grid_step=0.05))
    interval = confidence_set(1.3, family)
    assert interval.lower == pytest.approx(1.3 - Z_HALF, abs=1e-9)
    assert interval.upper == pytest.approx(1.3 + Z_HALF, abs=1e-9)


def test_confidence_set_reports_an_insufficient_grid() -> None:
    family = standard_family(ProblemConfig(theta_grid_max=10.0, theta_grid_step=0.05))
    with pytest.raises(InsufficientGridError):
        confidence_set(9.0, family)
    with pytest.raises(InsufficientGridError):
        confidence_set(50.0, family)


@pytest.mark.parametrize("theta", [0.0, 2.0, 7.0])
def test_standard_family_expected_length_is_constant(theta: float) -> None:
    family = standard_family(ProblemConfig(theta_grid_step=0.05))
    assert expected_length(theta, family) == pytest.approx(2.0 * Z_HALF, abs=1e-8)


def test_pratt_efficiency_at_zero() -> None:
    assert pratt_efficiency_curve([-1.0, 0.0, 1.0], 0.05).e_at_zero == pytest.approx(
        0.7223, abs=1e-3
    )
    assert known_efficiency_curve(ProblemConfig(w=0.0)).e_at_zero == pytest.approx(
        0.7223, abs=1e-3
    )


def test_pratt_expected_length_matches_its_interval_far_from_zero() -> None:
    # For large theta Pratt's interval is almost always [0, x + z].
    assert pratt_expected_length(12.0, 0.05) == pytest.approx(12.0 + 1.644853627, abs=1e-9)


def test_mixed_efficiency_curve(mixed_family: AcceptanceFamily) -> None:
    curve = efficiency_curve(mixed_family)

    assert curve.e_at_zero == pytest.approx(0.8016, abs=2e-3)
    assert curve.e_max == pytest.approx(1.2095, abs=5e-3)
    assert np.allclose(curve.values, curve.values[::-1], atol=1e-7)
    assert curve.values[-1] == pytest.approx(1.0, abs=1e-2)


def test_nearly_zero_w_approaches_pratt() -> None:
    family = build_family(ProblemConfig(w=1e-6, theta_grid_max=10.0))
    e_at_zero = (expected_length(0.0, family) / (2.0 * Z_HALF)) ** 2
    assert e_at_zero == pytest.approx(0.7223, abs=5e-3)


@pytest.mark.parametrize("theta", [0.0, 1.0, 3.0])
def test_expected_length_agrees_with_direct_set_length_quadrature(
    mixed_family: AcceptanceFamily, theta: float
) -> None:
    assert expected_length(theta, mixed_family) == pytest.approx(
        expected_length_direct(theta, mixed_family), abs=5e-3
    )


def test_endpoints_revert_to_standard_off_the_grid(mixed_family: AcceptanceFamily) -> None:
    lowers, uppers = mixed_family.endpoints_at(np.array([-40.0, 40.0]))
    assert lowers.tolist() == pytest.approx([-40.0 - Z_HALF, 40.0 - Z_HALF], abs=1e-9)
    assert uppers.tolist() == pytest.approx([-40.0 + Z_HALF, 40.0 + Z_HALF], abs=1e-9)


def test_interval_rejects_reversed_endpoints() -> None:
    with pytest.raises(DomainError):
        Interval(1.0, 0.0)
