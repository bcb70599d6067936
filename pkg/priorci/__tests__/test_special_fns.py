from __future__ import annotations

import math

import numpy as np
import pytest

from priorci.errors import DomainError
from priorci.special_fns import (
    composite_gauss_legendre,
    f_R,
    mean_R,
    normal_cdf,
    normal_pdf,
    normal_quantile,
    r_quadrature,
    r_range,
    t_quantile,
)

SAMPLE_SIZES = [2, 5, 24, 100]


def test_normal_pdf_values_and_symmetry() -> None:
    assert normal_pdf(0.0) == pytest.approx(0.3989422804, abs=1e-10)
    assert normal_pdf(1.0) == pytest.approx(0.2419707245, abs=1e-10)
    assert normal_pdf(-2.7) == normal_pdf(2.7)


def test_normal_cdf_values_and_tail() -> None:
    assert normal_cdf(0.0) == 0.5
    assert normal_cdf(1.959963985) == pytest.approx(0.975, abs=1e-9)
    assert normal_cdf(-8.0) < 1e-15
    assert normal_cdf(-1.3) == pytest.approx(1.0 - normal_cdf(1.3), abs=1e-15)


def test_normal_quantile_uses_the_upper_tail() -> None:
    assert normal_quantile(0.5) == 0.0
    assert normal_quantile(0.025) == pytest.approx(1.959963985, abs=1e-9)
    assert normal_quantile(0.05) == pytest.approx(1.644853627, abs=1e-9)


@pytest.mark.parametrize("a", [0.9, 0.5, 0.1, 0.05, 0.025, 0.01, 0.001])
def test_normal_quantile_inverts_the_cdf(a: float) -> None:
    assert normal_cdf(normal_quantile(a)) == pytest.approx(1.0 - a, abs=1e-10)


@pytest.mark.parametrize("a", [0.0, 1.0, -0.2, 1.5])
def test_quantiles_reject_levels_outside_the_unit_interval(a: float) -> None:
    with pytest.raises(DomainError):
        normal_quantile(a)
    with pytest.raises(DomainError):
        t_quantile(a, 5)


def test_t_quantile_values() -> None:
    assert t_quantile(0.5, 7) == pytest.approx(0.0, abs=1e-12)
    assert t_quantile(0.025, 23) == pytest.approx(2.068658, abs=1e-6)
    assert t_quantile(0.05, 23) == pytest.approx(1.713872, abs=1e-6)
    assert t_quantile(0.025, 10**6) == pytest.approx(1.959964, abs=1e-4)


def test_t_quantile_rejects_non_integer_degrees_of_freedom() -> None:
    with pytest.raises(DomainError):
        t_quantile(0.025, 0)
    with pytest.raises(DomainError):
        t_quantile(0.025, 2.5)  # type: ignore[arg-type]


def test_f_R_vanishes_off_the_positive_axis() -> None:
    assert f_R(0.0, 24) == 0.0
    assert np.all(f_R(np.array([-3.0, -0.1]), 24) == 0.0)


@pytest.mark.parametrize("n", SAMPLE_SIZES)
def test_f_R_is_a_density_with_unit_second_moment(n: int) -> None:
    nodes, weights = r_quadrature(n, 40, 10)

    assert weights.sum() == pytest.approx(1.0, abs=1e-10)
    assert np.dot(weights, nodes**2) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("n", SAMPLE_SIZES)
def test_mean_R_matches_quadrature(n: int) -> None:
    nodes, weights = r_quadrature(n, 40, 10)
    assert mean_R(n) == pytest.approx(np.dot(weights, nodes), abs=1e-9)


def test_mean_R_values() -> None:
    assert mean_R(2) == pytest.approx(math.sqrt(2.0 / math.pi), abs=1e-12)
    assert mean_R(24) == pytest.approx(0.9891927, abs=1e-7)
    assert mean_R(100_000) == pytest.approx(1.0, abs=1e-5)


def test_sample_size_below_two_is_rejected() -> None:
    with pytest.raises(DomainError):
        mean_R(1)
    with pytest.raises(DomainError):
        f_R(1.0, 1)


def test_r_range_brackets_the_bulk_of_R() -> None:
    r_lo, r_hi = r_range(24)
    assert 0.1 < r_lo < 0.5
    assert 1.5 < r_hi < 2.5


def test_composite_gauss_legendre_is_exact_for_polynomials() -> None:
    nodes, weights = composite_gauss_legendre(np.linspace(-1.0, 3.0, 5), 4)
    # Order 4 integrates degree 7 exactly on every panel.
    assert np.dot(weights, nodes**7 - 2.0 * nodes**2) == pytest.approx(
        (3.0**8 - 1.0) / 8.0 - 2.0 * (27.0 + 1.0) / 3.0, rel=1e-12
    )


def test_composite_gauss_legendre_needs_a_panel() -> None:
    with pytest.raises(DomainError):
        composite_gauss_legendre([0.0], 4)
