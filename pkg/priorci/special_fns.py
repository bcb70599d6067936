"""Scalar special functions and densities shared by the interval solvers.

Everything here is a pure, vectorized function of its arguments. Quantiles follow the
upper-tail convention: ``normal_quantile(a)`` is the ``z`` with ``P(Z > z) = a``.
"""

from __future__ import annotations

import math
from functools import cache

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special

from priorci.errors import DomainError

SQRT_2PI = math.sqrt(2.0 * math.pi)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

# f_R tail mass omitted on each side of the r-integration range.
R_TAIL_MASS = 1e-12


def normal_pdf(x: ArrayLike) -> NDArray[np.float64] | float:
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / SQRT_2PI


def normal_cdf(x: ArrayLike) -> NDArray[np.float64] | float:
    return special.ndtr(np.asarray(x, dtype=float))


def normal_quantile(a: float) -> float:
    if not 0.0 < a < 1.0:
        raise DomainError(f"normal_quantile requires 0 < a < 1, got {a!r}.")
    return float(-special.ndtri(a))


def t_quantile(a: float, m: int) -> float:
    if not 0.0 < a < 1.0:
        raise DomainError(f"t_quantile requires 0 < a < 1, got {a!r}.")
    if int(m) != m or m < 1:
        raise DomainError(f"t_quantile requires an integer m >= 1, got {m!r}.")
    return float(-special.stdtrit(int(m), a))


def f_R(r: ArrayLike, n: int) -> NDArray[np.float64] | float:
    """Density of R = S/sigma, i.e. sqrt(Q/(n-1)) with Q chi-squared on n-1 degrees of freedom."""
    _require_sample_size(n)
    r = np.asarray(r, dtype=float)
    k = 0.5 * (n - 1)
    positive = r > 0.0
    safe_r = np.where(positive, r, 1.0)
    log_density = (
        math.log(2.0)
        + k * math.log(k)
        - special.gammaln(k)
        + (n - 2) * np.log(safe_r)
        - k * safe_r * safe_r
    )
    return np.where(positive, np.exp(log_density), 0.0)


def mean_R(n: int) -> float:
    _require_sample_size(n)
    return math.sqrt(2.0 / (n - 1)) * math.exp(special.gammaln(0.5 * n) - special.gammaln(0.5 * (n - 1)))


@cache
def r_range(n: int, tail_mass: float = R_TAIL_MASS) -> tuple[float, float]:
    """Interval of r values outside of which f_R carries less than ``tail_mass`` per side."""
    _require_sample_size(n)
    df = n - 1
    r_lo = math.sqrt(special.chdtri(df, 1.0 - tail_mass) / df)
    r_hi = math.sqrt(special.chdtri(df, tail_mass) / df)
    return r_lo, r_hi


@cache
def _legendre_rule(order: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return nodes, weights


def composite_gauss_legendre(
    edges: ArrayLike, order: int
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Nodes and weights of an ``order``-point Gauss-Legendre rule on every panel of ``edges``."""
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise DomainError("composite_gauss_legendre needs at least two panel edges.")
    if order < 1:
        raise DomainError(f"Quadrature order must be positive, got {order!r}.")

    base_nodes, base_weights = _legendre_rule(order)
    left = edges[:-1, None]
    half_width = 0.5 * np.diff(edges)[:, None]
    nodes = left + half_width * (base_nodes[None, :] + 1.0)
    weights = half_width * base_weights[None, :]
    return nodes.ravel(), weights.ravel()


def r_quadrature(
    n: int, panels: int, order: int
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Quadrature rule for integrals against f_R: returns nodes and weights * f_R(nodes)."""
    r_lo, r_hi = r_range(n)
    nodes, weights = composite_gauss_legendre(np.linspace(r_lo, r_hi, panels + 1), order)
    return nodes, weights * f_R(nodes, n)


def _require_sample_size(n: int) -> None:
    if int(n) != n or n < 2:
        raise DomainError(f"Sample size n must be an integer >= 2, got {n!r}.")
