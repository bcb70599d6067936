"""Monte Carlo estimates of coverage and expected length for any interval rule.

Replications are split into fixed-size chunks, each with its own substream spawned from the
seed, so estimates are identical for every worker count.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from numpy.typing import NDArray

from priorci.errors import DomainError
from priorci.known_variance import AcceptanceFamily
from priorci.special_fns import normal_quantile, t_quantile
from priorci.spline_b import MonotoneCubicB

CHUNK_SIZE = 100_000

Bounds = tuple[NDArray[np.float64], NDArray[np.float64]]


class IntervalRule(Protocol):
    """Maps arrays of sample means and standard deviations to interval bounds."""

    def __call__(self, xbar: NDArray[np.float64], s: NDArray[np.float64]) -> Bounds: ...


@dataclass(frozen=True, slots=True)
class McEstimate:
    mean: float
    std_error: float
    reps: int
    seed: int


@dataclass(frozen=True, slots=True)
class _ChunkMoments:
    count: int
    mean: float
    m2: float


def spawn_generators(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(count)]


def draw_statistics(
    rng: np.random.Generator, mu: float, sigma: float, n: int, size: int, raw_samples: bool = False
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Draw (xbar, s) pairs, from their exact joint law or from ``n`` raw normal variates."""
    if raw_samples:
        samples = rng.normal(mu, sigma, size=(size, n))
        return samples.mean(axis=1), samples.std(axis=1, ddof=1)
    xbar = mu + (sigma / math.sqrt(n)) * rng.standard_normal(size)
    s = sigma * np.sqrt(rng.chisquare(n - 1, size) / (n - 1))
    return xbar, s


def mc_coverage(
    mu: float,
    sigma: float,
    n: int,
    rule: IntervalRule,
    reps: int,
    seed: int,
    *,
    raw_samples: bool = False,
    workers: int = 1,
) -> McEstimate:
    def covered(lower: NDArray[np.float64], upper: NDArray[np.float64]) -> NDArray[np.float64]:
        return ((lower <= mu) & (mu <= upper)).astype(float)

    moments = _simulate(mu, sigma, n, rule, reps, seed, covered, raw_samples, workers)
    p = moments.mean
    return McEstimate(mean=p, std_error=math.sqrt(p * (1.0 - p) / reps), reps=reps, seed=seed)


def mc_expected_length(
    mu: float,
    sigma: float,
    n: int,
    rule: IntervalRule,
    reps: int,
    seed: int,
    *,
    raw_samples: bool = False,
    workers: int = 1,
) -> McEstimate:
    def length(lower: NDArray[np.float64], upper: NDArray[np.float64]) -> NDArray[np.float64]:
        return upper - lower

    moments = _simulate(mu, sigma, n, rule, reps, seed, length, raw_samples, workers)
    variance = moments.m2 / (reps - 1) if reps > 1 else 0.0
    return McEstimate(
        mean=moments.mean, std_error=math.sqrt(variance / reps), reps=reps, seed=seed
    )


def standard_known_rule(alpha: float, sigma: float, n: int) -> IntervalRule:
    half_width = normal_quantile(alpha / 2) * sigma / math.sqrt(n)

    def rule(xbar: NDArray[np.float64], s: NDArray[np.float64]) -> Bounds:
        return xbar - half_width, xbar + half_width

    return rule


def pratt_rule(alpha: float, sigma: float, n: int) -> IntervalRule:
    half_width = normal_quantile(alpha) * sigma / math.sqrt(n)

    def rule(xbar: NDArray[np.float64], s: NDArray[np.float64]) -> Bounds:
        return np.minimum(0.0, xbar - half_width), np.maximum(0.0, xbar + half_width)

    return rule


def mixed_known_rule(family: AcceptanceFamily, sigma: float, n: int) -> IntervalRule:
    """Vectorized inversion of an acceptance family with increasing endpoint curves."""
    if np.any(np.diff(family.lowers) <= 0.0) or np.any(np.diff(family.uppers) <= 0.0):
        raise DomainError("Vectorized inversion needs strictly increasing acceptance endpoints.")
    scale = sigma / math.sqrt(n)
    z_half = family.config.z_half

    def rule(xbar: NDArray[np.float64], s: NDArray[np.float64]) -> Bounds:
        x = xbar / scale
        # Off the grid the family reverts to the standard regions.
        lower = np.where(
            (x >= family.uppers[0]) & (x <= family.uppers[-1]),
            np.interp(x, family.uppers, family.thetas),
            x - z_half,
        )
        upper = np.where(
            (x >= family.lowers[0]) & (x <= family.lowers[-1]),
            np.interp(x, family.lowers, family.thetas),
            x + z_half,
        )
        return scale * lower, scale * upper

    return rule


def standard_t_rule(alpha: float, n: int) -> IntervalRule:
    t_quant = t_quantile(alpha / 2, n - 1)
    root_n = math.sqrt(n)

    def rule(xbar: NDArray[np.float64], s: NDArray[np.float64]) -> Bounds:
        half_width = t_quant * s / root_n
        return xbar - half_width, xbar + half_width

    return rule


def spline_rule(b: MonotoneCubicB, n: int) -> IntervalRule:
    root_n = math.sqrt(n)

    def rule(xbar: NDArray[np.float64], s: NDArray[np.float64]) -> Bounds:
        scale = s / root_n
        statistic = xbar / scale
        return -scale * np.asarray(b(-statistic)), scale * np.asarray(b(statistic))

    return rule


def _simulate(
    mu: float,
    sigma: float,
    n: int,
    rule: IntervalRule,
    reps: int,
    seed: int,
    statistic: Callable[[NDArray[np.float64], NDArray[np.float64]], NDArray[np.float64]],
    raw_samples: bool,
    workers: int,
) -> _ChunkMoments:
    if reps < 1:
        raise DomainError(f"reps must be at least 1, got {reps!r}.")
    if sigma <= 0:
        raise DomainError(f"sigma must be positive, got {sigma!r}.")
    if n < 2:
        raise DomainError(f"n must be at least 2, got {n!r}.")

    sizes = [CHUNK_SIZE] * (reps // CHUNK_SIZE)
    if reps % CHUNK_SIZE:
        sizes.append(reps % CHUNK_SIZE)
    generators = spawn_generators(seed, len(sizes))

    def run_chunk(index: int) -> _ChunkMoments:
        xbar, s = draw_statistics(generators[index], mu, sigma, n, sizes[index], raw_samples)
        values = statistic(*rule(xbar, s))
        mean = float(values.mean())
        return _ChunkMoments(count=values.size, mean=mean, m2=float(np.sum((values - mean) ** 2)))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            chunks = list(executor.map(run_chunk, range(len(sizes))))
    else:
        chunks = [run_chunk(index) for index in range(len(sizes))]

    total = chunks[0]
    for chunk in chunks[1:]:
        total = _combine(total, chunk)
    return total


def _combine(left: _ChunkMoments, right: _ChunkMoments) -> _ChunkMoments:
    count = left.count + right.count
    delta = right.mean - left.mean
    mean = left.mean + delta * right.count / count
    m2 = left.m2 + right.m2 + delta * delta * left.count * right.count / count
    return _ChunkMoments(count=count, mean=mean, m2=m2)
