"""Empirical tails with Clopper–Pearson bands and L^p norms with bootstrap bands."""

from __future__ import annotations

from dataclasses import dataclass
import logging
import math
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy import stats

from chaos_tails.domain.errors import InvalidParameter
from chaos_tails.lab.families import block_generator
from chaos_tails.telemetry import log_event

_logger = logging.getLogger(__name__)

DEFAULT_CONFIDENCE = 0.99
DEFAULT_RESAMPLES = 1000
RESAMPLE_CHUNK = 20
GRID_POINTS = 32


def clopper_pearson_upper(successes: ArrayLike, trials: int, confidence: float = DEFAULT_CONFIDENCE) -> np.ndarray:
    """One-sided upper confidence bound for a binomial proportion."""
    k = np.asarray(successes, dtype=float)
    with np.errstate(invalid="ignore"):
        upper = stats.beta.ppf(confidence, k + 1.0, np.maximum(trials - k, 1e-300))
    return np.where(k >= trials, 1.0, np.nan_to_num(upper, nan=1.0))


def clopper_pearson_lower(successes: ArrayLike, trials: int, confidence: float = DEFAULT_CONFIDENCE) -> np.ndarray:
    k = np.asarray(successes, dtype=float)
    with np.errstate(invalid="ignore"):
        lower = stats.beta.ppf(1.0 - confidence, np.maximum(k, 1e-300), trials - k + 1.0)
    return np.where(k <= 0, 0.0, np.nan_to_num(lower, nan=0.0))


@dataclass(frozen=True)
class TailEstimate:
    x: np.ndarray
    counts: np.ndarray
    estimate: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    replications: int


def tail_counts(values: ArrayLike, x_grid: ArrayLike) -> tuple[np.ndarray, int]:
    """max(#{v > x}, #{v < −x}) per x."""
    ordered = np.sort(np.asarray(values, dtype=float).ravel())
    xs = np.asarray(x_grid, dtype=float)
    above = ordered.size - np.searchsorted(ordered, xs, side="right")
    below = np.searchsorted(ordered, -xs, side="left")
    return np.maximum(above, below), ordered.size


def empirical_tail(values: ArrayLike, x_grid: ArrayLike, *, confidence: float = DEFAULT_CONFIDENCE) -> TailEstimate:
    counts, total = tail_counts(values, x_grid)
    if total == 0:
        raise InvalidParameter("empirical tail needs at least one value")
    return TailEstimate(
        x=np.asarray(x_grid, dtype=float),
        counts=counts,
        estimate=counts / total,
        upper=clopper_pearson_upper(counts, total, confidence),
        lower=clopper_pearson_lower(counts, total, confidence),
        replications=total,
    )


def default_x_grid(values: ArrayLike, points: int = GRID_POINTS) -> np.ndarray:
    """Geometric grid on [0.25·x_90, 4·x_99.99] of |values|."""
    magnitudes = np.abs(np.asarray(values, dtype=float).ravel())
    low, high = np.quantile(magnitudes, [0.90, 0.9999])
    if not high > 0:
        high = float(magnitudes.max()) or 1.0
    if not low > 0:
        low = high / 16.0
    return np.geomspace(0.25 * low, 4.0 * high, points)


@dataclass(frozen=True)
class MomentEstimate:
    p: np.ndarray
    estimate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    reliable: np.ndarray


def reliable_horizon(replications: int) -> float:
    return 4.0 * math.log10(max(replications, 1))


def _bootstrap_means(powers: np.ndarray, resamples: int, seed: int) -> np.ndarray:
    """Column means of `powers` under `resamples` bootstrap draws, shaped (resamples, columns)."""
    size = powers.shape[0]
    out = np.empty((resamples, powers.shape[1]))
    for block, start in enumerate(range(0, resamples, RESAMPLE_CHUNK)):
        count = min(RESAMPLE_CHUNK, resamples - start)
        weights = block_generator(seed, block).multinomial(size, np.full(size, 1.0 / size), size=count)
        out[start : start + count] = weights @ powers / size
    return out


def empirical_moments(
    values: ArrayLike,
    p_list: Sequence[float],
    *,
    resamples: int = DEFAULT_RESAMPLES,
    confidence: float = DEFAULT_CONFIDENCE,
    seed: int = 0,
) -> MomentEstimate:
    """Plug-in |·|_p with percentile bootstrap bands."""
    data = np.abs(np.asarray(values, dtype=float).ravel())
    p = np.asarray(p_list, dtype=float)
    if data.size == 0:
        raise InvalidParameter("empirical moments need at least one value")
    if np.any(p < 1):
        raise InvalidParameter("moment orders must be >= 1")
    powers = data[:, None] ** p[None, :]
    estimate = powers.mean(axis=0) ** (1.0 / p)
    boot = _bootstrap_means(powers, resamples, seed) ** (1.0 / p[None, :])
    tail = (1.0 - confidence) / 2.0
    lower = np.quantile(boot, tail, axis=0)
    upper = np.quantile(boot, 1.0 - tail, axis=0)
    horizon = reliable_horizon(data.size)
    reliable = p <= horizon
    if not reliable.all():
        log_event(
            _logger,
            "moment_estimate_unreliable",
            replications=int(data.size),
            horizon=round(horizon, 3),
            orders=[float(v) for v in p[~reliable]],
        )
    return MomentEstimate(p=p, estimate=estimate, lower=lower, upper=upper, reliable=reliable)


@dataclass(frozen=True)
class VarianceCheck:
    empirical: float
    expected: float
    standard_error: float
    passed: bool


def variance_check(
    values: ArrayLike,
    expected: float,
    *,
    resamples: int = 200,
    seed: int = 0,
    tolerance: float = 5.0,
) -> VarianceCheck:
    """Empirical second moment against the exact variance, within `tolerance` bootstrap errors."""
    data = np.asarray(values, dtype=float).ravel()
    squares = (data**2)[:, None]
    empirical = float(squares.mean())
    boot = _bootstrap_means(squares, resamples, seed)[:, 0]
    se = float(boot.std(ddof=1))
    return VarianceCheck(
        empirical=empirical,
        expected=float(expected),
        standard_error=se,
        passed=abs(empirical - expected) <= tolerance * se + 1e-12 * max(1.0, abs(expected)),
    )
