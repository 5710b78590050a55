"""Empirical probes: martingale drift, serial independence and lower-envelope slopes."""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from typing import Sequence

import dcor
import numpy as np
from numpy.typing import ArrayLike

from chaos_tails.domain.errors import InvalidParameter
from chaos_tails.domain.models import DriftCheck, FamilySpec
from chaos_tails.exponents import is_infinite, parse_exponent
from chaos_tails.lab.estimates import tail_counts
from chaos_tails.lab.evaluate import evaluate_Qd
from chaos_tails.lab.families import SampleBatch, block_generator, generate_batch
from chaos_tails.series.fields import DenseField, SeparableField
from chaos_tails.telemetry import log_event, span_record_error, start_span, telemetry_tags

_logger = logging.getLogger(__name__)

DRIFT_SIGMAS = 4.0
MIN_TAIL_COUNT = 10


def drift_checks(batch: SampleBatch, *, sigmas: float = DRIFT_SIGMAS) -> list[DriftCheck]:
    """Mean of ξ(i, m) given the sign of ξ(i−1, m), pooled over i ≥ 2; passes within `sigmas` errors."""
    checks: list[DriftCheck] = []
    if batch.n < 2:
        return checks
    for m in range(batch.d):
        current = batch.values[:, 1:, m].ravel()
        history = np.sign(batch.values[:, :-1, m]).ravel()
        for sign in (-1, 1):
            group = current[history == sign]
            if group.size < 2:
                continue
            mean = float(group.mean())
            se = float(group.std(ddof=1) / math.sqrt(group.size))
            checks.append(
                DriftCheck(
                    coordinate=m + 1,
                    history_sign=sign,
                    mean=mean,
                    standard_error=se,
                    passed=abs(mean) <= sigmas * se + 1e-12,
                )
            )
    return checks


@dataclass(frozen=True)
class IndependenceCheck:
    statistic: float
    p_value: float
    dependent: bool


def independence_check(
    batch: SampleBatch,
    *,
    coordinate: int = 1,
    lag_index: int = 2,
    sample: int = 1000,
    permutations: int = 200,
    level: float = 0.01,
    seed: int = 0,
) -> IndependenceCheck:
    """Distance correlation of (ξ(i−1), ξ(i)) with the distance covariance permutation p-value."""
    if not 2 <= lag_index <= batch.n:
        raise InvalidParameter(f"lag index must lie in [2, {batch.n}], got {lag_index}")
    take = min(sample, batch.replications)
    previous = batch.values[:take, lag_index - 2, coordinate - 1]
    current = batch.values[:take, lag_index - 1, coordinate - 1]
    statistic = float(dcor.distance_correlation(previous, current))
    test = dcor.independence.distance_covariance_test(
        previous, current, num_resamples=permutations, random_state=block_generator(seed, 0)
    )
    p_value = float(test.pvalue)
    return IndependenceCheck(statistic=statistic, p_value=p_value, dependent=p_value < level)


def tail_slope(values: ArrayLike, x_grid: ArrayLike, *, min_count: int = MIN_TAIL_COUNT) -> float:
    """Slope of log(−log T̂) against log x over the x with enough exceedances."""
    xs = np.asarray(x_grid, dtype=float)
    counts, total = tail_counts(values, xs)
    keep = (counts >= min_count) & (counts < total) & (xs > 0)
    if keep.sum() < 2:
        raise InvalidParameter("too few informative points to fit a tail slope")
    estimate = counts[keep] / total
    slope, _ = np.polyfit(np.log(xs[keep]), np.log(-np.log(estimate)), 1)
    return float(slope)


@dataclass(frozen=True)
class ProbeRun:
    construction: str
    n: int
    predicted_slope: float
    slope: float
    tail: list[float]


@dataclass(frozen=True)
class LowerEnvelopeProbe:
    d: int
    q: float | str
    x_grid: list[float]
    runs: list[ProbeRun] = field(default_factory=list)


def lower_envelope_probe(
    d: int,
    q: object,
    n_list: Sequence[int],
    x_grid: ArrayLike,
    *,
    replications: int = 100_000,
    seed: int = 0,
) -> LowerEnvelopeProbe:
    """Empirical tails of the d-fold product and of normalized sums, with fitted log-log slopes."""
    q = parse_exponent(q)
    q_value = math.inf if is_infinite(q) else float(q)
    xs = np.asarray(x_grid, dtype=float)
    runs: list[ProbeRun] = []
    attrs = telemetry_tags(d=d, replications=replications, seed=seed)
    with start_span("lab.probe.lower_envelope", attrs) as span:
        try:
            if not math.isinf(q_value):
                spec = FamilySpec(kind="weibull_symmetric", d=d, n=d, q=q_value)
                product = DenseField.from_entries(d, d, {tuple(range(1, d + 1)): 1.0})
                values = evaluate_Qd(product, generate_batch(spec, replications, seed))
                runs.append(_run("product", d, q_value / d, values, xs))
            for offset, n in enumerate(n_list):
                if math.isinf(q_value):
                    spec = FamilySpec(kind="rademacher", d=d, n=n)
                else:
                    spec = FamilySpec(kind="weibull_symmetric", d=d, n=n, q=q_value)
                values = evaluate_Qd(SeparableField.uniform(d, n), generate_batch(spec, replications, seed + offset + 1))
                runs.append(_run("normalized_sum", n, min(q_value, 2.0) / d, values, xs))
        except Exception as error:
            span_record_error(span, error, type(error).__name__)
            raise
    log_event(_logger, "lower_envelope_probed", d=d, runs=len(runs), slopes=[round(run.slope, 4) for run in runs])
    return LowerEnvelopeProbe(d=d, q="inf" if math.isinf(q_value) else q_value, x_grid=xs.tolist(), runs=runs)


def _run(construction: str, n: int, predicted: float, values: np.ndarray, xs: np.ndarray) -> ProbeRun:
    counts, total = tail_counts(values, xs)
    return ProbeRun(
        construction=construction,
        n=n,
        predicted_slope=predicted,
        slope=tail_slope(values, xs),
        tail=(counts / total).tolist(),
    )
