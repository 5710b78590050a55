"""Martingale-difference families sampled in counter-keyed blocks.

Every block of replications draws from its own Philox stream keyed by (seed, block index), so a
batch is bit-identical whatever the worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import logging
import math
import time

import numpy as np
from scipy.special import gamma

from chaos_tails.config import get_settings
from chaos_tails.domain.errors import InvalidParameter
from chaos_tails.domain.models import FamilySpec
from chaos_tails.telemetry import elapsed_ms, log_event, span_record_error, start_span, telemetry_tags

_logger = logging.getLogger(__name__)

# sup |ξ| = 1 for the dependent family
DEPENDENT_LEVEL = 2.0 / 3.0
DEPENDENT_SWING = 0.5


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """ξ(i, m) per replication, shaped (replications, n, d)."""

    spec: FamilySpec
    values: np.ndarray
    second_moment: np.ndarray
    seed: int
    block_size: int

    @property
    def replications(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def d(self) -> int:
        return self.values.shape[2]


def block_generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _signs(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    return rng.integers(0, 2, size=shape, dtype=np.int8).astype(float) * 2.0 - 1.0


def _weibull_magnitudes(rng: np.random.Generator, q: float, shape: tuple[int, ...]) -> np.ndarray:
    """|ξ| = (−log U)^{1/q}, so P(|ξ| > x) = exp(−x^q) exactly."""
    if math.isinf(q):
        return np.ones(shape)
    return (-np.log1p(-rng.random(shape))) ** (1.0 / q)


def _require_q(spec: FamilySpec) -> float:
    if spec.q is None:
        raise InvalidParameter(f"family {spec.kind} needs a tail exponent q")
    return float(spec.q)


def _sample_block(spec: FamilySpec, rng: np.random.Generator, size: int) -> np.ndarray:
    shape = (size, spec.n, spec.d)
    if spec.kind == "rademacher":
        return _signs(rng, shape)
    if spec.kind == "weibull_symmetric":
        q = _require_q(spec)
        return _weibull_magnitudes(rng, q, shape) * _signs(rng, shape)
    if spec.kind == "scaled_product":
        # one τ per replication and coordinate, shared along the sequence
        q = _require_q(spec)
        tau = _weibull_magnitudes(rng, q, (size, 1, spec.d))
        return tau * _signs(rng, shape)
    if spec.kind == "dependent_martingale":
        nu = _signs(rng, shape)
        factor = np.ones(shape)
        factor[:, 1:, :] += DEPENDENT_SWING * nu[:, :-1, :]
        return DEPENDENT_LEVEL * factor * nu
    raise InvalidParameter(f"unknown family kind {spec.kind!r}")


def second_moments(spec: FamilySpec) -> np.ndarray:
    """Analytic E ξ²(i, m), shaped (n, d)."""
    table = np.ones((spec.n, spec.d))
    if spec.kind in ("weibull_symmetric", "scaled_product"):
        q = _require_q(spec)
        table[:] = 1.0 if math.isinf(q) else float(gamma(1.0 + 2.0 / q))
    elif spec.kind == "dependent_martingale":
        table[:] = DEPENDENT_LEVEL**2 * (1.0 + DEPENDENT_SWING**2)
        table[0, :] = DEPENDENT_LEVEL**2
    return table


def generate_batch(
    spec: FamilySpec,
    replications: int,
    seed: int,
    *,
    workers: int | None = None,
    block_size: int | None = None,
) -> SampleBatch:
    if replications < 1:
        raise InvalidParameter(f"replications must be >= 1, got {replications}")
    settings = get_settings()
    workers = max(1, workers or settings.workers)
    block_size = max(1, block_size or settings.block_size)
    sizes = [min(block_size, replications - start) for start in range(0, replications, block_size)]

    def draw(block: int) -> np.ndarray:
        return _sample_block(spec, block_generator(seed, block), sizes[block])

    started = time.perf_counter()
    attrs = telemetry_tags(family=spec.kind, d=spec.d, n=spec.n, replications=replications, seed=seed)
    with start_span("lab.campaign.generate", attrs) as span:
        try:
            if workers == 1 or len(sizes) == 1:
                blocks = [draw(block) for block in range(len(sizes))]
            else:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    blocks = list(pool.map(draw, range(len(sizes))))
        except Exception as error:
            span_record_error(span, error, type(error).__name__)
            raise
    log_event(
        _logger,
        "batch_generated",
        family=spec.kind,
        replications=replications,
        blocks=len(sizes),
        workers=workers,
        latency_ms=elapsed_ms(started),
    )
    return SampleBatch(
        spec=spec,
        values=np.concatenate(blocks, axis=0),
        second_moment=second_moments(spec),
        seed=seed,
        block_size=block_size,
    )
