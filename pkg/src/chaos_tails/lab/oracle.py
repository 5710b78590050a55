"""Exact tails of Rademacher chaos by enumerating every sign pattern."""

from __future__ import annotations

import logging

import numpy as np
from numpy.typing import ArrayLike

from chaos_tails.config import get_settings
from chaos_tails.domain.errors import DimensionMismatch, TooLarge
from chaos_tails.domain.interfaces import CoefficientField
from chaos_tails.lab.evaluate import evaluate_Qd_enumerate
from chaos_tails.telemetry import log_event

_logger = logging.getLogger(__name__)

PATTERN_CHUNK = 1 << 15
TIE_TOL = 1e-12


def sign_patterns(start: int, stop: int, bits: int) -> np.ndarray:
    """Patterns start..stop−1 as ±1 rows; bit k of the pattern code is sign k."""
    codes = np.arange(start, stop, dtype=np.int64)
    return ((codes[:, None] >> np.arange(bits, dtype=np.int64)) & 1).astype(float) * 2.0 - 1.0


def exact_oracle_tail(
    field: CoefficientField,
    d: int,
    n: int,
    x: ArrayLike,
    *,
    max_bits: int | None = None,
) -> np.ndarray | float:
    """max(P(Q > x), P(Q < −x)) over all 2^{n·d} equally likely sign patterns."""
    if field.d != d:
        raise DimensionMismatch(f"field has d = {field.d}, requested d = {d}")
    limit = max_bits if max_bits is not None else get_settings().oracle_max_bits
    bits = n * d
    if bits > limit:
        raise TooLarge(f"exact enumeration needs 2^{bits} patterns; the cap is 2^{limit}")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    above = np.zeros(xs.shape, dtype=np.int64)
    below = np.zeros(xs.shape, dtype=np.int64)
    total = 1 << bits
    for start in range(0, total, PATTERN_CHUNK):
        stop = min(total, start + PATTERN_CHUNK)
        # column-major reshape keeps sign k on (i, m) = (k mod n, k div n)
        patterns = sign_patterns(start, stop, bits).reshape(stop - start, d, n).transpose(0, 2, 1)
        values = np.sort(evaluate_Qd_enumerate(field, patterns))
        slack = TIE_TOL * max(1.0, float(np.abs(values).max(initial=0.0)))
        above += values.size - np.searchsorted(values, xs + slack, side="right")
        below += np.searchsorted(values, -xs - slack, side="left")
    log_event(_logger, "oracle_enumerated", d=d, n=n, patterns=total)
    probabilities = np.maximum(above, below) / total
    if np.ndim(x) == 0:
        return float(probabilities[0])
    return probabilities
