"""Parametric tail envelopes with the exponents M, N_d and min(q, 2)/d."""

from __future__ import annotations

import logging
import math
from typing import Sequence

import numpy as np

from chaos_tails.bounds.assumptions import BoundResult, FamilyAssumptions
from chaos_tails.bounds.recursion import independent_tail_recursion, martingale_tail_recursion
from chaos_tails.domain.errors import DimensionMismatch, InvalidParameter
from chaos_tails.domain.interfaces import TailFunction
from chaos_tails.exponents import QVector, exponent_M, exponent_Nd, inverse, is_infinite, parse_exponent
from chaos_tails.tails.cramer import CramerProfile
from chaos_tails.tails.functions import ParametricTail, fit_parametric_envelope, indicator_tail, to_grid
from chaos_tails.telemetry import log_event

_logger = logging.getLogger(__name__)


def coordinate_scales(qv: QVector, K: Sequence[float] | None) -> list[float]:
    scales = [1.0] * qv.d if K is None else [float(k) for k in K]
    if len(scales) != qv.d:
        raise DimensionMismatch(f"expected {qv.d} scales, got {len(scales)}")
    if any(not (k > 0 and math.isfinite(k)) for k in scales):
        raise InvalidParameter("scales K(m) must be finite and > 0")
    return scales


def unit_tail(q: object) -> TailFunction:
    """exp(−x^q), or the indicator of [0, 1) for q = ∞."""
    q = parse_exponent(q)
    if is_infinite(q):
        return indicator_tail(1.0)
    return ParametricTail(Y=1.0, K=1.0, q=float(q))


def log_log_slope(tail: TailFunction, x_lo: float, x_hi: float, points: int = 33) -> float:
    """Least-squares slope of log(−log T(x)) against log x on [x_lo, x_hi]."""
    xs = np.geomspace(x_lo, x_hi, points)
    values = np.asarray(tail.evaluate(xs), dtype=float)
    keep = (values > 0) & (values < 1)
    if keep.sum() < 2:
        raise InvalidParameter(f"tail is degenerate on [{x_lo}, {x_hi}]; no slope to measure")
    slope, _ = np.polyfit(np.log(xs[keep]), np.log(-np.log(values[keep])), 1)
    return float(slope)


def unit_assumptions(qv: QVector, independence: str = "martingale") -> FamilyAssumptions:
    """Unit-scale family for qv; bounded coordinates get the Hoeffding profile when independent."""
    cramer: tuple[CramerProfile | None, ...] = ()
    if independence == "independent" and any(is_infinite(q) for q in qv.q):
        cramer = tuple(CramerProfile.bounded(1.0) if is_infinite(q) else None for q in qv.q)
    return FamilyAssumptions(
        d=qv.d, tails=tuple(unit_tail(q) for q in qv.q), cramer=cramer, independence=independence
    )


def _fitted_envelope(
    theorem: int, qv: QVector, scales: list[float], recursion: BoundResult, exponent: float
) -> tuple[ParametricTail, float]:
    upper, C = fit_parametric_envelope(to_grid(recursion.tail), exponent, scale=math.prod(scales))
    log_event(
        _logger,
        "pipeline_constant_measured",
        theorem=theorem,
        d=qv.d,
        exponent=exponent,
        constant=C,
        prefactor=upper.Y,
    )
    return upper, C


def theorem1_envelope(qv: QVector, K: Sequence[float] | None = None) -> BoundResult:
    """min(1, Y·exp(−(x/(C·ΠK))^M)) fitted above the unit-scale martingale recursion."""
    scales = coordinate_scales(qv, K)
    M = exponent_M(qv).value
    recursion = martingale_tail_recursion(unit_assumptions(qv))
    upper, C = _fitted_envelope(1, qv, scales, recursion, M)
    return BoundResult(
        theorem=1,
        mode="tail",
        tail=upper,
        exponent=M,
        log_power=0.0,
        provenance=(
            *recursion.provenance,
            f"constants from pipeline: C = {C:.6g}, Y = {upper.Y:.6g}",
            f"lower envelope exp(-(x/(C1 K))^M) shares the exponent M = {M:.6g}",
        ),
        flags=recursion.flags,
        assumptions={"d": qv.d, "q": qv.labels(), "K": scales},
    )


def theorem2_envelope(qv: QVector, K: Sequence[float] | None = None) -> BoundResult:
    """min(1, Y·exp(−(x/(C·ΠK))^N_d)) fitted above the unit-scale independent recursion."""
    scales = coordinate_scales(qv, K)
    result = exponent_Nd(qv)
    recursion = independent_tail_recursion(unit_assumptions(qv, "independent"))
    upper, C = _fitted_envelope(2, qv, scales, recursion, result.value)
    return BoundResult(
        theorem=2,
        mode="tail",
        tail=upper,
        exponent=result.value,
        log_power=0.0,
        provenance=(
            f"exponent N_d from {result.provenance} ({result.branch})",
            *recursion.provenance,
            f"constants from pipeline: C = {C:.6g}, Y = {upper.Y:.6g}",
        ),
        flags=recursion.flags,
        assumptions={"d": qv.d, "q": qv.labels(), "K": scales, "independence": "independent"},
    )


def theorem3_lower_envelope(d: int, q: object) -> BoundResult:
    if d < 1:
        raise InvalidParameter(f"dimension d must be >= 1, got {d}")
    q = parse_exponent(q)
    exponent = (2.0 if is_infinite(q) else min(float(q), 2.0)) / d
    return BoundResult(
        theorem=3,
        mode="tail",
        tail=ParametricTail(Y=1.0, K=1.0, q=exponent, rho=0.0),
        exponent=exponent,
        log_power=0.0,
        provenance=("lower bound, used to sandwich empirical tails",),
        flags=("constant C4 not tracked; unit constant used",),
        assumptions={"d": d, "q": "inf" if is_infinite(q) else float(q), "inverse_q": inverse(q)},
    )
