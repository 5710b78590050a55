"""Split-measure bounds for coefficient series, optimized over the threshold λ."""

from __future__ import annotations

from dataclasses import dataclass, replace
import logging
import math
from typing import Literal, Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import logsumexp

from chaos_tails.bounds.assumptions import BoundResult, FamilyAssumptions, MomentEnvelope
from chaos_tails.bounds.envelopes import (
    coordinate_scales,
    theorem1_envelope,
    theorem2_envelope,
    unit_assumptions,
    unit_tail,
)
from chaos_tails.bounds.moments import moment_curve
from chaos_tails.bounds.recursion import independent_tail_recursion, martingale_tail_recursion
from chaos_tails.domain.errors import DimensionMismatch, InvalidParameter
from chaos_tails.domain.interfaces import CoefficientField
from chaos_tails.exponents import ExponentResult, QVector, exponent_G, exponent_M, exponent_Nd
from chaos_tails.series.fields import PowerLawField, SeparableField
from chaos_tails.tails.functions import GridTail, fit_parametric_envelope, grid_from_function, tail_minimum, to_grid
from chaos_tails.tails.numerics import multistart_minimize
from chaos_tails.tails.operators import product_compose
from chaos_tails.telemetry import log_event, span_record_error, start_span, telemetry_tags

_logger = logging.getLogger(__name__)

EXACT_CANDIDATES = 4096
SEARCH_POINTS = 1024
ROW_CHUNK = 128
NORMALIZATION_TOL = 1e-12
MOMENT_ORDERS = 64

Orientation = Literal["literal", "head_tail"]
SeriesMode = Literal["martingale_tail", "independent_tail", "martingale_moment", "independent_moment"]


@dataclass(frozen=True)
class SplitProfile:
    """Split measures at one threshold.

    a1/a2 put the ℓ¹ mass on |b| ≤ λ and the ℓ² mass on |b| > λ; head_l1/tail_l2 swap the roles.
    """

    lam: float
    a1: float
    a2: float
    head_l1: float
    tail_l2: float

    def pair(self, orientation: Orientation) -> tuple[float, float]:
        if orientation == "literal":
            return self.a1, self.a2
        return self.head_l1, self.tail_l2


class SplitTable:
    """Prefix sums over the sorted magnitudes of a field, evaluated at many thresholds at once."""

    def __init__(self, field: CoefficientField) -> None:
        magnitudes = np.asarray(field.magnitudes(), dtype=float)
        if magnitudes.size == 0 and field.remainder_ceiling == 0:
            raise InvalidParameter("coefficient field is identically zero")
        self.field = field
        self.magnitudes = magnitudes
        self.l1 = np.concatenate([[0.0], np.cumsum(magnitudes)])
        self.l2 = np.concatenate([[0.0], np.cumsum(magnitudes**2)])
        self.exact = field.remainder_ceiling == 0

    def remainders(self, lams: np.ndarray) -> np.ndarray:
        if self.exact:
            return np.zeros(lams.shape + (4,))
        flat = [self.field.remainder(float(lam)) for lam in lams.ravel()]
        return np.array(flat, dtype=float).reshape(lams.shape + (4,))

    def arrays(self, lams: ArrayLike) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(a1, a2, head_l1, tail_l2) shaped like lams."""
        lams = np.asarray(lams, dtype=float)
        k = np.searchsorted(self.magnitudes, lams, side="right")
        rest = self.remainders(lams)
        small_l1 = self.l1[k] + rest[..., 0]
        small_l2 = self.l2[k] + rest[..., 1]
        large_l1 = (self.l1[-1] - self.l1[k]) + rest[..., 2]
        large_l2 = np.maximum(self.l2[-1] - self.l2[k], 0.0) + rest[..., 3]
        return small_l1, np.sqrt(large_l2), large_l1, np.sqrt(small_l2)

    def total_l2(self) -> float:
        rest = self.field.remainder(self.field.remainder_ceiling) if not self.exact else (0.0, 0.0, 0.0, 0.0)
        return float(math.sqrt(self.l2[-1] + rest[1] + rest[3]))

    def candidates(self) -> tuple[np.ndarray, bool]:
        """Threshold candidates and whether a golden refinement is needed between them."""
        top = float(self.magnitudes[-1]) if self.magnitudes.size else self.field.remainder_ceiling
        bottom = float(self.magnitudes[0]) if self.magnitudes.size else top
        lower = max(bottom / 2.0, self.field.remainder_ceiling)
        upper = 2.0 * top
        distinct = np.unique(self.magnitudes)
        if self.exact and distinct.size <= EXACT_CANDIDATES:
            return np.unique(np.concatenate([[lower], distinct, [upper]])), False
        return np.geomspace(lower, upper, SEARCH_POINTS), True


def split_profile(field: CoefficientField, lam: float) -> SplitProfile:
    if not lam > 0:
        raise InvalidParameter(f"threshold lambda must be > 0, got {lam}")
    a1, a2, head, tail = SplitTable(field).arrays(np.array([lam]))
    return SplitProfile(lam=float(lam), a1=float(a1[0]), a2=float(a2[0]), head_l1=float(head[0]), tail_l2=float(tail[0]))


def _log_absolute_moments(product: GridTail, orders: np.ndarray) -> np.ndarray:
    """log E|Z|^p for P(|Z| > t) ≤ min(1, 2·product(t)), by an upper Riemann sum over the grid segments.

    Orders at or beyond the extrapolated decay slope come back as +inf.
    """
    xs, ts = product.x, product.t
    with np.errstate(divide="ignore"):
        log_weight = np.log(np.minimum(1.0, 2.0 * ts[:-1]))
        log_hi = np.log(xs[1:])
        log_ratio = np.log(xs[:-1]) - log_hi
        terms = (
            log_weight[None, :]
            + orders[:, None] * log_hi[None, :]
            + np.log(-np.expm1(orders[:, None] * log_ratio[None, :]))
        )
    log_m = logsumexp(terms, axis=1)
    slope = product.tail_slope()
    if slope is None:
        return log_m
    # beyond the last node: p·t_N·(1+x_N)^{-s} ∫ (1+x)^{p-1+s} dx
    beyond = np.full_like(orders, np.inf)
    finite = orders < -slope
    beyond[finite] = (
        math.log(min(1.0, 2.0 * ts[-1]))
        + np.log(orders[finite])
        + orders[finite] * math.log1p(xs[-1])
        - np.log(-slope - orders[finite])
    )
    return np.logaddexp(log_m, beyond)


def absolute_product_tail(qv: QVector) -> GridTail:
    """Tail of Π_m ξ_m for unit coordinate tails, composed under arbitrary dependence."""
    current = to_grid(unit_tail(qv.q[0]))
    for q in qv.q[1:]:
        current = product_compose(unit_tail(q), current)
    return current


def convex_average_tail(product: GridTail, orders: int = MOMENT_ORDERS) -> GridTail:
    """Tail of Σ w_I |Z_I| with Σ w_I = 1 and every Z_I below `product`: min over p of E|Z|^p / y^p."""
    ps = np.arange(1, orders + 1, dtype=float)
    log_m = _log_absolute_moments(product, ps)
    usable = np.isfinite(log_m)
    if not usable.any():
        return GridTail(np.array([0.0]), np.array([1.0]))
    ps, log_m = ps[usable], log_m[usable]

    def values_at(ys: np.ndarray) -> np.ndarray:
        ys = np.asarray(ys, dtype=float)
        out = np.ones_like(ys)
        live = ys > 0
        if live.any():
            exponents = log_m[None, :] - ps[None, :] * np.log(ys[live])[:, None]
            out[live] = np.minimum(1.0, np.exp(np.minimum(exponents.min(axis=1), 0.0)))
        return out

    return grid_from_function(values_at, product.scale)


@dataclass(frozen=True)
class SplitTerms:
    """L bounds the ℓ¹ part per unit a1, R the ℓ² part per unit a2, both at unit coordinate scales."""

    l1: GridTail
    l2: GridTail

    def at(self, x: np.ndarray, l1_width: np.ndarray, l2_width: np.ndarray) -> np.ndarray:
        """L(x/(2·a1)) + R(x/(2·a2)) with widths already multiplied by the product scale."""
        return _scaled(self.l1, x, 2.0 * l1_width) + _scaled(self.l2, x, 2.0 * l2_width)


def _scaled(tail: GridTail, x: np.ndarray, width: np.ndarray) -> np.ndarray:
    """tail(x/width): 0 for width = 0 and 1 for width = ∞."""
    x, width = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(width, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = np.where(width > 0, x / width, np.inf)
    finite = np.isfinite(ratio)
    values = tail.evaluate(np.where(finite, ratio, 0.0))
    far = float(tail.evaluate(np.array([np.finfo(float).max]))[0])
    return np.where(finite, values, np.where(width > 0, far, 0.0))


def _field_scale(table: SplitTable, product_scale: float) -> float:
    return max(table.total_l2() * product_scale, 1e-300)


def _series_tail(
    table: SplitTable,
    terms: SplitTerms,
    product_scale: float,
) -> tuple[GridTail, dict[Orientation, int]]:
    candidates, refine = table.candidates()
    log_grid = np.log(candidates)
    unsplit_width = np.array(table.total_l2() * product_scale)

    def widths(lams: np.ndarray) -> tuple[np.ndarray, ...]:
        a1, a2, head, tail = table.arrays(lams)
        return a1 * product_scale, a2 * product_scale, head * product_scale, tail * product_scale

    coarse_widths = widths(candidates)

    def coarse(xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        column = xs[:, None]
        a1, a2, head, tail = (w[None, :] for w in coarse_widths)
        return terms.at(column, a1, a2), terms.at(column, head, tail)

    def values_at(xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        out = np.ones_like(xs)
        for start in range(0, xs.size, ROW_CHUNK):
            chunk = xs[start : start + ROW_CHUNK]
            live = chunk > 0
            if not live.any():
                continue
            x_live = chunk[live]
            literal, head_tail = coarse(x_live)
            matrix = np.minimum(literal, head_tail)
            best = matrix.min(axis=1)
            if refine:

                def objective(u: np.ndarray, rows: np.ndarray) -> np.ndarray:
                    a1, a2, head, tail = widths(np.exp(u))
                    x = x_live[rows]
                    return np.minimum(terms.at(x, a1, a2), terms.at(x, head, tail))

                _, refined = multistart_minimize(matrix, log_grid, objective)
                best = np.minimum(best, refined)
            best = np.minimum(best, _scaled(terms.l2, x_live, unsplit_width))
            values = out[start : start + ROW_CHUNK]
            values[live] = np.minimum(1.0, best)
        return out

    grid = grid_from_function(values_at, _field_scale(table, product_scale))
    literal, head_tail = coarse(grid.x[grid.x > 0])
    wins = literal.min(axis=1) <= head_tail.min(axis=1)
    return grid, {"literal": int(wins.sum()), "head_tail": int((~wins).sum())}


def _check_dimensions(field: CoefficientField, qv: QVector) -> None:
    if field.d != qv.d:
        raise DimensionMismatch(f"field has d = {field.d} but the exponent vector has d = {qv.d}")


def _remainder_note(field: CoefficientField) -> tuple[str, ...]:
    if isinstance(field, PowerLawField):
        return (field.remainder_note(),)
    return ()


def _split_terms(qv: QVector, independent: bool) -> tuple[SplitTerms, BoundResult]:
    l1 = convex_average_tail(absolute_product_tail(qv))
    if independent:
        recursion = independent_tail_recursion(unit_assumptions(qv, "independent"))
    else:
        recursion = martingale_tail_recursion(unit_assumptions(qv))
    return SplitTerms(l1=l1, l2=to_grid(recursion.tail)), recursion


def _series_bound(
    theorem: int,
    field: CoefficientField,
    qv: QVector,
    K: Sequence[float] | None,
    second: ExponentResult,
) -> BoundResult:
    _check_dimensions(field, qv)
    product_scale = math.prod(coordinate_scales(qv, K))
    G = exponent_G(qv).value
    attrs = telemetry_tags(theorem=str(theorem), d=field.d)
    with start_span(f"series.theorem{theorem}", attrs) as span:
        try:
            table = SplitTable(field)
            terms, recursion = _split_terms(qv, independent=theorem == 14)
            tail, wins = _series_tail(table, terms, product_scale)
            _, C1 = fit_parametric_envelope(terms.l1, G)
            _, C2 = fit_parametric_envelope(terms.l2, second.value)
        except Exception as error:
            span_record_error(span, error, type(error).__name__)
            raise
    log_event(_logger, "bound_constructed", theorem=theorem, d=field.d, orientation_wins=wins, C1=C1, C2=C2)
    return BoundResult(
        theorem=theorem,
        mode="tail",
        tail=tail,
        exponent=second.value,
        log_power=0.0,
        provenance=(
            "min of R(x/(|b|_2 K)) and inf over lambda of L(x/(2 a1 K)) + R(x/(2 a2 K)), "
            f"L the l1 term from moments of the product tail, R the theorem-{recursion.theorem} recursion",
            f"constants from pipeline: L <= Y exp(-(x/C1)^G) with C1 = {C1:.6g}, G = {G:.6g}; "
            f"R <= Y exp(-(x/C2)^{second.name}) with C2 = {C2:.6g}, {second.name} = {second.value:.6g}",
            f"orientation attaining the infimum: literal at {wins['literal']} nodes, head/tail at {wins['head_tail']}",
            *_remainder_note(field),
        ),
        flags=recursion.flags,
        assumptions={"d": field.d, "q": qv.labels(), "K": product_scale},
    )


def theorem13_tail(field: CoefficientField, qv: QVector, K: Sequence[float] | None = None) -> BoundResult:
    return _series_bound(13, field, qv, K, exponent_M(qv))


def theorem14_tail(field: CoefficientField, qv: QVector, K: Sequence[float] | None = None) -> BoundResult:
    """Independent version with N_d in the ℓ² term; never above theorem13_tail."""
    own = _series_bound(14, field, qv, K, exponent_Nd(qv))
    martingale = theorem13_tail(field, qv, K)
    return replace(
        own,
        tail=tail_minimum(own.tail, martingale.tail),
        provenance=(*own.provenance, "min with the martingale split bound"),
        assumptions={**own.assumptions, "independence": "independent"},
    )


def _moment_infimum(table: SplitTable, weight: float) -> tuple[float, float, Orientation]:
    candidates, refine = table.candidates()
    a1, a2, head, tail = table.arrays(candidates)
    with np.errstate(invalid="ignore"):
        literal = a1 + np.where(a2 > 0, a2 * weight, 0.0)
        head_tail = head + np.where(tail > 0, tail * weight, 0.0)
    values = np.minimum(literal, head_tail)
    index = int(np.argmin(values))
    best, lam = float(values[index]), float(candidates[index])
    orientation: Orientation = "literal" if literal[index] <= head_tail[index] else "head_tail"
    if refine:

        def objective(u: np.ndarray, rows: np.ndarray) -> np.ndarray:
            a1, a2, head, tail = table.arrays(np.exp(u))
            return np.minimum(a1 + a2 * weight, head + tail * weight)

        u, refined = multistart_minimize(values[None, :], np.log(candidates), objective)
        if float(refined[0]) < best:
            best, lam = float(refined[0]), float(math.exp(u[0]))
            split = table.arrays(np.array([lam]))
            orientation = "literal" if split[0][0] + split[1][0] * weight <= split[2][0] + split[3][0] * weight else "head_tail"
    return best, lam, orientation


def _moment_series(field: CoefficientField, d: int, p: float, *, log_factor: bool) -> float:
    if field.d != d:
        raise DimensionMismatch(f"field has d = {field.d}, requested d = {d}")
    if not p > 1:
        raise InvalidParameter(f"moment order p must be > 1, got {p}")
    weight = p**d / math.log(p) if log_factor else p**d
    best, _, _ = _moment_infimum(SplitTable(field), weight)
    return best


def theorem15_moment(field: CoefficientField, d: int, p: float) -> float:
    """inf_λ (a1(λ) + a2(λ)·p^d/log p), both orientations."""
    return _moment_series(field, d, p, log_factor=True)


def theorem16_moment(field: CoefficientField, d: int, p: float) -> float:
    """inf_λ (a1(λ) + a2(λ)·p^d), both orientations."""
    return _moment_series(field, d, p, log_factor=False)


def series_moment_curve(field: CoefficientField, p_values: Sequence[float], *, independent: bool) -> BoundResult:
    theorem = 15 if independent else 16
    table = SplitTable(field)
    points: list[tuple[float, float]] = []
    orientations: list[str] = []
    for p in p_values:
        p = float(p)
        if not p > 1:
            raise InvalidParameter(f"moment order p must be > 1, got {p}")
        weight = p**field.d / math.log(p) if independent else p**field.d
        best, lam, orientation = _moment_infimum(table, weight)
        points.append((p, best))
        orientations.append(f"p={p:g}: lambda={lam:.4g} ({orientation})")
    return BoundResult(
        theorem=theorem,
        mode="moment",
        moments=tuple(points),
        exponent=float(field.d),
        log_power=-1.0 if independent else 0.0,
        provenance=(
            "inf over lambda of a1 + a2 p^d / log p" if independent else "inf over lambda of a1 + a2 p^d",
            *orientations,
            *_remainder_note(field),
        ),
        flags=("constant C(b) not tracked; unit moment envelopes assumed",),
        assumptions={"d": field.d, "independence": "independent" if independent else "martingale"},
    )


def _standard_deviations(variances: ArrayLike) -> np.ndarray:
    table = np.atleast_2d(np.asarray(variances, dtype=float))
    if table.ndim != 2:
        raise InvalidParameter("variance table must be shaped (n, d)")
    if not np.all(np.isfinite(table)) or np.any(table <= 0):
        raise InvalidParameter("variances sigma^2(i, m) must be finite and > 0")
    return np.sqrt(table)


def normalized_field(variances: ArrayLike) -> SeparableField:
    """b(I) = Π σ(i_m, m) / √(Σ_I Π σ²(i_m, m)) for a variance table shaped (n, d)."""
    sigma = _standard_deviations(variances)
    field = SeparableField(sigma.T).normalized()
    total = field.square_sum()
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise InvalidParameter(f"normalized field has sum of squares {total!r}, expected 1")
    return field


def normalized_sum_bounds(
    variances: ArrayLike,
    qv: QVector,
    mode: SeriesMode,
    *,
    p_values: Sequence[float] = (2.0, 4.0, 8.0),
    K: Sequence[float] | None = None,
) -> BoundResult:
    """Bounds for θ_n = Q_d / √(Σ Π σ²) holding uniformly in n."""
    field = normalized_field(variances)
    _check_dimensions(field, qv)
    if mode == "martingale_tail":
        result = theorem1_envelope(qv, K)
    elif mode == "independent_tail":
        result = theorem2_envelope(qv, K)
    elif mode in ("martingale_moment", "independent_moment"):
        independent = mode == "independent_moment"
        assumptions = FamilyAssumptions.homogeneous(
            qv.d,
            unit_tail(qv.q[0]),
            independence="independent" if independent else "martingale",
            moments=MomentEnvelope(kind="constant", c=1.0),
        )
        result = moment_curve(assumptions, p_values, independent=independent)
        result = replace(result, flags=(*result.flags, "unit moment envelopes of the normalized variables assumed"))
    else:
        raise InvalidParameter(f"unknown normalized-sum mode {mode!r}")
    return replace(
        result,
        provenance=(
            *result.provenance,
            f"normalized field b(I) = prod sigma / sqrt(sum prod sigma^2), n = {field.n}, sum b^2 = {field.square_sum():.15g}",
        ),
    )


def diagonal_free_variance(field: CoefficientField, variances: ArrayLike) -> float:
    """Σ_I b²(I)·Π_m σ²(i_m, m), the variance of Q_d for orthogonal increments."""
    table = np.atleast_2d(np.asarray(variances, dtype=float))
    indices, values = field.dense()
    if table.shape[1] != field.d:
        raise DimensionMismatch(f"variance table has {table.shape[1]} columns, field has d = {field.d}")
    if indices.size and indices.max() >= table.shape[0]:
        raise DimensionMismatch(f"variance table covers n = {table.shape[0]} rows, field needs {indices.max() + 1}")
    weights = np.prod(table[indices, np.arange(field.d)], axis=1)
    return float(np.sum(values**2 * weights))
