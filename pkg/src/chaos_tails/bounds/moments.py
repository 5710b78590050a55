"""L^p bounds for Q_d and the Markov conversion of a moment curve into a tail."""

from __future__ import annotations

import logging
import math
from typing import Callable, Sequence

import numpy as np

from chaos_tails.bounds.assumptions import BoundResult, FamilyAssumptions
from chaos_tails.domain.errors import AssumptionViolated, InvalidParameter
from chaos_tails.exponents import moment_constant_gamma
from chaos_tails.tails.functions import GridTail, grid_from_function
from chaos_tails.tails.numerics import COARSE_POINTS, multistart_minimize
from chaos_tails.telemetry import log_event

_logger = logging.getLogger(__name__)

DEFAULT_HORIZON = 64

MomentCurve = Callable[[float], float]


def _check_order(p: float) -> None:
    if not p >= 2:
        raise InvalidParameter(f"moment order p must be >= 2, got {p}")


def martingale_moment_bound(assumptions: FamilyAssumptions, p: float) -> float:
    """γ(d)·p^d·Π μ_m(d·p)."""
    _check_order(p)
    d = assumptions.d
    product = math.prod(assumptions.moment(m, d * p) for m in range(1, d + 1))
    return moment_constant_gamma(d) * p**d * product


def independent_moment_bound(assumptions: FamilyAssumptions, p: float) -> float:
    """2^{d/2}·p^d·Π μ_m(p) / log p."""
    _check_order(p)
    if assumptions.independence != "independent":
        raise AssumptionViolated("the independent moment bound needs independence = 'independent'")
    d = assumptions.d
    product = math.prod(assumptions.moment(m, p) for m in range(1, d + 1))
    return 2.0 ** (d / 2.0) * p**d * product / math.log(p)


def moment_curve(assumptions: FamilyAssumptions, p_values: Sequence[float], *, independent: bool = False) -> BoundResult:
    bound = independent_moment_bound if independent else martingale_moment_bound
    points = tuple((float(p), bound(assumptions, float(p))) for p in p_values)
    return BoundResult(
        theorem=7 if independent else 6,
        mode="moment",
        moments=points,
        exponent=float(assumptions.d),
        log_power=-1.0 if independent else 0.0,
        provenance=(
            "2^(d/2) p^d prod mu_m(p) / log p" if independent else "gamma(d) p^d prod mu_m(d p)",
        ),
        assumptions=assumptions.echo(),
    )


def moments_to_tail(
    curve: MomentCurve,
    *,
    p_min: float = 2.0,
    horizon: float = DEFAULT_HORIZON,
    points: int = COARSE_POINTS,
) -> GridTail:
    """x ↦ min(1, inf_{p ∈ [p_min, horizon]} (bound(p)/x)^p), optimized in p by scan plus golden search."""
    if horizon <= p_min:
        raise InvalidParameter(f"moment horizon {horizon} must exceed p_min {p_min}")
    p_grid = np.linspace(p_min, horizon, points)

    def log_bound(p: np.ndarray) -> np.ndarray:
        flat = np.ravel(p)
        return np.log(np.array([curve(float(v)) for v in flat])).reshape(np.shape(p))

    log_bounds = log_bound(p_grid)
    if not np.all(np.isfinite(log_bounds)):
        raise InvalidParameter("moment curve must be positive and finite on the p grid")
    saturated: list[float] = []

    def values_at(xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        out = np.ones_like(xs)
        live = xs > 0
        if not live.any():
            return out
        log_x = np.log(xs[live])
        matrix = p_grid[None, :] * (log_bounds[None, :] - log_x[:, None])

        def objective(p: np.ndarray, rows: np.ndarray) -> np.ndarray:
            return p * (log_bound(p) - log_x[rows])

        best_p, best = multistart_minimize(matrix, p_grid, objective)
        at_edge = (best_p >= horizon - 1e-9) & (best < 0)
        if at_edge.any():
            saturated.append(float(xs[live][at_edge].min()))
        out[live] = np.exp(np.minimum(best, 0.0))
        return out

    scale = float(math.exp(log_bounds[0]))
    tail = grid_from_function(values_at, scale)
    if saturated:
        log_event(_logger, "moment_horizon_exceeded", horizon=horizon, first_x=min(saturated))
    return tail
