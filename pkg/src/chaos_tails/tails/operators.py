"""Operators on tail functions: second-moment integrals, W, W̄ and product composition."""

from __future__ import annotations

from dataclasses import dataclass
import logging
import math
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike
from scipy import integrate, special

from chaos_tails.domain.errors import Divergent, InvalidTail
from chaos_tails.domain.interfaces import TailFunction
from chaos_tails.exponents import aux_constants
from chaos_tails.tails.cramer import CramerProfile, linear_sum_tail
from chaos_tails.tails.functions import (
    GridTail,
    ParametricTail,
    grid_from_function,
    tail_minimum,
    to_grid,
)
from chaos_tails.tails.numerics import (
    COARSE_POINTS,
    GRID_POINTS,
    HORIZON_CAP,
    TAIL_FLOOR,
    find_horizon,
    multistart_minimize,
)

_logger = logging.getLogger(__name__)

QUAD_RTOL = 1e-6

MomentFunction = Callable[[np.ndarray], np.ndarray]


def _expm1_ratio(c: np.ndarray, ell: np.ndarray) -> np.ndarray:
    """(e^{c·ℓ} − 1)/c with the c → 0 limit ℓ."""
    c = np.asarray(c, dtype=float)
    ell = np.asarray(ell, dtype=float)
    small = np.abs(c * ell) < 1e-8
    safe_c = np.where(small, 1.0, c)
    with np.errstate(over="ignore", invalid="ignore"):
        regular = np.expm1(c * ell) / safe_c
    return np.where(small, ell * (1.0 + 0.5 * c * ell), regular)


def _segment_first_moment(
    a: np.ndarray, t_a: np.ndarray, b: np.ndarray, slope: np.ndarray, step: np.ndarray
) -> np.ndarray:
    """∫_a^b y·T(y) dy for T(y) = t_a·((1+y)/(1+a))^slope, or the constant t_a on a step."""
    ell = np.log1p(b) - np.log1p(a)
    w = 1.0 + a
    curved = t_a * w * w * _expm1_ratio(slope + 2.0, ell) - t_a * w * _expm1_ratio(slope + 1.0, ell)
    flat = t_a * (b * b - a * a) / 2.0
    return np.where(t_a <= 0.0, 0.0, np.where(step, flat, curved))


def _grid_moment_function(grid: GridTail) -> MomentFunction:
    xs, ts = grid.x, grid.t
    last = xs.size - 1
    slope_tail = grid.tail_slope()
    if slope_tail is not None and slope_tail >= -2.0:
        raise Divergent(
            f"grid tail decays like (1+x)^{slope_tail:.3g}; the second moment needs a slope below -2"
        )

    with np.errstate(divide="ignore", invalid="ignore"):
        log_t = np.log(ts)
        slopes = np.diff(log_t) / np.diff(np.log1p(xs)) if last else np.zeros(0)
    steps = ts[1:] == 0.0
    slopes = np.where(np.isfinite(slopes), slopes, 0.0)

    def tail_integral(a: np.ndarray, t_a: np.ndarray) -> np.ndarray:
        if slope_tail is None:
            return np.zeros_like(a)
        w = 1.0 + a
        return np.where(
            t_a <= 0.0,
            0.0,
            t_a * w * w / -(slope_tail + 2.0) - t_a * w / -(slope_tail + 1.0),
        )

    segments = _segment_first_moment(xs[:-1], ts[:-1], xs[1:], slopes, steps) if last else np.zeros(0)
    suffix = np.zeros(last + 1)
    suffix[last] = float(tail_integral(np.array([xs[last]]), np.array([ts[last]]))[0])
    for k in range(last - 1, -1, -1):
        suffix[k] = suffix[k + 1] + segments[k]

    def moment(v: np.ndarray) -> np.ndarray:
        v = np.maximum(np.asarray(v, dtype=float), 0.0)
        t_v = grid.evaluate(v)
        k = np.clip(np.searchsorted(xs, v, side="right") - 1, 0, last)
        inside = k < last
        out = np.empty_like(v)
        if inside.any():
            kk = k[inside]
            partial = _segment_first_moment(v[inside], t_v[inside], xs[kk + 1], slopes[kk], steps[kk])
            out[inside] = partial + suffix[kk + 1]
        if (~inside).any():
            out[~inside] = tail_integral(v[~inside], t_v[~inside])
        return v * v * t_v + 2.0 * out

    return moment


def _parametric_moment_function(tail: ParametricTail) -> MomentFunction:
    """Closed form through the regularized upper incomplete gamma function (log power 0)."""
    q, K, Y = tail.q, tail.K, tail.Y
    a = 2.0 / q
    knee = tail.clip_point()
    weight = Y * K * K / q * special.gamma(a)

    def moment(v: np.ndarray) -> np.ndarray:
        v = np.maximum(np.asarray(v, dtype=float), 0.0)
        start = np.maximum(v, knee)
        flat = np.where(v < knee, (knee * knee - v * v) / 2.0, 0.0)
        first = flat + weight * special.gammaincc(a, (start / K) ** q)
        return v * v * tail.evaluate(v) + 2.0 * first

    return moment


def moment_function(tail: TailFunction) -> MomentFunction:
    """Vectorized v ↦ −∫_v^∞ y² dT(y) for use inside the W search."""
    if isinstance(tail, ParametricTail) and tail.rho == 0:
        return _parametric_moment_function(tail)
    return _grid_moment_function(to_grid(tail))


def tail_second_moment(tail: TailFunction, v: float) -> float:
    """v²·T(v) + 2∫_v^∞ y·T(y) dy."""
    if v < 0:
        raise InvalidTail(f"second-moment truncation level must be >= 0, got {v}")
    if isinstance(tail, ParametricTail) and tail.rho != 0:
        knee = max(v, tail.clip_point())
        head = (knee * knee - v * v) / 2.0
        body, _ = integrate.quad(
            lambda y: y * float(tail.evaluate(y)), knee, np.inf, epsrel=QUAD_RTOL, limit=200
        )
        return float(v * v * tail.evaluate(v) + 2.0 * (head + body))
    return float(moment_function(tail)(np.array([v]))[0])


def tail_horizon(tail: TailFunction) -> float:
    if isinstance(tail, GridTail) and tail.t[-1] == 0.0:
        return float(tail.x[np.argmax(tail.t == 0.0)])
    return find_horizon(tail.evaluate, tail.scale)


def _w_values(moment: MomentFunction, sigma: float, knots: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    def values_at(xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        out = np.ones_like(xs)
        live = xs > 0
        if not live.any():
            return out
        x = xs[live]
        top = 2.0 * float(x.max())
        coarse = np.geomspace(1e-4 * sigma, max(top, 2e-4 * sigma), COARSE_POINTS)
        extra = knots[(knots > coarse[0]) & (knots < coarse[-1])]
        v_grid = np.union1d(coarse, extra)
        m2 = moment(v_grid)
        with np.errstate(divide="ignore", over="ignore"):
            matrix = np.exp(-(x[:, None] ** 2) / (8.0 * v_grid[None, :] ** 2)) + 4.0 * m2[None, :] / x[:, None] ** 2

        def objective(u: np.ndarray, rows: np.ndarray) -> np.ndarray:
            v = np.exp(u)
            xr = x[rows]
            return np.exp(-(xr**2) / (8.0 * v * v)) + 4.0 * moment(v) / xr**2

        _, best = multistart_minimize(matrix, np.log(v_grid), objective)
        out[live] = np.minimum(1.0, best)
        return out

    return values_at


def truncation_operator_W(tail: TailFunction, *, points: int = GRID_POINTS) -> GridTail:
    """W[T](x) = min(1, inf_v [exp(−x²/(8v²)) + 4·x⁻²·m2(v)])."""
    moment = moment_function(tail)
    base_scale = tail.scale
    sigma = math.sqrt(max(float(moment(np.array([1e-12 * base_scale]))[0]), 0.0))
    if sigma <= 0.0:
        sigma = base_scale
    knots = to_grid(tail).x if isinstance(tail, GridTail) else np.zeros(0)
    grid = grid_from_function(_w_values(moment, sigma, knots[knots > 0]), sigma, points=points)
    _logger.debug("truncation operator applied: sigma=%.6g horizon=%.6g", sigma, grid.x[-1])
    return grid


def _half_composition(first: TailFunction, second: TailFunction, h_first: float, h_second: float):
    """4·inf_y [first(y) + second(x/y)] over a log-y scan plus golden refinement."""

    def values_at(x: np.ndarray) -> np.ndarray:
        lo = np.log(np.maximum(x / (2.0 * h_second), 1e-300))
        hi = np.full_like(x, math.log(2.0 * h_first))
        lower, upper = np.minimum(lo, hi), np.maximum(lo, hi)
        steps = np.linspace(0.0, 1.0, COARSE_POINTS)
        grid = lower[:, None] + steps[None, :] * (upper - lower)[:, None]
        y = np.exp(grid)
        matrix = first.evaluate(y) + second.evaluate(x[:, None] / y)

        def objective(u: np.ndarray, rows: np.ndarray) -> np.ndarray:
            yy = np.exp(u)
            return first.evaluate(yy) + second.evaluate(x[rows] / yy)

        _, best = multistart_minimize(matrix, grid, objective)
        return 4.0 * best

    return values_at


def product_compose(first: TailFunction, second: TailFunction, *, points: int = GRID_POINTS) -> GridTail:
    """T ∨ G (x) = min(1, 4·inf_y [T(y) + G(x/y)]), symmetric in its arguments."""
    h_first = tail_horizon(first)
    h_second = tail_horizon(second)
    forward = _half_composition(first, second, h_first, h_second)
    backward = _half_composition(second, first, h_second, h_first)

    def values_at(xs: ArrayLike) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        out = np.ones_like(xs)
        live = xs > 0
        if live.any():
            x = xs[live]
            out[live] = np.minimum(1.0, np.minimum(forward(x), backward(x)))
        return out

    scale = first.scale * second.scale
    return grid_from_function(values_at, scale, points=points, floor=TAIL_FLOOR, cap=HORIZON_CAP)


def parametric_product(first: ParametricTail, second: ParametricTail) -> ParametricTail:
    """Closed-form relaxation of T ∨ G for two parametric tails."""
    q1, q2 = first.q, second.q
    q3 = q1 * q2 / (q1 + q2)
    rho3 = (q1 * second.rho + q2 * first.rho) / (q1 + q2)
    if rho3 < -q3:
        raise InvalidTail(f"composed log power {rho3:.4g} falls below -q3 = {-q3:.4g}")
    return ParametricTail(Y=8.0 * max(first.Y, second.Y), K=first.K * second.K, q=q3, rho=rho3)


def cramer_refine_Wbar(tail: TailFunction, profile: CramerProfile | None) -> GridTail:
    """min(W[T], exp(−χ*)) pointwise."""
    truncated = truncation_operator_W(tail)
    if profile is None or profile.lambda_max <= 0.0:
        return truncated
    return tail_minimum(truncated, linear_sum_tail(profile))


@dataclass(frozen=True)
class TruncationEnvelope:
    tail: ParametricTail
    beta: float
    flags: tuple[str, ...]


def truncation_envelope(tail: ParametricTail) -> TruncationEnvelope:
    """Closed-form bound W[T](x) ≤ (1 + 2β·Y)·exp(−(x/(K·δ))^{2q/(q+2)}) for a parametric T."""
    constants = aux_constants(tail.q, tail.rho)
    flags = list(constants.flags)
    beta = constants.beta
    if not constants.beta_bounded:
        beta = constants.beta_closed_small_q
        flags.append("beta replaced by its closed form for q <= 2")
    q = tail.q
    envelope = ParametricTail(
        Y=1.0 + 2.0 * beta * tail.Y,
        K=tail.K * constants.delta,
        q=2.0 * q / (q + 2.0),
        rho=2.0 * tail.rho / (q + 2.0),
    )
    return TruncationEnvelope(tail=envelope, beta=beta, flags=tuple(flags))
