"""Tail function representations: closed-form parametric tails and log-linear grids."""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike

from chaos_tails.domain.errors import InvalidTail
from chaos_tails.domain.interfaces import TailFunction
from chaos_tails.domain.models import GridTailSpec, ParametricTailSpec, TailSpec
from chaos_tails.tails.numerics import (
    GRID_POINTS,
    HORIZON_CAP,
    TAIL_FLOOR,
    find_horizon,
    log_abscissas,
    monotone_clip,
)

_STEP_EPS = 1e-9


def log_term_offset(q: float, rho: float) -> float:
    """F(q, r): 1 when the log power is nonpositive, e^q otherwise."""
    return 1.0 if rho <= 0 else math.exp(q)


@dataclass(frozen=True, eq=False)
class ParametricTail(TailFunction):
    """T(x) = min(1, Y·exp(−(x/K)^q · log(F + x/K)^rho))."""

    Y: float = 1.0
    K: float = 1.0
    q: float = 1.0
    rho: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.Y) and self.Y >= 1.0):
            raise InvalidTail(f"prefactor Y must be >= 1, got {self.Y}")
        if not (math.isfinite(self.K) and self.K > 0):
            raise InvalidTail(f"scale K must be > 0, got {self.K}")
        if not (math.isfinite(self.q) and self.q > 0):
            raise InvalidTail(f"exponent q must be > 0, got {self.q}")
        if not math.isfinite(self.rho) or self.rho < -self.q:
            raise InvalidTail(f"log power rho must be >= -q for a monotone tail, got {self.rho}")

    @property
    def scale(self) -> float:
        return self.K

    def exponent_term(self, x: ArrayLike) -> np.ndarray:
        z = np.maximum(np.asarray(x, dtype=float), 0.0) / self.K
        if self.rho == 0:
            return z**self.q
        offset = log_term_offset(self.q, self.rho)
        with np.errstate(divide="ignore", invalid="ignore"):
            core = z**self.q * np.log(offset + z) ** self.rho
        return np.where(z > 0, core, 0.0)

    def evaluate(self, x: ArrayLike) -> np.ndarray:
        xs = np.asarray(x, dtype=float)
        with np.errstate(over="ignore"):
            values = np.minimum(1.0, self.Y * np.exp(-self.exponent_term(xs)))
        return np.where(xs <= 0, 1.0, values)

    def clip_point(self) -> float:
        """Largest x where the prefactor keeps the bound at 1."""
        if self.Y == 1.0:
            return 0.0
        target = math.log(self.Y)
        if self.rho == 0:
            return self.K * target ** (1.0 / self.q)
        lo, hi = 0.0, self.K
        while float(self.exponent_term(hi)) < target:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if float(self.exponent_term(mid)) < target:
                lo = mid
            else:
                hi = mid
        return hi

    def to_spec(self) -> TailSpec:
        return ParametricTailSpec(Y=self.Y, K=self.K, q=self.q, rho=self.rho)


@dataclass(frozen=True, eq=False)
class GridTail(TailFunction):
    """Log-linear interpolation of log t against log(1 + x).

    A segment whose right node is 0 holds the left value (right-continuous step), so indicator
    and finite-support tails are represented exactly. Right of the last node the last positive
    slope is extended; a last value of 0 stays 0.
    """

    x: np.ndarray
    t: np.ndarray
    characteristic_scale: float | None = None
    _u: np.ndarray = field(init=False, repr=False)
    _log_t: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        xs = np.asarray(self.x, dtype=float)
        ts = np.asarray(self.t, dtype=float)
        if xs.ndim != 1 or xs.shape != ts.shape or xs.size == 0:
            raise InvalidTail("grid abscissas and values must be equal-length 1-D arrays")
        if xs[0] != 0.0:
            raise InvalidTail("grid must start at x = 0")
        if np.any(np.diff(xs) <= 0):
            raise InvalidTail("grid abscissas must be strictly increasing")
        if ts[0] != 1.0 or np.any(ts < 0) or np.any(ts > 1):
            raise InvalidTail("grid values must start at 1 and lie in [0, 1]")
        if np.any(np.diff(ts) > 0):
            raise InvalidTail("grid values must be nonincreasing")
        object.__setattr__(self, "x", xs)
        object.__setattr__(self, "t", ts)
        object.__setattr__(self, "_u", np.log1p(xs))
        with np.errstate(divide="ignore"):
            object.__setattr__(self, "_log_t", np.log(ts))

    @classmethod
    def from_values(cls, x: ArrayLike, t: ArrayLike, scale: float | None = None) -> GridTail:
        """Build from raw operator output: clipped, pinned to 1 at 0 and made monotone."""
        return cls(np.asarray(x, dtype=float), monotone_clip(np.asarray(t, dtype=float)), scale)

    @property
    def scale(self) -> float:
        if self.characteristic_scale:
            return float(self.characteristic_scale)
        below = np.nonzero(self.t <= math.exp(-1.0))[0]
        if below.size:
            return float(max(self.x[below[0]], 1e-300))
        return float(self.x[-1]) if self.x.size > 1 else 1.0

    def tail_slope(self) -> float | None:
        """Slope of log t against log(1 + x) beyond the last node; None when the tail is 0 there."""
        if self.t[-1] == 0.0:
            return None
        if self.x.size < 2:
            return 0.0
        return float((self._log_t[-1] - self._log_t[-2]) / (self._u[-1] - self._u[-2]))

    def evaluate(self, x: ArrayLike) -> np.ndarray:
        xs = np.asarray(x, dtype=float)
        flat = np.atleast_1d(xs).ravel()
        out = np.ones_like(flat)
        u = np.log1p(np.maximum(flat, 0.0))
        last = self.x.size - 1
        j = np.clip(np.searchsorted(self.x, flat, side="right") - 1, 0, last)

        inner = (flat > 0) & (j < last)
        if inner.any():
            jj = j[inner]
            left_t = self.t[jj]
            right_t = self.t[jj + 1]
            span = self._u[jj + 1] - self._u[jj]
            with np.errstate(invalid="ignore"):
                weight = (u[inner] - self._u[jj]) / span
                interp = np.exp(self._log_t[jj] + weight * (self._log_t[jj + 1] - self._log_t[jj]))
            out[inner] = np.where(right_t == 0.0, left_t, np.where(left_t == 0.0, 0.0, interp))

        beyond = (flat > 0) & (j == last)
        if beyond.any():
            slope = self.tail_slope()
            if slope is None:
                out[beyond] = 0.0
            else:
                out[beyond] = np.exp(self._log_t[-1] + slope * (u[beyond] - self._u[-1]))
        out = np.clip(out, 0.0, 1.0)
        return out.reshape(xs.shape) if xs.ndim else out[0:1].reshape(())

    def to_spec(self) -> TailSpec:
        return GridTailSpec(x=self.x.tolist(), t=self.t.tolist())


def eval_tail(tail: TailFunction, x: float) -> float:
    if x < 0:
        raise InvalidTail(f"tail functions are evaluated at x >= 0, got {x}")
    return float(tail.evaluate(np.array([x]))[0])


def indicator_tail(K: float) -> GridTail:
    """Tail of a variable bounded by K: 1 below K, 0 from K on."""
    if K <= 0:
        raise InvalidTail(f"indicator level must be > 0, got {K}")
    return GridTail(np.array([0.0, K]), np.array([1.0, 0.0]), characteristic_scale=K)


def step_tail(values: Sequence[float] | np.ndarray, probabilities: Sequence[float] | np.ndarray) -> GridTail:
    """Exact tail max(P(v > x), P(v < −x)) of a finite-support variable as a step grid."""
    vals = np.asarray(values, dtype=float)
    probs = np.asarray(probabilities, dtype=float)

    def exact(x: float) -> float:
        return float(max(probs[vals > x].sum(), probs[vals < -x].sum()))

    levels: list[float] = []
    for level in np.unique(np.abs(vals[probs > 0])):
        if level <= 0:
            continue
        # nearly equal levels merge onto the larger one
        if levels and level - levels[-1] <= 1e-8 * level:
            levels[-1] = float(level)
        else:
            levels.append(float(level))
    if not levels:
        return indicator_tail(1e-12)

    nodes = [0.0, _STEP_EPS * levels[0]]
    heights = [1.0, exact(0.0)]
    previous = exact(0.0)
    for level in levels:
        nodes.extend((level * (1.0 - _STEP_EPS), level))
        heights.extend((previous, exact(level)))
        previous = exact(level)
    return GridTail(
        np.asarray(nodes),
        np.minimum.accumulate(np.clip(heights, 0.0, 1.0)),
        characteristic_scale=levels[-1],
    )


def grid_from_function(
    values_at: Callable[[np.ndarray], np.ndarray],
    scale: float,
    *,
    points: int = GRID_POINTS,
    floor: float = TAIL_FLOOR,
    cap: float = HORIZON_CAP,
) -> GridTail:
    horizon = find_horizon(values_at, scale, floor=floor, cap=cap)
    nodes = log_abscissas(scale, horizon, points)
    return GridTail.from_values(nodes, values_at(nodes), scale=scale)


def to_grid(tail: TailFunction, *, points: int = GRID_POINTS) -> GridTail:
    if isinstance(tail, GridTail):
        return tail
    return grid_from_function(tail.evaluate, tail.scale, points=points)


def tail_minimum(first: TailFunction, second: TailFunction) -> GridTail:
    """Pointwise minimum on the union of both abscissa sets."""
    a = to_grid(first)
    b = to_grid(second)
    nodes = np.union1d(a.x, b.x)
    values = np.minimum(a.evaluate(nodes), b.evaluate(nodes))
    return GridTail.from_values(nodes, values, scale=min(a.scale, b.scale))


def tail_mixture(tails: Sequence[TailFunction], weights: Sequence[float] | np.ndarray) -> GridTail:
    """Weighted average Σ w_k T_k on the union of abscissas; weights must sum to 1."""
    w = np.asarray(weights, dtype=float)
    if w.size != len(tails) or w.size == 0 or np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-9:
        raise InvalidTail("mixture weights must be nonnegative, one per tail, and sum to 1")
    grids = [to_grid(tail) for tail in tails]
    nodes = grids[0].x
    for grid in grids[1:]:
        nodes = np.union1d(nodes, grid.x)
    values = np.zeros_like(nodes)
    for weight, grid in zip(w, grids):
        values = values + weight * grid.evaluate(nodes)
    return GridTail.from_values(nodes, values, scale=float(sum(wk * g.scale for wk, g in zip(w, grids))))


_FIT_SLACK = 1e-9
_LOG_SCALE_RANGE = (-40.0, 40.0)


def fit_parametric_envelope(
    grid: GridTail, q: float, *, rho: float = 0.0, scale: float = 1.0
) -> tuple[ParametricTail, float]:
    """Fit min(1, Y·exp(−(x/(C·scale))^q · log(F + x/(C·scale))^rho)) above a grid tail.

    C is the smallest scale whose exponent term stays below −log T at every node with
    0 < T ≤ e^{-1}. Y then lifts the envelope over each node value up to the next node, so the
    envelope dominates the grid on [0, x_last] and not only at the nodes. Returns the tail and C.
    """
    unit = ParametricTail(Y=1.0, K=1.0, q=q, rho=rho)
    xs, ts = grid.x, grid.t
    mask = (xs > 0) & (ts > 0) & (ts <= math.exp(-1.0))
    C = 1.0
    if mask.any():
        z = xs[mask] / scale
        need = -np.log(ts[mask])
        if rho == 0:
            C = float(np.max(z / need ** (1.0 / q)))
        else:
            def fits(log_c: float) -> bool:
                return bool(np.all(unit.exponent_term(z / math.exp(log_c)) <= need))

            lo, hi = _LOG_SCALE_RANGE
            if not fits(hi):
                raise InvalidTail(f"no scale up to e^{hi:g} fits the grid with q={q}, rho={rho}")
            if fits(lo):
                hi = lo
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if fits(mid):
                    hi = mid
                else:
                    lo = mid
            C = math.exp(hi)

    width = C * scale
    envelope = ParametricTail(Y=1.0, K=width, q=q, rho=rho).exponent_term(xs)
    next_node = np.append(envelope[1:], envelope[-1])
    with np.errstate(divide="ignore"):
        log_excess = np.log(ts) + next_node
    log_y = max(0.0, float(np.max(log_excess)))
    if log_y > 700.0:
        raise InvalidTail(f"envelope prefactor overflows (log Y = {log_y:.6g})")
    Y = math.exp(log_y) * (1.0 + _FIT_SLACK) if log_y > 0 else 1.0
    return ParametricTail(Y=Y, K=width, q=q, rho=rho), C


def tail_from_spec(spec: TailSpec) -> TailFunction:
    if isinstance(spec, ParametricTailSpec):
        return ParametricTail(Y=spec.Y, K=spec.K, q=spec.q, rho=spec.rho)
    return GridTail(np.asarray(spec.x, dtype=float), np.asarray(spec.t, dtype=float))
