"""Shared numerical kernels: grid constants and a vectorized golden-section search."""

from __future__ import annotations

from typing import Callable

import numpy as np

GRID_POINTS = 512
TAIL_FLOOR = 1e-18
HORIZON_CAP = 1e6
GOLDEN_TOL = 1e-6
COARSE_POINTS = 256
MULTISTARTS = 3

INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0
INV_PHI_SQ = (3.0 - np.sqrt(5.0)) / 2.0

VectorObjective = Callable[[np.ndarray], np.ndarray]


def golden_minimize(
    objective: VectorObjective,
    lower: np.ndarray,
    upper: np.ndarray,
    tol: float = GOLDEN_TOL,
) -> tuple[np.ndarray, np.ndarray]:
    """Minimize many independent one-dimensional problems at once.

    `objective` receives an array shaped like `lower` holding one abscissa per problem and
    returns the objective values elementwise. The bracket endpoints are evaluated too, so a
    minimum sitting on the boundary is never lost.
    """
    a = np.array(lower, dtype=float, copy=True)
    b = np.array(upper, dtype=float, copy=True)
    width = float(np.max(b - a)) if a.size else 0.0

    best_x = a.copy()
    best_f = objective(a)
    f_upper = objective(b)
    take = f_upper < best_f
    best_x[take] = b[take]
    best_f = np.where(take, f_upper, best_f)

    if width <= tol:
        return best_x, best_f

    iterations = int(np.ceil(np.log(tol / width) / np.log(INV_PHI)))
    dist = b - a
    c = a + INV_PHI_SQ * dist
    d = a + INV_PHI * dist
    yc = objective(c)
    yd = objective(d)

    for _ in range(max(iterations, 1)):
        left = yc < yd
        # left: keep [a, d]; otherwise keep [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        dist = b - a
        new_c = a + INV_PHI_SQ * dist
        new_d = a + INV_PHI * dist
        probe = np.where(left, new_c, new_d)
        y_probe = objective(probe)
        yd_next = np.where(left, yc, y_probe)
        yc_next = np.where(left, y_probe, yd)
        c, d = np.where(left, new_c, d), np.where(left, c, new_d)
        yc, yd = yc_next, yd_next

    for x, y in ((c, yc), (d, yd)):
        take = y < best_f
        best_x = np.where(take, x, best_x)
        best_f = np.where(take, y, best_f)
    return best_x, best_f


def multistart_minimize(
    coarse_values: np.ndarray,
    coarse_grid: np.ndarray,
    objective: Callable[[np.ndarray, np.ndarray], np.ndarray],
    *,
    starts: int = MULTISTARTS,
    tol: float = GOLDEN_TOL,
) -> tuple[np.ndarray, np.ndarray]:
    """Refine a row-wise coarse scan with golden-section searches around its best local minima.

    `coarse_values` has shape (rows, points); `coarse_grid` is either shared (points,) or per row
    (rows, points) and must be sorted along the last axis. `objective(u, rows)` evaluates one
    abscissa per listed row. Returns (argmin, minimum) per row, never worse than the coarse scan.
    """
    values = np.asarray(coarse_values, dtype=float)
    rows, points = values.shape
    grid = np.broadcast_to(np.asarray(coarse_grid, dtype=float), (rows, points))
    row_index = np.arange(rows)

    coarse_best = np.argmin(values, axis=1)
    best_f = values[row_index, coarse_best]
    best_u = grid[row_index, coarse_best]
    if points < 3:
        return best_u, best_f

    padded = np.pad(values, ((0, 0), (1, 1)), constant_values=np.inf)
    local = (values <= padded[:, :-2]) & (values <= padded[:, 2:])
    ranked = np.where(local, values, np.inf)
    order = np.argsort(ranked, axis=1, kind="stable")[:, :starts]

    for column in range(order.shape[1]):
        k = order[:, column]
        usable = np.isfinite(ranked[row_index, k])
        if not usable.any():
            continue
        k = np.where(usable, k, coarse_best)
        lower = grid[row_index, np.maximum(k - 1, 0)]
        upper = grid[row_index, np.minimum(k + 1, points - 1)]
        u, f = golden_minimize(lambda probe: objective(probe, row_index), lower, upper, tol=tol)
        take = usable & (f < best_f)
        best_u = np.where(take, u, best_u)
        best_f = np.where(take, f, best_f)
    return best_u, best_f


def log_abscissas(scale: float, horizon: float, points: int = GRID_POINTS) -> np.ndarray:
    """Nodes uniform in log(1 + x/scale) on [0, horizon], starting exactly at 0."""
    top = np.log1p(horizon / scale)
    return scale * np.expm1(np.linspace(0.0, top, points))


def find_horizon(
    values_at: VectorObjective,
    scale: float,
    *,
    floor: float = TAIL_FLOOR,
    cap: float = HORIZON_CAP,
) -> float:
    """Smallest doubling of `scale` where the function drops to `floor`, capped at cap·scale."""
    x = scale
    limit = cap * scale
    while x < limit:
        if float(values_at(np.array([x]))[0]) <= floor:
            return x
        x *= 2.0
    return limit


def monotone_clip(values: np.ndarray) -> np.ndarray:
    """Clip to [0, 1], pin the first value to 1 and enforce a nonincreasing sequence."""
    clipped = np.clip(np.nan_to_num(np.asarray(values, dtype=float), nan=1.0), 0.0, 1.0)
    clipped[0] = 1.0
    return np.minimum.accumulate(clipped)
