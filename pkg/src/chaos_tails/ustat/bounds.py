"""Moment and tail bounds for U-statistics with finite-support kernels."""

from __future__ import annotations

import logging
import math

import numpy as np

from chaos_tails.domain.errors import InvalidParameter
from chaos_tails.exponents import ustat_scale_t
from chaos_tails.tails.cramer import CramerProfile
from chaos_tails.tails.functions import (
    GridTail,
    ParametricTail,
    fit_parametric_envelope,
    indicator_tail,
    step_tail,
    tail_mixture,
)
from chaos_tails.tails.operators import cramer_refine_Wbar, truncation_operator_W
from chaos_tails.telemetry import log_event
from chaos_tails.ustat.kernels import FiniteKernel, hoeffding_decomposition, strip_linear_part

_logger = logging.getLogger(__name__)

DEFAULT_CONSTANT = math.sqrt(2.0)


def ustat_moment_bound(kernel: FiniteKernel, p: float, *, constant: float = DEFAULT_CONSTANT) -> float:
    """C^d·p^d·|Φ⁰|_p / log p for the variance-normalized U-statistic, Φ⁰ the kernel without its linear part."""
    if not p >= 2:
        raise InvalidParameter(f"moment order p must be >= 2, got {p}")
    if constant <= 0:
        raise InvalidParameter(f"constant C must be > 0, got {constant}")
    d = kernel.d
    return constant**d * p**d * strip_linear_part(kernel).norm(p) / math.log(p)


def ustat_tail_parametric(kernel: FiniteKernel, q: float, r: float, Kscale: float) -> ParametricTail:
    """min(1, Y·exp(−(x/K)^{q/(qd+1)}·log(F + x/K)^{−(r−1)q/(qd+1)})) for a kernel with tail envelope (K, q, r).

    K = C·Kscale and Y are fitted above the slice recursion of the kernel.
    """
    if q <= 0 or Kscale <= 0:
        raise InvalidParameter("kernel tail envelope needs q > 0 and K > 0")
    d = kernel.d
    exponent = q / (q * d + 1.0)
    log_power = -(r - 1.0) * q / (q * d + 1.0)
    if log_power < -exponent:
        raise InvalidParameter(
            f"log power {log_power:.4g} below -{exponent:.4g} gives a non-monotone envelope; need r <= 2"
        )
    envelope, C = fit_parametric_envelope(ustat_tail_recursion(kernel), exponent, rho=log_power, scale=Kscale)
    log_event(
        _logger, "pipeline_constant_measured", theorem=9, d=d, exponent=exponent, constant=C, prefactor=envelope.Y
    )
    return envelope


class _SliceRecursion:
    """Tail bounds L(g, k) built by slicing the last argument; identical slices are computed once."""

    def __init__(self, kernel: FiniteKernel) -> None:
        self._probabilities = kernel.probabilities
        self._scale = max(float(np.abs(kernel.phi).max()), 1e-300)
        self._cache: dict[tuple[int, bytes], GridTail] = {}
        self.operations = 0

    def tail(self, table: np.ndarray) -> GridTail:
        key = (table.ndim, np.round(table / self._scale, 12).tobytes())
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        if table.ndim == 1:
            result = self._base(table)
        else:
            slices = [self.tail(table[..., z]) for z in range(table.shape[-1])]
            result = truncation_operator_W(tail_mixture(slices, self._probabilities))
            self.operations += 1
        self._cache[key] = result
        return result

    def _base(self, values: np.ndarray) -> GridTail:
        if np.max(np.abs(values)) <= 1e-12 * self._scale:
            return indicator_tail(1e-12 * self._scale)
        exact = step_tail(values, self._probabilities)
        profile = CramerProfile.finite(values, self._probabilities)
        self.operations += 1
        return cramer_refine_Wbar(exact, profile)


def ustat_tail_recursion(kernel: FiniteKernel) -> GridTail:
    """Σ_{k=r}^d L(g_k, k)(t(d,k,r)·x), each L built by slice mixing and truncation, W̄ at depth 1."""
    decomposition = hoeffding_decomposition(kernel)
    recursion = _SliceRecursion(kernel)
    d, r = kernel.d, decomposition.rank
    terms: list[tuple[float, GridTail]] = []
    for k, projection in decomposition.projections.items():
        terms.append((ustat_scale_t(d, k, r), recursion.tail(projection.phi)))

    nodes = np.unique(np.concatenate([grid.x / t for t, grid in terms]))
    values = np.zeros_like(nodes)
    for t, grid in terms:
        values = values + grid.evaluate(t * nodes)
    log_event(_logger, "bound_constructed", theorem=10, d=d, rank=r, operations=recursion.operations)
    return GridTail.from_values(nodes, np.minimum(1.0, values), scale=min(grid.scale / t for t, grid in terms))
