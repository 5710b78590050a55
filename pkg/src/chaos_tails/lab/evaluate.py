"""Q_d and R_2 evaluated on sampled batches."""

from __future__ import annotations

from typing import Literal

import numpy as np
from numpy.typing import ArrayLike

from chaos_tails.domain.errors import DimensionMismatch, InvalidParameter
from chaos_tails.domain.interfaces import CoefficientField
from chaos_tails.lab.families import SampleBatch
from chaos_tails.series.fields import SeparableField

CHUNK_ELEMENTS = 8_000_000

Method = Literal["auto", "enumerate", "separable"]


def _batch_values(batch: SampleBatch | np.ndarray) -> np.ndarray:
    values = batch.values if isinstance(batch, SampleBatch) else np.asarray(batch, dtype=float)
    if values.ndim != 3:
        raise DimensionMismatch(f"samples must be shaped (replications, n, d), got {values.shape}")
    return values


def evaluate_Qd_enumerate(field: CoefficientField, batch: SampleBatch | np.ndarray) -> np.ndarray:
    """Σ_I b(I)·Π_m ξ(i_m, m) over the listed tuples, chunked over tuples."""
    xi = _batch_values(batch)
    indices, coefficients = field.dense()
    if xi.shape[2] != field.d:
        raise DimensionMismatch(f"batch has d = {xi.shape[2]}, field has d = {field.d}")
    if indices.size and indices.max() >= xi.shape[1]:
        raise DimensionMismatch(f"field needs n >= {indices.max() + 1}, batch has n = {xi.shape[1]}")
    replications = xi.shape[0]
    out = np.zeros(replications)
    step = max(1, CHUNK_ELEMENTS // max(replications * field.d, 1))
    coordinates = np.arange(field.d)
    for start in range(0, coefficients.size, step):
        chunk = indices[start : start + step]
        products = np.prod(xi[:, chunk, coordinates], axis=2)
        out += products @ coefficients[start : start + step]
    return out


def evaluate_Qd_separable(field: SeparableField, batch: SampleBatch | np.ndarray) -> np.ndarray:
    """Prefix recursion S_m(i) = S_m(i−1) + S_{m−1}(i−1)·f_m(i)·ξ(i, m), cost n·d per replication."""
    xi = _batch_values(batch)
    d, n = field.d, field.n
    if xi.shape[2] != d:
        raise DimensionMismatch(f"batch has d = {xi.shape[2]}, field has d = {d}")
    if xi.shape[1] < n:
        raise DimensionMismatch(f"field needs n >= {n}, batch has n = {xi.shape[1]}")
    partial = np.zeros((d + 1, xi.shape[0]))
    partial[0] = 1.0
    for i in range(n):
        for m in range(d, 0, -1):
            partial[m] += partial[m - 1] * field.factors[m - 1, i] * xi[:, i, m - 1]
    return partial[d].copy()


def evaluate_Qd(field: CoefficientField, batch: SampleBatch | np.ndarray, *, method: Method = "auto") -> np.ndarray:
    if method == "separable" or (method == "auto" and isinstance(field, SeparableField)):
        if not isinstance(field, SeparableField):
            raise InvalidParameter("separable evaluation needs a SeparableField")
        return evaluate_Qd_separable(field, batch)
    return evaluate_Qd_enumerate(field, batch)


def evaluate_R2(
    off_diagonal: CoefficientField,
    diagonal: ArrayLike,
    batch: SampleBatch,
    *,
    coordinate: int = 1,
) -> np.ndarray:
    """Σ_{i<j} b(i,j)ξ(i)ξ(j) + Σ_i b(i,i)(ξ²(i) − E ξ²(i)) on one coordinate sequence."""
    if off_diagonal.d != 2:
        raise DimensionMismatch(f"off-diagonal coefficients need d = 2, got d = {off_diagonal.d}")
    if not 1 <= coordinate <= batch.d:
        raise InvalidParameter(f"coordinate must lie in [1, {batch.d}], got {coordinate}")
    xi = batch.values[:, :, coordinate - 1]
    diagonal = np.asarray(diagonal, dtype=float).ravel()
    if diagonal.size > batch.n:
        raise DimensionMismatch(f"{diagonal.size} diagonal coefficients for n = {batch.n}")
    paired = np.repeat(xi[:, :, None], 2, axis=2)
    off = evaluate_Qd_enumerate(off_diagonal, paired)
    k = diagonal.size
    centered = xi[:, :k] ** 2 - batch.second_moment[:k, coordinate - 1]
    return off + centered @ diagonal
