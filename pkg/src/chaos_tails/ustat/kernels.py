"""Symmetric kernels on a finite sample space and their Hoeffding decomposition."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, permutations
import math
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike

from chaos_tails.domain.errors import AllProjectionsZero, DimensionMismatch, InvalidParameter
from chaos_tails.domain.models import KernelSpec

ZERO_TOL = 1e-10
PROBABILITY_TOL = 1e-12
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class FiniteKernel:
    """Φ tabulated on support^d; axis j indexes the j-th argument."""

    support: np.ndarray
    probabilities: np.ndarray
    phi: np.ndarray

    def __post_init__(self) -> None:
        support = np.asarray(self.support, dtype=float)
        probs = np.asarray(self.probabilities, dtype=float)
        phi = np.asarray(self.phi, dtype=float)
        if support.ndim != 1 or support.shape != probs.shape or support.size == 0:
            raise InvalidParameter("support atoms and probabilities must be equal-length 1-D sequences")
        if np.any(probs <= 0) or abs(float(probs.sum()) - 1.0) > PROBABILITY_TOL:
            raise InvalidParameter("atom probabilities must be positive and sum to 1")
        if phi.ndim < 1 or any(size != support.size for size in phi.shape):
            raise DimensionMismatch(f"kernel table must have shape ({support.size},)*d, got {phi.shape}")
        for order in permutations(range(phi.ndim)):
            if np.max(np.abs(phi - np.transpose(phi, order)), initial=0.0) > SYMMETRY_TOL * max(1.0, float(np.abs(phi).max())):
                raise InvalidParameter("kernel must be symmetric under argument permutations")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probabilities", probs)
        object.__setattr__(self, "phi", phi)

    @property
    def d(self) -> int:
        return self.phi.ndim

    @property
    def size(self) -> int:
        return self.support.size

    @classmethod
    def from_function(cls, support: Sequence[float], probabilities: Sequence[float], d: int, fn) -> FiniteKernel:
        """Tabulate a vectorized fn(x_1, …, x_d) on the support grid."""
        atoms = np.asarray(support, dtype=float)
        grids = np.meshgrid(*([atoms] * d), indexing="ij")
        return cls(atoms, np.asarray(probabilities, dtype=float), np.asarray(fn(*grids), dtype=float))

    @classmethod
    def from_spec(cls, spec: KernelSpec) -> FiniteKernel:
        phi = np.asarray(spec.phi, dtype=float)
        if phi.ndim != spec.d:
            raise DimensionMismatch(f"kernel table has {phi.ndim} axes but d = {spec.d}")
        return cls(
            np.array([atom.x for atom in spec.support]),
            np.array([atom.p for atom in spec.support]),
            phi,
        )

    def with_table(self, phi: np.ndarray) -> FiniteKernel:
        return FiniteKernel(self.support, self.probabilities, phi)

    def weights(self) -> np.ndarray:
        """Product measure μ^{⊗d} on the table."""
        out = np.ones(())
        for _ in range(self.d):
            out = np.multiply.outer(out, self.probabilities)
        return out

    def mean(self) -> float:
        return float(np.sum(self.weights() * self.phi))

    def variance(self) -> float:
        w = self.weights()
        m = float(np.sum(w * self.phi))
        return float(np.sum(w * (self.phi - m) ** 2))

    def norm(self, p: float) -> float:
        """|Φ(ξ_1, …, ξ_d)|_p under the product measure."""
        return float(np.sum(self.weights() * np.abs(self.phi) ** p) ** (1.0 / p))

    def centered(self) -> FiniteKernel:
        return self.with_table(self.phi - self.mean())

    def is_zero(self, tol: float = ZERO_TOL) -> bool:
        return bool(np.max(np.abs(self.phi)) <= tol)


def conditional_expectation(kernel: FiniteKernel, j: int) -> np.ndarray:
    """h_j(x_1, …, x_j) = E Φ(x_1, …, x_j, ξ_{j+1}, …, ξ_d); a 0-d array at j = 0."""
    if not 0 <= j <= kernel.d:
        raise InvalidParameter(f"conditioning order must lie in [0, {kernel.d}], got {j}")
    table = kernel.phi
    for _ in range(kernel.d - j):
        table = table @ kernel.probabilities
    return np.asarray(table)


def hoeffding_project(kernel: FiniteKernel, k: int) -> FiniteKernel:
    """g_k(x_1..x_k) = Σ_{A ⊆ [k]} (−1)^{k−|A|} h_{|A|}(x_A)."""
    if not 1 <= k <= kernel.d:
        raise InvalidParameter(f"projection order must lie in [1, {kernel.d}], got {k}")
    S = kernel.size
    h = [conditional_expectation(kernel, j) for j in range(k + 1)]
    g = np.zeros((S,) * k)
    for a in range(k + 1):
        sign = -1.0 if (k - a) % 2 else 1.0
        for axes in combinations(range(k), a):
            shape = [S if axis in axes else 1 for axis in range(k)]
            g = g + sign * h[a].reshape(shape)
    return kernel.with_table(g)


def detect_rank(kernel: FiniteKernel) -> int:
    """Smallest k whose projection g_k is not identically zero."""
    centered = kernel.centered()
    for k in range(1, kernel.d + 1):
        if not hoeffding_project(centered, k).is_zero():
            return k
    raise AllProjectionsZero("every Hoeffding projection vanishes; the kernel is constant")


def strip_linear_part(kernel: FiniteKernel) -> FiniteKernel:
    """Φ⁰ = (Φ − EΦ) − Σ_i g_1(x_i)."""
    centered = kernel.centered()
    g1 = hoeffding_project(centered, 1).phi
    S, d = kernel.size, kernel.d
    table = centered.phi.copy()
    for axis in range(d):
        shape = [S if i == axis else 1 for i in range(d)]
        table = table - g1.reshape(shape)
    return kernel.with_table(table)


@dataclass(frozen=True)
class HoeffdingDecomposition:
    theta: float
    rank: int
    projections: dict[int, FiniteKernel]
    weights: dict[int, int]

    def reassemble(self, sample_indices: np.ndarray) -> float:
        total = self.theta
        for k, projection in self.projections.items():
            total += self.weights[k] * _mean_over_subsets(projection.phi, sample_indices)
        return total


def hoeffding_decomposition(kernel: FiniteKernel) -> HoeffdingDecomposition:
    theta = kernel.mean()
    centered = kernel.centered()
    projections = {k: hoeffding_project(centered, k) for k in range(1, kernel.d + 1)}
    nonzero = [k for k, g in projections.items() if not g.is_zero()]
    if not nonzero:
        raise AllProjectionsZero("every Hoeffding projection vanishes; the kernel is constant")
    rank = nonzero[0]
    kept = {k: projections[k] for k in range(rank, kernel.d + 1)}
    return HoeffdingDecomposition(
        theta=theta,
        rank=rank,
        projections=kept,
        weights={k: math.comb(kernel.d, k) for k in kept},
    )


def sample_indices(kernel: FiniteKernel, sample: ArrayLike) -> np.ndarray:
    """Map sample values onto support positions."""
    values = np.asarray(sample, dtype=float).ravel()
    gaps = np.abs(values[:, None] - kernel.support[None, :])
    index = np.argmin(gaps, axis=1)
    scale = max(1.0, float(np.abs(kernel.support).max()))
    if np.any(gaps[np.arange(values.size), index] > 1e-12 * scale):
        raise InvalidParameter("sample contains values outside the kernel support")
    return index


def _mean_over_subsets(table: np.ndarray, indices: np.ndarray) -> float:
    k = table.ndim
    n = indices.size
    if n < k:
        raise InvalidParameter(f"sample size {n} is smaller than the kernel dimension {k}")
    tuples = np.array(list(combinations(range(n), k)), dtype=int)
    picked = indices[tuples]
    return float(table[tuple(picked.T)].sum() / math.comb(n, k))


def ustat_evaluate(kernel: FiniteKernel, sample: ArrayLike) -> float:
    """U(n) = Σ_{i_1 < … < i_d} Φ(ξ_{i_1}, …, ξ_{i_d}) / C(n, d)."""
    return _mean_over_subsets(kernel.phi, sample_indices(kernel, sample))


def ustat_variance(kernel: FiniteKernel, n: int) -> float:
    """Exact D U(n) = Σ_k C(d,k)²·E g_k² / C(n,k)."""
    if n < kernel.d:
        raise InvalidParameter(f"sample size {n} is smaller than the kernel dimension {kernel.d}")
    centered = kernel.centered()
    total = 0.0
    for k in range(1, kernel.d + 1):
        g = hoeffding_project(centered, k)
        second = float(np.sum(g.weights() * g.phi**2))
        total += math.comb(kernel.d, k) ** 2 * second / math.comb(n, k)
    return total
