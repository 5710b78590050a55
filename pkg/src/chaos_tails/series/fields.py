"""Coefficient fields b(I): dense tables, separable products and power laws |I|^{−α}."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import chain, combinations
import math
from typing import Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import gammaln

from chaos_tails.domain.errors import DimensionMismatch, InvalidParameter, NonSummable, TooLarge
from chaos_tails.domain.interfaces import CoefficientField
from chaos_tails.domain.models import (
    DenseFieldSpec,
    FieldSpec,
    PowerFieldSpec,
    SeparableFieldSpec,
    UniformFieldSpec,
)

DENSE_CAP = 2_000_000
LATTICE_TARGET = 1_000_000


def index_tuples(n: int, d: int, *, cap: int = DENSE_CAP) -> np.ndarray:
    """All zero-based strictly increasing d-tuples from range(n), shaped (C(n, d), d)."""
    if n < 1 or d < 1:
        raise InvalidParameter(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    count = math.comb(n, d)
    if count > cap:
        raise TooLarge(f"C({n}, {d}) = {count} index tuples exceeds the cap {cap}")
    flat = np.fromiter(chain.from_iterable(combinations(range(n), d)), dtype=np.int64, count=count * d)
    return flat.reshape(count, d)


def _sorted_magnitudes(values: np.ndarray) -> np.ndarray:
    magnitudes = np.abs(values[values != 0])
    return np.sort(magnitudes)


@dataclass(frozen=True, eq=False)
class DenseField(CoefficientField):
    d: int
    n: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        indices = np.asarray(self.indices, dtype=np.int64).reshape(-1, self.d)
        values = np.asarray(self.values, dtype=float).ravel()
        if indices.shape[0] != values.size:
            raise DimensionMismatch(f"{indices.shape[0]} index tuples but {values.size} coefficients")
        if not np.all(np.isfinite(values)):
            raise InvalidParameter("coefficients must be finite")
        if indices.size and (indices.min() < 0 or indices.max() >= self.n):
            raise InvalidParameter(f"indices must lie in [1, {self.n}]")
        if self.d > 1 and np.any(np.diff(indices, axis=1) <= 0):
            raise InvalidParameter("index tuples must be strictly increasing")
        if indices.shape[0] > 1 and np.unique(indices, axis=0).shape[0] != indices.shape[0]:
            raise InvalidParameter("index tuples must be distinct")
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_entries(cls, d: int, n: int, entries: Mapping[tuple[int, ...], float]) -> DenseField:
        """Build from 1-based index tuples."""
        keys = list(entries)
        if any(len(key) != d for key in keys):
            raise DimensionMismatch(f"every index tuple must have length {d}")
        indices = np.array(keys, dtype=np.int64).reshape(-1, d) - 1
        return cls(d=d, n=n, indices=indices, values=np.array([entries[key] for key in keys], dtype=float))

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> DenseField:
        """d = 1 field b(i) = values[i − 1]."""
        array = np.asarray(values, dtype=float)
        return cls(d=1, n=array.size, indices=np.arange(array.size)[:, None], values=array)

    def magnitudes(self) -> np.ndarray:
        return _sorted_magnitudes(self.values)

    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        return self.indices, self.values


@dataclass(frozen=True, eq=False)
class SeparableField(CoefficientField):
    """b(I) = Π_m f_m(i_m); row m of `factors` holds f_m over 1..n."""

    factors: np.ndarray
    _cache: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        factors = np.atleast_2d(np.asarray(self.factors, dtype=float))
        if factors.shape[1] < factors.shape[0]:
            raise InvalidParameter(f"need n >= d, got factors shaped {factors.shape}")
        if not np.all(np.isfinite(factors)):
            raise InvalidParameter("factors must be finite")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def uniform(cls, d: int, n: int) -> SeparableField:
        """b(I) = 1/√C(n, d), the flat field normalized to Σ b² = 1."""
        if n < d:
            raise InvalidParameter(f"need n >= d, got n={n}, d={d}")
        level = math.exp(-0.5 * (gammaln(n + 1) - gammaln(d + 1) - gammaln(n - d + 1)) / d)
        return cls(np.full((d, n), level))

    @property
    def d(self) -> int:
        return self.factors.shape[0]

    @property
    def n(self) -> int:
        return self.factors.shape[1]

    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        cached = self._cache.get("dense")
        if cached is None:
            indices = index_tuples(self.n, self.d)
            values = np.prod(self.factors[np.arange(self.d), indices], axis=1)
            cached = (indices, values)
            self._cache["dense"] = cached
        return cached

    def magnitudes(self) -> np.ndarray:
        return _sorted_magnitudes(self.dense()[1])

    def square_sum(self) -> float:
        """Σ_I b²(I) by the elementary-symmetric recursion, without enumerating tuples."""
        partial = np.zeros(self.d + 1)
        partial[0] = 1.0
        for i in range(self.n):
            # descending m so each index enters a tuple at most once
            for m in range(self.d, 0, -1):
                partial[m] += partial[m - 1] * self.factors[m - 1, i] ** 2
        return float(partial[self.d])

    def normalized(self) -> SeparableField:
        total = self.square_sum()
        if total <= 0:
            raise InvalidParameter("field is identically zero and cannot be normalized")
        return SeparableField(self.factors * total ** (-0.5 / self.d))


def ordered_sphere_constant(d: int) -> float:
    """c_d = π^{d/2} / (2^{d−1}·Γ(d/2)·d!): lattice density of ordered tuples per unit radius^{d−1}."""
    return math.exp(0.5 * d * math.log(math.pi) - (d - 1) * math.log(2.0) - gammaln(d / 2.0) - gammaln(d + 1))


def _integer_sqrt(values: np.ndarray) -> np.ndarray:
    roots = np.floor(np.sqrt(values.astype(float))).astype(np.int64)
    roots -= roots * roots > values
    roots += (roots + 1) * (roots + 1) <= values
    return roots


def lattice_square_norms(d: int, radius: float) -> np.ndarray:
    """Σ_m i_m² over every strictly increasing positive d-tuple with |I| ≤ radius."""
    bound = int(math.floor(radius * radius))
    last = np.arange(1, int(math.isqrt(bound)) + 1, dtype=np.int64)
    sums = last * last
    for _ in range(d - 1):
        top = _integer_sqrt(bound - sums)
        counts = np.maximum(top - last, 0)
        total = int(counts.sum())
        if total == 0:
            return np.empty(0)
        starts = np.repeat(np.cumsum(counts) - counts, counts)
        nxt = np.repeat(last, counts) + 1 + (np.arange(total) - starts)
        sums = np.repeat(sums, counts) + nxt * nxt
        last = nxt
    return sums.astype(float)


@dataclass(frozen=True, eq=False)
class PowerLawField(CoefficientField):
    """|b(I)| = C·|I|^{−α} with |I| the Euclidean norm of the 1-based index tuple.

    With n = None the field is infinite: tuples with |I| ≤ radius are enumerated and the rest is
    bounded by integral comparison against the ordered-lattice density c_d·ρ^{d−1}, with the lower
    limit moved in by √d so every unit cell lies inside the integration shell.
    """

    alpha: float
    C: float = 1.0
    d: int = 2
    n: int | None = None
    radius: float | None = None
    _cache: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.alpha <= 0 or self.C <= 0 or self.d < 1:
            raise InvalidParameter("power-law field needs alpha > 0, C > 0 and d >= 1")
        if self.n is None:
            if self.alpha <= self.d / 2.0:
                raise NonSummable(f"Σ b² diverges for alpha = {self.alpha} <= d/2 = {self.d / 2}")
            radius = self.radius
            if radius is None:
                radius = (self.d * LATTICE_TARGET / ordered_sphere_constant(self.d)) ** (1.0 / self.d)
            if radius < 2.0 * math.sqrt(self.d):
                raise InvalidParameter(f"truncation radius must be >= 2√d, got {radius}")
            object.__setattr__(self, "radius", float(radius))
        elif self.n < self.d:
            raise InvalidParameter(f"need n >= d, got n={self.n}, d={self.d}")

    @property
    def infinite(self) -> bool:
        return self.n is None

    def value(self, norm: ArrayLike) -> np.ndarray:
        return self.C * np.asarray(norm, dtype=float) ** (-self.alpha)

    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        if self.n is None:
            raise TooLarge("an infinite power-law field has no dense form; set n")
        cached = self._cache.get("indices")
        if cached is None:
            cached = index_tuples(self.n, self.d)
            self._cache["indices"] = cached
        norms = np.sqrt(np.sum((cached + 1.0) ** 2, axis=1))
        return cached, self.value(norms)

    def magnitudes(self) -> np.ndarray:
        cached = self._cache.get("magnitudes")
        if cached is None:
            if self.n is None:
                norms = np.sqrt(lattice_square_norms(self.d, self.radius))
                cached = np.sort(self.value(norms))
            else:
                cached = _sorted_magnitudes(self.dense()[1])
            self._cache["magnitudes"] = cached
        return cached

    @property
    def remainder_ceiling(self) -> float:
        if self.n is None:
            return float(self.value(self.radius))
        return 0.0

    def shell_mass(self, power: int, inner: float, outer: float = math.inf) -> float:
        """∫_inner^outer (C ρ^{−α})^power · c_d ρ^{d−1} dρ."""
        if outer <= inner:
            return 0.0
        e = self.d - power * self.alpha
        scale = self.C**power * ordered_sphere_constant(self.d)
        if math.isinf(outer):
            return math.inf if e >= 0 else scale * inner**e / -e
        if e == 0:
            return scale * math.log(outer / inner)
        return scale * (outer**e - inner**e) / e

    def remainder(self, lam: float) -> tuple[float, float, float, float]:
        if self.n is None:
            offset = math.sqrt(self.d)
            cut = (self.C / lam) ** (1.0 / self.alpha) if lam > 0 else math.inf
            if cut <= self.radius:
                return self.shell_mass(1, self.radius - offset), self.shell_mass(2, self.radius - offset), 0.0, 0.0
            return (
                self.shell_mass(1, cut - offset),
                self.shell_mass(2, cut - offset),
                self.shell_mass(1, self.radius - offset, cut),
                self.shell_mass(2, self.radius - offset, cut),
            )
        return super().remainder(lam)

    def remainder_note(self) -> str:
        if self.n is None:
            return (
                f"|I| <= {self.radius:.6g} enumerated; beyond, integral bounds with density "
                f"c_d rho^(d-1), c_d = {ordered_sphere_constant(self.d):.6g}, lower limit shifted by sqrt(d)"
            )
        return f"exact enumeration for n = {self.n}"


def field_from_spec(spec: FieldSpec) -> CoefficientField:
    if isinstance(spec, DenseFieldSpec):
        entries: dict[tuple[int, ...], float] = {}
        for entry in spec.entries:
            key = tuple(entry.I)
            if key in entries:
                raise InvalidParameter(f"duplicate index tuple {list(key)}")
            entries[key] = entry.b
        return DenseField.from_entries(spec.d, spec.n, entries)
    if isinstance(spec, UniformFieldSpec):
        return SeparableField.uniform(spec.d, spec.n)
    if isinstance(spec, SeparableFieldSpec):
        return SeparableField(np.array(spec.factors, dtype=float))
    if isinstance(spec, PowerFieldSpec):
        return PowerLawField(alpha=spec.alpha, C=spec.C, d=spec.d, n=spec.n)
    raise InvalidParameter(f"unsupported field spec {type(spec).__name__}")
