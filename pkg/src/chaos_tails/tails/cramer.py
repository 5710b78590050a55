"""Cramér-condition machinery: log-MGF envelopes φ, their ℓ² aggregate χ and its conjugate χ*."""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import logsumexp

from chaos_tails.domain.errors import InvalidParameter, Unbounded
from chaos_tails.domain.models import CramerSpec
from chaos_tails.tails.functions import GridTail, grid_from_function
from chaos_tails.tails.numerics import golden_minimize

YF_POINTS = 1024
YF_TOL = 1e-10
LAMBDA_CAP = 1e12
DENSE_N = 4096
SPARSE_EXPONENTS = np.arange(13, 31)
GROWTH_RTOL = 1e-3
TABLE_POINTS = 4097
TABLE_LEVEL = 200.0

EnvelopeFunction = Callable[[np.ndarray], np.ndarray]

# n = 1..4096 densely, then powers of two up to 2^30
AGGREGATION_COUNTS = np.concatenate([np.arange(1, DENSE_N + 1, dtype=float), 2.0**SPARSE_EXPONENTS])


@dataclass(frozen=True)
class FunctionGrid:
    """Piecewise-linear function on sorted abscissas, +∞ to the right of the last one."""

    lam: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        lam = np.asarray(self.lam, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if lam.ndim != 1 or lam.shape != values.shape or lam.size == 0:
            raise InvalidParameter("function grid needs equal-length 1-D abscissas and values")
        if np.any(np.diff(lam) <= 0):
            raise InvalidParameter("function grid abscissas must be strictly increasing")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "values", values)

    @property
    def domain_end(self) -> float:
        return float(self.lam[-1])

    def __call__(self, z: ArrayLike) -> np.ndarray:
        zs = np.asarray(z, dtype=float)
        inside = np.interp(zs, self.lam, self.values)
        return np.where(zs > self.lam[-1] * (1.0 + 1e-12), np.inf, inside)


def _log_cosh(z: np.ndarray) -> np.ndarray:
    a = np.abs(z)
    small = a < 1e-3
    z2 = a * a
    series = z2 / 2.0 - z2 * z2 / 12.0 + z2 * z2 * z2 / 45.0
    large = a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)
    return np.where(small, series, large)


@dataclass(frozen=True)
class CramerProfile:
    """An even convex envelope φ of the log-MGF, finite on [0, lambda_max)."""

    phi: EnvelopeFunction
    lambda_max: float = math.inf
    name: str = "custom"

    def envelope(self, lam: ArrayLike) -> np.ndarray:
        z = np.abs(np.asarray(lam, dtype=float))
        if self.lambda_max <= 0.0:
            return np.where(z == 0.0, 0.0, np.inf)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            values = self.phi(np.minimum(z, self.lambda_max))
        return np.where(z >= self.lambda_max, np.inf, values)

    def chi(self, lam: ArrayLike) -> np.ndarray:
        return _aggregate(self.envelope, np.asarray(lam, dtype=float), self.lambda_max)

    def chi_table(self, *, points: int = TABLE_POINTS, level: float = TABLE_LEVEL) -> FunctionGrid:
        """χ tabulated on [0, Λ], Λ doubled until χ(Λ) ≥ level or the finiteness limit."""
        if self.lambda_max <= 0.0:
            return FunctionGrid(np.array([0.0]), np.array([0.0]))
        limit = self.lambda_max * (1.0 - 1e-9) if math.isfinite(self.lambda_max) else LAMBDA_CAP
        top = min(1.0, limit)
        while top < limit and float(self.chi(np.array([top]))[0]) < level:
            top = min(2.0 * top, limit)
        return chi_from_phi(self, np.linspace(0.0, top, points))

    def chi_star(self, x: ArrayLike) -> np.ndarray:
        return conjugate_values(self.chi_table(), x)

    @classmethod
    def gaussian(cls, sigma: float = 1.0) -> CramerProfile:
        if sigma <= 0:
            raise InvalidParameter(f"gaussian profile needs sigma > 0, got {sigma}")
        return cls(phi=lambda lam: 0.5 * sigma * sigma * lam * lam, name="gaussian")

    @classmethod
    def rademacher(cls) -> CramerProfile:
        return cls(phi=_log_cosh, name="rademacher")

    @classmethod
    def bounded(cls, c: float) -> CramerProfile:
        """Hoeffding envelope c²λ²/2 for a centered variable with |ξ| ≤ c."""
        if c <= 0:
            raise InvalidParameter(f"bounded profile needs c > 0, got {c}")
        return cls(phi=lambda lam: 0.5 * c * c * lam * lam, name="bounded")

    @classmethod
    def finite(cls, values: Sequence[float] | np.ndarray, probabilities: Sequence[float] | np.ndarray) -> CramerProfile:
        """Exact log-MGF of a finite-support variable, maximized over both signs."""
        xs = np.asarray(values, dtype=float)
        ps = np.asarray(probabilities, dtype=float)
        if xs.shape != ps.shape or xs.size == 0 or np.any(ps < 0) or abs(float(ps.sum()) - 1.0) > 1e-9:
            raise InvalidParameter("finite profile needs one nonnegative probability per value, summing to 1")
        keep = ps > 0
        xs, ps = xs[keep], ps[keep]
        reach = float(np.max(np.abs(xs))) if xs.size else 0.0

        def phi(lam: np.ndarray) -> np.ndarray:
            lam = np.asarray(lam, dtype=float)
            outer = lam[..., None] * xs
            small = lam * reach < 1.0
            near = np.maximum(
                np.log1p(np.sum(ps * np.expm1(outer), axis=-1)),
                np.log1p(np.sum(ps * np.expm1(-outer), axis=-1)),
            )
            far = np.maximum(logsumexp(outer, b=ps, axis=-1), logsumexp(-outer, b=ps, axis=-1))
            return np.where(small, near, far)

        return cls(phi=phi, name="finite")

    @classmethod
    def from_grid(cls, lam: Sequence[float] | np.ndarray, phi: Sequence[float] | np.ndarray) -> CramerProfile:
        grid = FunctionGrid(np.asarray(lam, dtype=float), np.asarray(phi, dtype=float))
        if grid.lam[0] != 0.0 or grid.values[0] != 0.0:
            raise InvalidParameter("tabulated envelope must start at phi(0) = 0")
        if np.any(np.diff(grid.values) < -1e-12):
            raise InvalidParameter("tabulated envelope must be nondecreasing")
        return cls(phi=grid, lambda_max=float(np.nextafter(grid.domain_end, np.inf)), name="grid")

    @classmethod
    def none(cls) -> CramerProfile:
        return cls(phi=lambda lam: np.zeros_like(lam), lambda_max=0.0, name="none")


def _aggregate(envelope: EnvelopeFunction, lam: np.ndarray, lambda_max: float) -> np.ndarray:
    """sup_n n·φ(λ/√n) over the fixed count ladder, with an unboundedness check in n."""
    flat = np.atleast_1d(lam).ravel()
    out = np.empty_like(flat)
    chunk = max(1, 2**18 // AGGREGATION_COUNTS.size)
    roots = np.sqrt(AGGREGATION_COUNTS)
    for start in range(0, flat.size, chunk):
        block = flat[start : start + chunk]
        with np.errstate(over="ignore", invalid="ignore"):
            terms = AGGREGATION_COUNTS * envelope(block[:, None] / roots)
        terms = np.where(np.isnan(terms), np.inf, terms)
        last, earlier = terms[:, -1], terms[:, -3]
        growing = np.isfinite(last) & (last > earlier * (1.0 + GROWTH_RTOL) + 1e-300)
        if growing.any():
            raise Unbounded(
                "n·φ(λ/√n) keeps growing in n; the envelope is not quadratic at the origin"
            )
        out[start : start + chunk] = np.max(terms, axis=1)
    if lambda_max <= 0.0:
        out = np.where(flat == 0.0, 0.0, np.inf)
    return out.reshape(np.shape(lam))


def chi_from_phi(
    phi: EnvelopeFunction | CramerProfile,
    lam: ArrayLike | None = None,
    *,
    lambda_max: float = math.inf,
) -> FunctionGrid:
    """χ(λ) = sup_n n·φ(λ/√n) tabulated on a λ grid."""
    profile = phi if isinstance(phi, CramerProfile) else CramerProfile(phi=phi, lambda_max=lambda_max)
    if lam is None:
        top = min(16.0, profile.lambda_max * (1.0 - 1e-9)) if profile.lambda_max > 0 else 0.0
        lam = np.linspace(0.0, top, YF_POINTS) if top > 0 else np.array([0.0])
    grid = np.asarray(lam, dtype=float)
    return FunctionGrid(grid, profile.chi(grid))


def conjugate_values(
    chi: EnvelopeFunction | FunctionGrid,
    x: ArrayLike,
    *,
    lambda_max: float = math.inf,
    points: int = YF_POINTS,
) -> np.ndarray:
    """sup_{λ ≥ 0} (λx − χ(λ)) at arbitrary x ≥ 0, shaped like x.

    The λ range doubles until the maximizer is interior or the finiteness limit is reached; the
    best grid point is then refined by golden-section search.
    """
    if isinstance(chi, FunctionGrid):
        lambda_max = min(lambda_max, chi.domain_end)
    shape = np.shape(x)
    xs = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    ceiling = lambda_max if math.isfinite(lambda_max) else LAMBDA_CAP
    if ceiling <= 0.0:
        return np.zeros(shape)

    start = ceiling if math.isfinite(lambda_max) else min(1.0, ceiling)
    lam_hi = np.full(xs.shape, start)
    steps = np.linspace(0.0, 1.0, points)
    rows = np.arange(xs.size)
    while True:
        grid = lam_hi[:, None] * steps[None, :]
        with np.errstate(invalid="ignore"):
            gains = grid * xs[:, None] - chi(grid)
        gains = np.where(np.isnan(gains), -np.inf, gains)
        k = np.argmax(gains, axis=1)
        at_edge = (k == points - 1) & (lam_hi < ceiling)
        if not at_edge.any():
            break
        lam_hi = np.where(at_edge, np.minimum(2.0 * lam_hi, ceiling), lam_hi)

    coarse = gains[rows, k]
    lower = grid[rows, np.maximum(k - 1, 0)]
    upper = grid[rows, np.minimum(k + 1, points - 1)]

    def loss(probe: np.ndarray) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            value = chi(probe) - probe * xs
        return np.where(np.isnan(value), np.inf, value)

    _, best = golden_minimize(loss, lower, upper, tol=YF_TOL * float(lam_hi.max()))
    return np.maximum(0.0, np.maximum(-best, coarse)).reshape(shape)


def young_fenchel(
    chi: EnvelopeFunction | FunctionGrid,
    x: ArrayLike | None = None,
    *,
    lambda_max: float = math.inf,
    points: int = YF_POINTS,
) -> FunctionGrid:
    """χ*(x) = sup_{λ ≥ 0} (λx − χ(λ)) tabulated on an increasing x grid (default [0, 10])."""
    xs = np.linspace(0.0, 10.0, 1001) if x is None else np.atleast_1d(np.asarray(x, dtype=float))
    return FunctionGrid(xs, conjugate_values(chi, xs, lambda_max=lambda_max, points=points))


def _profile_scale(profile: CramerProfile) -> float:
    probe = 1.0 if profile.lambda_max > 2.0 else 0.5 * profile.lambda_max
    level = float(profile.chi(np.array([probe]))[0])
    if not math.isfinite(level) or level <= 0.0:
        return 1.0
    return math.sqrt(2.0 * level) / probe


def linear_sum_tail(profile: CramerProfile) -> GridTail:
    """exp(−χ*(x)): the Chernoff tail shared by every ℓ²-normalized linear form."""
    if profile.lambda_max <= 0.0:
        return GridTail(np.array([0.0]), np.array([1.0]), characteristic_scale=1.0)
    table = profile.chi_table()

    def values_at(xs: np.ndarray) -> np.ndarray:
        return np.exp(-conjugate_values(table, xs))

    return grid_from_function(values_at, _profile_scale(profile))


def profile_from_spec(spec: CramerSpec | None) -> CramerProfile | None:
    if spec is None or spec.kind == "none":
        return None
    if spec.kind == "gaussian":
        return CramerProfile.gaussian(spec.sigma or 1.0)
    if spec.kind == "rademacher":
        return CramerProfile.rademacher()
    if spec.kind == "bounded":
        if spec.c is None:
            raise InvalidParameter("bounded Cramér profile needs c")
        return CramerProfile.bounded(spec.c)
    if spec.kind == "finite":
        if spec.values is None or spec.probabilities is None:
            raise InvalidParameter("finite Cramér profile needs values and probabilities")
        return CramerProfile.finite(spec.values, spec.probabilities)
    if spec.lam is None or spec.phi is None:
        raise InvalidParameter("tabulated Cramér profile needs lam and phi")
    return CramerProfile.from_grid(spec.lam, spec.phi)
