"""Exponent and constant catalog for martingale, independent and U-statistic chaos bounds.

Infinite exponents are carried by the ``INFINITY`` sentinel whose reciprocal is exactly 0, so no
arithmetic ever touches a floating-point infinity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Iterable, Sequence, Union

import numpy as np
from scipy import special

from chaos_tails.domain.errors import InvalidParameter, NonSummable
from chaos_tails.tails.functions import log_term_offset
from chaos_tails.tails.numerics import golden_minimize


class _Infinity:
    """The exponent +∞; only its reciprocal 0 is ever used."""

    inverse = 0.0

    def __repr__(self) -> str:
        return "INFINITY"

    def __str__(self) -> str:
        return "inf"


INFINITY = _Infinity()

Exponent = Union[float, _Infinity]


def parse_exponent(value: object) -> Exponent:
    if value is INFINITY or value == "inf" or (isinstance(value, float) and math.isinf(value) and value > 0):
        return INFINITY
    try:
        q = float(value)  # type: ignore[arg-type]
    except (TypeError, ValueError) as exc:
        raise InvalidParameter(f"exponent must be a positive number or 'inf', got {value!r}") from exc
    if not q > 0 or math.isnan(q):
        raise InvalidParameter(f"exponent must be > 0, got {value!r}")
    return q


def inverse(q: Exponent) -> float:
    return q.inverse if isinstance(q, _Infinity) else 1.0 / q


def is_infinite(q: Exponent) -> bool:
    return isinstance(q, _Infinity)


def exponent_label(q: Exponent) -> float | str:
    return "inf" if is_infinite(q) else float(q)


@dataclass(frozen=True)
class QVector:
    q: tuple[Exponent, ...]

    def __post_init__(self) -> None:
        if not self.q:
            raise InvalidParameter("exponent vector needs d >= 1 entries")
        object.__setattr__(self, "q", tuple(parse_exponent(value) for value in self.q))

    @classmethod
    def of(cls, values: Iterable[object]) -> QVector:
        return cls(tuple(values))  # type: ignore[arg-type]

    @classmethod
    def homogeneous(cls, d: int, q: object) -> QVector:
        if d < 1:
            raise InvalidParameter(f"dimension d must be >= 1, got {d}")
        return cls(tuple(q for _ in range(d)))  # type: ignore[arg-type]

    @property
    def d(self) -> int:
        return len(self.q)

    @property
    def inverses(self) -> tuple[float, ...]:
        return tuple(inverse(q) for q in self.q)

    def labels(self) -> list[float | str]:
        return [exponent_label(q) for q in self.q]


@dataclass(frozen=True)
class ExponentResult:
    name: str
    value: float
    log_power: float | None = None
    branch: str | None = None
    provenance: str = ""

    def as_payload(self) -> dict[str, object]:
        payload: dict[str, object] = {
            "name": self.name,
            "value": "inf" if math.isinf(self.value) else self.value,
            "branch": self.branch,
            "provenance": self.provenance,
        }
        if self.log_power is not None:
            payload["log_power"] = self.log_power
        return payload


def exponent_M(qv: QVector) -> ExponentResult:
    value = 1.0 / (qv.d / 2.0 + sum(qv.inverses))
    return ExponentResult("M", value, provenance="martingale tail exponent (d/2 + Σ 1/q)^-1")


def exponent_N_base(q: object) -> ExponentResult:
    q = parse_exponent(q)
    if not is_infinite(q) and q <= 1:
        return ExponentResult("N", 2.0 * q / (q + 2.0), branch="q<=1", provenance="single-sum exponent")
    value = 2.0 if is_infinite(q) else min(q, 2.0)
    return ExponentResult("N", value, branch="q>1", provenance="single-sum exponent")


def _nd_candidates(qv: QVector, *, literal: bool) -> list[float]:
    D = qv.d
    lead = (D - 2) / 2.0 if literal else (D - 1) / 2.0
    inv = qv.inverses
    total = sum(inv)
    out = []
    for k, qk in enumerate(qv.q):
        reciprocal = lead + (total - inv[k]) + 1.0 / exponent_N_base(qk).value
        out.append(1.0 / reciprocal)
    return out


def exponent_Nd(qv: QVector, *, literal: bool = False) -> ExponentResult:
    """Independent-case exponent: max over the coordinate that keeps the single-sum exponent.

    The default recursion uses (D−1)/2, which reproduces γ(d, q) for homogeneous vectors; the
    literal variant uses (D−2)/2.
    """
    if qv.d == 1:
        base = exponent_N_base(qv.q[0])
        return ExponentResult("N_d", base.value, branch=base.branch, provenance="initial condition N_1 = N")
    candidates = _nd_candidates(qv, literal=literal)
    k = int(np.argmax(candidates))
    return ExponentResult(
        "N_d",
        candidates[k],
        branch=f"k={k + 1}",
        provenance="literal recursion (D-2)/2" if literal else "corrected recursion (D-1)/2",
    )


def exponent_gamma_dq(d: int, q: object) -> ExponentResult:
    if d < 1:
        raise InvalidParameter(f"dimension d must be >= 1, got {d}")
    q = parse_exponent(q)
    if not is_infinite(q) and q <= 1:
        return ExponentResult("gamma", 2.0 * q / (d * (q + 2.0)), branch="q<=1")
    if not is_infinite(q) and q <= 2:
        return ExponentResult("gamma", 2.0 * q / (2.0 * d + q * (d - 1)), branch="1<q<=2")
    # 2q/(dq + 2(d-1)) divided through by q
    return ExponentResult("gamma", 2.0 / (d + 2.0 * (d - 1) * inverse(q)), branch="q>2")


def vector_L(q: object, r: float) -> ExponentResult:
    q = parse_exponent(q)
    inv = inverse(q)
    value = 2.0 / (1.0 + 2.0 * inv)
    log_power = 2.0 * r * inv / (1.0 + 2.0 * inv)
    return ExponentResult("L", value, log_power=log_power, provenance="truncation exponent pair")


def vector_N_qr(q: object, r: float) -> ExponentResult:
    q = parse_exponent(q)
    if not is_infinite(q):
        if q < 1 or (q == 1 and r < 0):
            return ExponentResult("N_qr", 2.0 * q / (q + 2.0), log_power=2.0 * r / (q + 2.0), branch="a")
        if (q == 1 and r >= 0) or (1 < q < 2) or (q == 2 and r < 0):
            return ExponentResult("N_qr", q, log_power=r, branch="b")
    return ExponentResult("N_qr", 2.0, log_power=0.0, branch="c")


def log_refined_recursion(d: int, q: object, r: float) -> ExponentResult:
    """(V(d, q), r(d)) from r(1) = 2r/(q+2) and the one-step log-power recursion."""
    if d < 1:
        raise InvalidParameter(f"dimension d must be >= 1, got {d}")
    q = parse_exponent(q)
    inv = inverse(q)

    def V(k: int) -> float:
        return 2.0 / (k * (1.0 + 2.0 * inv))

    r_k = 2.0 * r * inv / (1.0 + 2.0 * inv)
    for k in range(1, d):
        v = V(k)
        # numerator and denominator both divided by q
        r_k = (r_k + v * r * inv) / (v + 2.0 * v * inv + 2.0)
    return ExponentResult("V", V(d), log_power=r_k, provenance="log-refined martingale recursion")


def moment_constant_gamma(d: int) -> float:
    if d < 1:
        raise InvalidParameter(f"dimension d must be >= 1, got {d}")
    value = math.sqrt(2.0)
    for k in range(1, d):
        value *= math.sqrt(2.0) * (1.0 + 1.0 / k) ** k
    return value


def moment_constant_envelope(d: int) -> float:
    """9·exp((d−3) + (log 2)(d−2)/2), valid for d ≥ 3."""
    return 9.0 * math.exp((d - 3) + math.log(2.0) * (d - 2) / 2.0)


@dataclass(frozen=True)
class AuxConstants:
    q: float | str
    delta: float
    beta: float
    beta_bounded: bool
    beta_argmax: float
    beta_closed_small_q: float
    beta_closed_large_q: float
    F: float
    flags: tuple[str, ...] = field(default_factory=tuple)


_BETA_POINTS = 2049
_BETA_LOG_CEILING = 600.0


def _beta_supremand(q: float, v: np.ndarray) -> np.ndarray:
    """exp(v^q)·∫_v^∞ x·exp(−x^q) dx through the regularized upper incomplete gamma."""
    a = 2.0 / q
    z = np.asarray(v, dtype=float) ** q
    return np.exp(z) * special.gamma(a) / q * special.gammaincc(a, z)


def aux_constants(q: object, r: float = 0.0) -> AuxConstants:
    q = parse_exponent(q)
    flags: list[str] = []
    if is_infinite(q):
        return AuxConstants(
            q="inf",
            delta=1.0,
            beta=0.0,
            beta_bounded=True,
            beta_argmax=0.0,
            beta_closed_small_q=0.0,
            beta_closed_large_q=0.0,
            F=1.0,
            flags=("bounded variables: the truncation integral vanishes",),
        )

    delta = min(q / 2.0, 1.0) ** (-1.0 / q)
    top = _BETA_LOG_CEILING ** (1.0 / q)
    v = np.linspace(0.0, top, _BETA_POINTS)
    values = _beta_supremand(q, v)
    k = int(np.nanargmax(values))
    half = float(_beta_supremand(q, np.array([top / 2.0]))[0])
    growing = k >= _BETA_POINTS - 2 and values[-1] > half * (1.0 + 1e-6)
    if growing:
        beta, argmax, bounded = math.inf, math.inf, False
        flags.append("supremum unbounded: the supremand grows like v^(2-q)")
    else:
        lower = np.array([v[max(k - 1, 0)]])
        upper = np.array([v[min(k + 1, _BETA_POINTS - 1)]])
        u, f = golden_minimize(lambda probe: -_beta_supremand(q, probe), lower, upper, tol=1e-10 * top)
        beta, argmax, bounded = max(float(-f[0]), float(values[k])), float(u[0]), True

    small = max(special.gamma(2.0 / q) / q, (math.e / q) * (2.0 / (math.e * q)) ** (2.0 / q))
    large = special.gamma(2.0 / q) / (q * math.e)
    return AuxConstants(
        q=float(q),
        delta=delta,
        beta=beta,
        beta_bounded=bounded,
        beta_argmax=argmax,
        beta_closed_small_q=float(small),
        beta_closed_large_q=float(large),
        F=log_term_offset(q, r),
        flags=tuple(flags),
    )


def exponent_G(qv: QVector) -> ExponentResult:
    total = sum(qv.inverses)
    if total == 0.0:
        return ExponentResult("G", math.inf, branch="all-infinite", provenance="coefficient-series exponent")
    return ExponentResult("G", 1.0 / total, provenance="coefficient-series exponent")


def ustat_scale_t(d: int, k: int, r: int) -> float:
    if not 1 <= r <= k <= d:
        raise InvalidParameter(f"need 1 <= r <= k <= d, got d={d}, k={k}, r={r}")
    return 1.0 / ((d - r + 1) * math.comb(d, k))


@dataclass(frozen=True)
class MomentConstantEnvelope:
    """Bracket for the best moment constant at (d, p); a lower value of None means only its shape is known."""

    d: int
    p: float
    upper: float
    lower: float | None
    lower_shape: float
    flags: tuple[str, ...] = field(default_factory=tuple)


def km_envelope(d: int, p: float) -> MomentConstantEnvelope:
    """Martingale moment constant K_M(d, p)."""
    if d < 1 or p <= 1:
        raise InvalidParameter(f"need d >= 1 and p > 1, got d={d}, p={p}")
    if d == 1:
        lower = 0.87 * p / math.log(p)
        return MomentConstantEnvelope(d, p, upper=math.sqrt(2.0) * p, lower=lower, lower_shape=lower)
    return MomentConstantEnvelope(
        d,
        p,
        upper=moment_constant_gamma(d) * p**d,
        lower=None,
        lower_shape=p ** (d / 2.0),
        flags=("lower constant C^d unspecified; shape p^(d/2) only",),
    )


def ki_envelope(d: int, p: float) -> MomentConstantEnvelope:
    """Independent-case moment constant K_I(p, d)."""
    if d < 1 or p <= 1:
        raise InvalidParameter(f"need d >= 1 and p > 1, got d={d}, p={p}")
    return MomentConstantEnvelope(
        d,
        p,
        upper=2.0 ** (d / 2.0) * p**d / math.log(p),
        lower=None,
        lower_shape=p**d / math.log(p) ** d,
        flags=("lower constant C^d unspecified; shape p^d / log^d p only",),
    )


def exponent_table(d_max: int, qs: Sequence[object]) -> list[dict[str, object]]:
    """Martingale vs independent exponents for homogeneous vectors, one row per (d, q)."""
    if d_max < 1:
        raise InvalidParameter(f"d_max must be >= 1, got {d_max}")
    rows: list[dict[str, object]] = []
    for d in range(1, d_max + 1):
        for raw in qs:
            q = parse_exponent(raw)
            qv = QVector.homogeneous(d, q)
            q_min = 2.0 if is_infinite(q) else min(q, 2.0)
            rows.append(
                {
                    "d": d,
                    "q": exponent_label(q),
                    "M": exponent_M(qv).value,
                    "N_d": exponent_Nd(qv).value,
                    "gamma": exponent_gamma_dq(d, q).value,
                    "lower_exponent": q_min / d,
                    "martingale_moment_power": float(d),
                    "independent_moment_power": float(d),
                    "independent_moment_log_power": -1.0,
                }
            )
    return rows


@dataclass(frozen=True)
class PowerLawRegime:
    d: int
    alpha: float
    regime: str
    tail_exponent: float
    tail_log_form: str
    moment_growth: str
    moment_exponent: float | None


def power_law_regime(d: int, q: object, alpha: float) -> PowerLawRegime:
    """Tail and moment regimes for coefficients |b(I)| ≍ |I|^(−α)."""
    if d < 1:
        raise InvalidParameter(f"dimension d must be >= 1, got {d}")
    if alpha <= d / 2.0:
        raise NonSummable(f"power-law coefficients with alpha={alpha} <= d/2 are not square summable")
    G = exponent_G(QVector.homogeneous(d, q)).value
    inv = inverse(parse_exponent(q))
    if alpha < d:
        # q/(q(d−α) + d) divided through by q
        exponent = 1.0 / ((d - alpha) + d * inv)
        return PowerLawRegime(d, alpha, "subcritical", exponent, "x^e", "p^(2(d-alpha))", 2.0 * (d - alpha))
    if alpha == d:
        return PowerLawRegime(d, alpha, "critical", G, "(x/log x)^G", "log p", None)
    return PowerLawRegime(d, alpha, "summable", G, "x^G", "bounded", 0.0)
