from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Literal, Sequence

import numpy as np
from scipy import special

from chaos_tails.domain.errors import DimensionMismatch, InvalidParameter, MissingMoments
from chaos_tails.domain.interfaces import TailFunction
from chaos_tails.domain.models import (
    BoundResultModel,
    FamilyAssumptionsSpec,
    MomentEnvelopeSpec,
    MomentPoint,
)
from chaos_tails.tails.cramer import CramerProfile, profile_from_spec
from chaos_tails.tails.functions import tail_from_spec

Independence = Literal["martingale", "independent"]
RecursionOrder = Literal["outer_first", "ascending"]


@dataclass(frozen=True)
class MomentEnvelope:
    """μ(p) = sup_i E^{1/p}|ξ(i, m)|^p for one coordinate."""

    kind: Literal["constant", "weibull", "gaussian", "table"]
    c: float = 1.0
    q: float | None = None
    K: float = 1.0
    sigma: float = 1.0
    p_table: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind == "weibull" and (self.q is None or self.q <= 0):
            raise InvalidParameter("weibull moment envelope needs q > 0")
        if self.kind == "table":
            p = np.asarray(self.p_table, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if p.size == 0 or p.shape != v.shape or np.any(np.diff(p) <= 0) or np.any(v <= 0):
                raise InvalidParameter("moment table needs increasing p values and positive moments")

    def __call__(self, p: float) -> float:
        if p < 1:
            raise InvalidParameter(f"moment order must be >= 1, got {p}")
        if self.kind == "constant":
            return self.c
        if self.kind == "weibull":
            return self.K * math.exp(special.gammaln(1.0 + p / float(self.q)) / p)
        if self.kind == "gaussian":
            log_abs = (p / 2.0) * math.log(2.0) + special.gammaln((p + 1.0) / 2.0) - 0.5 * math.log(math.pi)
            return self.sigma * math.exp(log_abs / p)
        if not self.p_table[0] - 1e-12 <= p <= self.p_table[-1] + 1e-12:
            raise MissingMoments(
                f"moment envelope tabulated on [{self.p_table[0]:g}, {self.p_table[-1]:g}], needed at p = {p:g}"
            )
        return float(np.exp(np.interp(p, self.p_table, np.log(self.values))))

    @classmethod
    def from_spec(cls, spec: MomentEnvelopeSpec) -> MomentEnvelope:
        return cls(
            kind=spec.kind,
            c=spec.c,
            q=spec.q,
            K=spec.K,
            sigma=spec.sigma,
            p_table=tuple(spec.p or ()),
            values=tuple(spec.values or ()),
        )


@dataclass(frozen=True)
class FamilyAssumptions:
    d: int
    tails: tuple[TailFunction, ...]
    cramer: tuple[CramerProfile | None, ...] = ()
    independence: Independence = "martingale"
    moments: tuple[MomentEnvelope, ...] = ()
    order: RecursionOrder = "outer_first"

    def __post_init__(self) -> None:
        if self.d < 1:
            raise InvalidParameter(f"dimension d must be >= 1, got {self.d}")
        if len(self.tails) != self.d:
            raise DimensionMismatch(f"expected {self.d} tail envelopes, got {len(self.tails)}")
        if self.cramer and len(self.cramer) != self.d:
            raise DimensionMismatch(f"expected {self.d} Cramér profiles, got {len(self.cramer)}")
        if self.moments and len(self.moments) != self.d:
            raise DimensionMismatch(f"expected {self.d} moment envelopes, got {len(self.moments)}")

    @classmethod
    def homogeneous(
        cls,
        d: int,
        tail: TailFunction,
        *,
        cramer: CramerProfile | None = None,
        independence: Independence = "martingale",
        moments: MomentEnvelope | None = None,
    ) -> FamilyAssumptions:
        return cls(
            d=d,
            tails=tuple(tail for _ in range(d)),
            cramer=tuple(cramer for _ in range(d)) if cramer is not None else (),
            independence=independence,
            moments=tuple(moments for _ in range(d)) if moments is not None else (),
        )

    @classmethod
    def from_spec(cls, spec: FamilyAssumptionsSpec) -> FamilyAssumptions:
        return cls(
            d=spec.d,
            tails=tuple(tail_from_spec(item) for item in spec.tails),
            cramer=tuple(profile_from_spec(item) for item in spec.cramer) if spec.cramer else (),
            independence=spec.independence,
            moments=tuple(MomentEnvelope.from_spec(item) for item in spec.moments) if spec.moments else (),
            order=spec.order,
        )

    def cramer_for(self, coordinate: int) -> CramerProfile | None:
        """Profile of the 1-based coordinate, if one was supplied."""
        if not self.cramer:
            return None
        return self.cramer[coordinate - 1]

    def moment(self, coordinate: int, p: float) -> float:
        if not self.moments:
            raise MissingMoments("no moment envelopes were supplied")
        return self.moments[coordinate - 1](p)

    def echo(self) -> dict[str, object]:
        return {
            "d": self.d,
            "independence": self.independence,
            "order": self.order,
            "tails": [tail.to_spec().model_dump() for tail in self.tails],
            "cramer": [profile.name if profile else None for profile in self.cramer],
            "moments": [envelope.kind for envelope in self.moments],
        }


@dataclass(frozen=True)
class BoundResult:
    theorem: int
    mode: Literal["tail", "moment"]
    tail: TailFunction | None = None
    moments: tuple[tuple[float, float], ...] = ()
    exponent: float | None = None
    log_power: float | None = None
    provenance: tuple[str, ...] = ()
    flags: tuple[str, ...] = ()
    assumptions: dict[str, object] = field(default_factory=dict)

    def moment_at(self, p: float) -> float:
        for order, bound in self.moments:
            if abs(order - p) <= 1e-12 * max(1.0, p):
                return bound
        raise MissingMoments(f"moment curve holds no value at p = {p:g}")

    def to_model(self) -> BoundResultModel:
        return BoundResultModel(
            theorem=self.theorem,
            mode=self.mode,
            tail=self.tail.to_spec() if self.tail is not None else None,
            moments=[MomentPoint(p=p, bound=b) for p, b in self.moments] if self.moments else None,
            exponent=self.exponent,
            log_power=self.log_power,
            provenance=list(self.provenance),
            flags=list(self.flags),
        )


def moment_grid(p_values: Sequence[float] | None, horizon: int) -> list[float]:
    if p_values:
        return [float(p) for p in p_values]
    return [float(p) for p in range(2, horizon + 1)]
