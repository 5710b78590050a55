from __future__ import annotations

from datetime import datetime, timezone
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

QValue = Union[Annotated[float, Field(gt=0)], Literal["inf"]]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", ser_json_inf_nan="strings")


class ParametricTailSpec(_Strict):
    repr: Literal["parametric"] = "parametric"
    Y: float = Field(default=1.0, ge=1.0)
    K: float = Field(default=1.0, gt=0)
    q: float = Field(gt=0)
    rho: float = 0.0


class GridTailSpec(_Strict):
    repr: Literal["grid"] = "grid"
    x: list[float]
    t: list[float]


TailSpec = Annotated[Union[ParametricTailSpec, GridTailSpec], Field(discriminator="repr")]


class CramerSpec(_Strict):
    kind: Literal["gaussian", "rademacher", "bounded", "finite", "grid", "none"]
    sigma: float | None = Field(default=None, gt=0)
    c: float | None = Field(default=None, gt=0)
    values: list[float] | None = None
    probabilities: list[float] | None = None
    lam: list[float] | None = None
    phi: list[float] | None = None


class MomentEnvelopeSpec(_Strict):
    kind: Literal["constant", "weibull", "gaussian", "table"]
    c: float = Field(default=1.0, gt=0)
    q: float | None = Field(default=None, gt=0)
    K: float = Field(default=1.0, gt=0)
    sigma: float = Field(default=1.0, gt=0)
    p: list[float] | None = None
    values: list[float] | None = None


class FamilyAssumptionsSpec(_Strict):
    d: int = Field(ge=1)
    tails: list[TailSpec]
    cramer: list[CramerSpec | None] | None = None
    independence: Literal["martingale", "independent"] = "martingale"
    moments: list[MomentEnvelopeSpec] | None = None
    order: Literal["outer_first", "ascending"] = "outer_first"

    @field_validator("tails")
    @classmethod
    def _one_tail_per_coordinate(cls, tails: list[TailSpec], info) -> list[TailSpec]:
        d = info.data.get("d")
        if d is not None and len(tails) != d:
            raise ValueError(f"expected {d} tail envelopes, got {len(tails)}")
        return tails


class FieldEntry(_Strict):
    I: list[int]
    b: float


class DenseFieldSpec(_Strict):
    d: int = Field(ge=1)
    n: int = Field(ge=1)
    entries: list[FieldEntry]


class UniformFieldSpec(_Strict):
    rule: Literal["uniform"]
    d: int = Field(ge=1)
    n: int = Field(ge=1)


class SeparableFieldSpec(_Strict):
    rule: Literal["separable"]
    factors: list[list[float]]


class PowerFieldSpec(_Strict):
    rule: Literal["power"]
    alpha: float = Field(gt=0)
    C: float = Field(default=1.0, gt=0)
    d: int = Field(default=2, ge=1)
    n: int | None = Field(default=None, ge=1)


FieldSpec = Union[DenseFieldSpec, UniformFieldSpec, SeparableFieldSpec, PowerFieldSpec]


class SupportAtom(_Strict):
    x: float
    p: float = Field(gt=0)


class KernelSpec(_Strict):
    support: list[SupportAtom]
    d: int = Field(ge=1)
    phi: list


class FamilySpec(_Strict):
    kind: Literal["rademacher", "weibull_symmetric", "scaled_product", "dependent_martingale"]
    d: int = Field(ge=1)
    n: int = Field(ge=1)
    q: float | None = Field(default=None, gt=0)


class BoundRequest(_Strict):
    theorem: Literal[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 13, 14, 15, 16]
    mode: Literal["tail", "moment"] = "tail"
    assumptions: FamilyAssumptionsSpec | None = None
    q: list[QValue] | None = None
    K: list[float] | None = None
    d: int | None = Field(default=None, ge=1)
    r: float = 0.0
    kernel: KernelSpec | None = None
    kernel_scale: float = Field(default=1.0, gt=0)
    field: FieldSpec | None = None
    p: list[float] | None = None
    constant: float = Field(default=2.0**0.5, gt=0)


class MomentPoint(_Strict):
    p: float
    bound: float


class BoundResultModel(_Strict):
    theorem: int
    mode: Literal["tail", "moment"]
    tail: TailSpec | None = None
    moments: list[MomentPoint] | None = None
    exponent: float | None = None
    log_power: float | None = None
    provenance: list[str] = Field(default_factory=list)
    flags: list[str] = Field(default_factory=list)


class CampaignConfig(_Strict):
    campaign_id: str = Field(min_length=1)
    family: FamilySpec
    field: FieldSpec
    bound: BoundRequest | None = None
    tail: TailSpec | None = None
    mode: Literal["tail", "moment"] = "tail"
    replications: int | None = Field(default=None, ge=1)
    seed: int = Field(default=0, ge=0)
    x_grid: list[float] | None = None
    p_list: list[float] | None = None
    scale_bound: float = Field(default=1.0, gt=0)
    oracle: bool = False
    output_dir: str | None = None
    verbosity: Literal["quiet", "normal", "debug"] = "normal"


class TailCheck(_Strict):
    x: float
    empirical: float
    cp_upper: float
    bound: float
    oracle: float | None = None
    tightness: float | None = None
    verdict: Literal["PASS", "FAIL"]


class MomentCheck(_Strict):
    p: float
    empirical: float
    band_upper: float
    bound: float
    tightness: float | None = None
    verdict: Literal["PASS", "FAIL"]


class DriftCheck(_Strict):
    coordinate: int
    history_sign: int
    mean: float
    standard_error: float
    passed: bool


class ReportHeader(_Strict):
    generated_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
    version: str = "0.1.0"
    runtime_seconds: float = 0.0


class VerificationReport(_Strict):
    header: ReportHeader = Field(default_factory=ReportHeader)
    campaign_id: str
    verdict: Literal["PASS", "FAIL"]
    family: FamilySpec
    replications: int
    seed: int
    confidence: float
    tail_checks: list[TailCheck] = Field(default_factory=list)
    moment_checks: list[MomentCheck] = Field(default_factory=list)
    drift_checks: list[DriftCheck] = Field(default_factory=list)
    notes: list[str] = Field(default_factory=list)
