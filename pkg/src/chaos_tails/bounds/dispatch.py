"""Route a BoundRequest to the bound it names."""

from __future__ import annotations

from dataclasses import replace

from chaos_tails.bounds.assumptions import BoundResult, FamilyAssumptions, moment_grid
from chaos_tails.bounds.envelopes import theorem1_envelope, theorem2_envelope, theorem3_lower_envelope
from chaos_tails.bounds.moments import (
    independent_moment_bound,
    martingale_moment_bound,
    moment_curve,
    moments_to_tail,
)
from chaos_tails.bounds.recursion import independent_tail_recursion, martingale_tail_recursion
from chaos_tails.config import get_settings
from chaos_tails.domain.errors import InvalidParameter
from chaos_tails.domain.interfaces import CoefficientField
from chaos_tails.domain.models import BoundRequest
from chaos_tails.exponents import QVector
from chaos_tails.series.bounds import series_moment_curve, theorem13_tail, theorem14_tail
from chaos_tails.series.fields import field_from_spec
from chaos_tails.ustat.bounds import ustat_moment_bound, ustat_tail_parametric, ustat_tail_recursion
from chaos_tails.ustat.kernels import FiniteKernel


def exponent_vector(request: BoundRequest) -> QVector:
    if not request.q:
        raise InvalidParameter(f"theorem {request.theorem} needs the tail exponents q")
    if len(request.q) == 1 and request.d is not None:
        return QVector.homogeneous(request.d, request.q[0])
    qv = QVector.of(request.q)
    if request.d is not None and request.d != qv.d:
        raise InvalidParameter(f"d = {request.d} but {qv.d} exponents were given")
    return qv


def _assumptions(request: BoundRequest) -> FamilyAssumptions:
    if request.assumptions is None:
        raise InvalidParameter(f"theorem {request.theorem} needs family assumptions")
    return FamilyAssumptions.from_spec(request.assumptions)


def _kernel(request: BoundRequest) -> FiniteKernel:
    if request.kernel is None:
        raise InvalidParameter(f"theorem {request.theorem} needs a kernel")
    return FiniteKernel.from_spec(request.kernel)


def _field(request: BoundRequest) -> CoefficientField:
    if request.field is None:
        raise InvalidParameter(f"theorem {request.theorem} needs a coefficient field")
    return field_from_spec(request.field)


def compute_bound(request: BoundRequest) -> BoundResult:
    horizon = get_settings().moment_horizon
    theorem = request.theorem
    if theorem == 1:
        return theorem1_envelope(exponent_vector(request), request.K)
    if theorem == 2:
        return theorem2_envelope(exponent_vector(request), request.K)
    if theorem == 3:
        qv = exponent_vector(request)
        return theorem3_lower_envelope(qv.d, qv.q[0])
    if theorem == 4:
        return martingale_tail_recursion(_assumptions(request))
    if theorem == 5:
        return independent_tail_recursion(_assumptions(request))
    if theorem in (6, 7):
        independent = theorem == 7
        assumptions = _assumptions(request)
        curve = moment_curve(assumptions, moment_grid(request.p, horizon), independent=independent)
        if request.mode == "moment":
            return curve
        bound = independent_moment_bound if independent else martingale_moment_bound
        return replace(
            curve,
            mode="tail",
            tail=moments_to_tail(lambda p: bound(assumptions, p), horizon=horizon),
            moments=(),
            exponent=1.0 / assumptions.d,
            provenance=(*curve.provenance, f"Markov optimization over p in [2, {horizon}]"),
        )
    if theorem == 8:
        kernel = _kernel(request)
        points = tuple(
            (p, ustat_moment_bound(kernel, p, constant=request.constant)) for p in moment_grid(request.p, horizon)
        )
        return BoundResult(
            theorem=8,
            mode="moment",
            moments=points,
            exponent=float(kernel.d),
            log_power=-1.0,
            provenance=(f"C^d p^d |Phi|_p / log p with C = {request.constant:.6g}",),
        )
    if theorem == 9:
        kernel = _kernel(request)
        if not request.q:
            raise InvalidParameter("theorem 9 needs the kernel tail exponent q")
        q = request.q[0]
        if q == "inf":
            raise InvalidParameter("theorem 9 needs a finite kernel tail exponent")
        tail = ustat_tail_parametric(kernel, float(q), request.r, request.kernel_scale)
        return BoundResult(
            theorem=9,
            mode="tail",
            tail=tail,
            exponent=tail.q,
            log_power=tail.rho,
            provenance=(
                "Y exp(-(x/K)^(q/(qd+1)) log(F + x/K)^(-(r-1)q/(qd+1)))",
                f"K = {tail.K:.6g} and Y = {tail.Y:.6g} fitted above the slice recursion",
            ),
        )
    if theorem == 10:
        kernel = _kernel(request)
        return BoundResult(
            theorem=10,
            mode="tail",
            tail=ustat_tail_recursion(kernel),
            provenance=("sum over k >= rank of L(g_k, k)(t(d, k, r) x)",),
        )
    if theorem == 13:
        return theorem13_tail(_field(request), exponent_vector(request), request.K)
    if theorem == 14:
        return theorem14_tail(_field(request), exponent_vector(request), request.K)
    if theorem in (15, 16):
        return series_moment_curve(_field(request), moment_grid(request.p, horizon), independent=theorem == 15)
    raise InvalidParameter(f"unsupported theorem {theorem}")
