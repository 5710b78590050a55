"""Recursive tail bounds for Q_d: alternate product composition and truncation, one coordinate at a time."""

from __future__ import annotations

import logging
import time

from chaos_tails.bounds.assumptions import BoundResult, FamilyAssumptions
from chaos_tails.domain.interfaces import TailFunction
from chaos_tails.tails.functions import tail_minimum
from chaos_tails.tails.operators import cramer_refine_Wbar, product_compose, truncation_operator_W
from chaos_tails.telemetry import elapsed_ms, log_event, span_record_error, start_span, telemetry_tags

_logger = logging.getLogger(__name__)


def coordinate_order(assumptions: FamilyAssumptions) -> list[int]:
    """1-based coordinates in application order; the first one seeds the recursion."""
    if assumptions.order == "ascending":
        return list(range(1, assumptions.d + 1))
    return list(range(assumptions.d, 0, -1))


def _fold(
    assumptions: FamilyAssumptions, seed: TailFunction, seed_label: str
) -> tuple[TailFunction, list[str]]:
    order = coordinate_order(assumptions)
    current = seed
    provenance = [f"T^(1) = {seed_label}[T_{order[0]}]"]
    for step, coordinate in enumerate(order[1:], start=2):
        composed = product_compose(assumptions.tails[coordinate - 1], current)
        current = truncation_operator_W(composed)
        provenance.append(f"T^({step}) = W[T_{coordinate} ∨ T^({step - 1})]")
    return current, provenance


def martingale_tail_recursion(assumptions: FamilyAssumptions) -> BoundResult:
    started = time.perf_counter()
    attrs = telemetry_tags(theorem="4", d=assumptions.d)
    with start_span("bounds.recursion.martingale", attrs) as span:
        try:
            first = coordinate_order(assumptions)[0]
            seed = truncation_operator_W(assumptions.tails[first - 1])
            tail, provenance = _fold(assumptions, seed, "W")
        except Exception as error:
            span_record_error(span, error, type(error).__name__)
            raise
    log_event(
        _logger,
        "bound_constructed",
        theorem=4,
        d=assumptions.d,
        steps=len(provenance),
        latency_ms=elapsed_ms(started),
    )
    return BoundResult(
        theorem=4,
        mode="tail",
        tail=tail,
        provenance=tuple(provenance),
        assumptions=assumptions.echo(),
    )


def independent_tail_recursion(assumptions: FamilyAssumptions) -> BoundResult:
    """Seeded with W̄ when the seed coordinate has a Cramér profile; never above the martingale bound."""
    martingale = martingale_tail_recursion(assumptions)
    first = coordinate_order(assumptions)[0]
    profile = assumptions.cramer_for(first)
    flags: list[str] = []
    if assumptions.independence != "independent":
        flags.append("independence not asserted; martingale recursion returned")
        return BoundResult(
            theorem=5,
            mode="tail",
            tail=martingale.tail,
            provenance=martingale.provenance,
            flags=tuple(flags),
            assumptions=assumptions.echo(),
        )
    if profile is None:
        flags.append(f"no Cramér profile for T_{first}; fell back to the martingale recursion")
        return BoundResult(
            theorem=5,
            mode="tail",
            tail=martingale.tail,
            provenance=martingale.provenance,
            flags=tuple(flags),
            assumptions=assumptions.echo(),
        )

    attrs = telemetry_tags(theorem="5", d=assumptions.d)
    with start_span("bounds.recursion.independent", attrs) as span:
        try:
            seed = cramer_refine_Wbar(assumptions.tails[first - 1], profile)
            tail, provenance = _fold(assumptions, seed, "W̄")
            if martingale.tail is not None:
                tail = tail_minimum(tail, martingale.tail)
        except Exception as error:
            span_record_error(span, error, type(error).__name__)
            raise
    provenance.append("min with the martingale recursion")
    log_event(_logger, "bound_constructed", theorem=5, d=assumptions.d, profile=profile.name)
    return BoundResult(
        theorem=5,
        mode="tail",
        tail=tail,
        provenance=tuple(provenance),
        flags=tuple(flags),
        assumptions=assumptions.echo(),
    )
