from __future__ import annotations

from contextlib import contextmanager
import logging
import math

import numpy as np
import pytest

from chaos_tails.bounds import recursion as recursion_mod
from chaos_tails.bounds.assumptions import FamilyAssumptions, MomentEnvelope, moment_grid
from chaos_tails.bounds.dispatch import compute_bound, exponent_vector
from chaos_tails.bounds.envelopes import (
    coordinate_scales,
    log_log_slope,
    theorem1_envelope,
    theorem2_envelope,
    theorem3_lower_envelope,
    unit_tail,
)
from chaos_tails.bounds.moments import (
    independent_moment_bound,
    martingale_moment_bound,
    moment_curve,
    moments_to_tail,
)
from chaos_tails.bounds.recursion import (
    coordinate_order,
    independent_tail_recursion,
    martingale_tail_recursion,
)
from chaos_tails.domain.errors import (
    AssumptionViolated,
    DimensionMismatch,
    InvalidParameter,
    MissingMoments,
)
from chaos_tails.domain.models import (
    BoundRequest,
    FamilyAssumptionsSpec,
    MomentEnvelopeSpec,
    ParametricTailSpec,
)
from chaos_tails.exponents import QVector
from chaos_tails.tails.cramer import CramerProfile
from chaos_tails.tails.functions import ParametricTail, eval_tail
from chaos_tails.tails.operators import truncation_operator_W

UNIT = MomentEnvelope(kind="constant")


def _moment_family(d: int, independence: str = "martingale") -> FamilyAssumptions:
    return FamilyAssumptions.homogeneous(d, unit_tail(2), independence=independence, moments=UNIT)


def test_theorem1_uses_the_martingale_exponent() -> None:
    result = theorem1_envelope(QVector.homogeneous(2, 2), K=[2.0, 3.0])
    assert result.exponent == pytest.approx(0.5)
    assert isinstance(result.tail, ParametricTail)
    assert result.tail.q == pytest.approx(0.5)
    assert result.tail.K > 0
    assert any("C =" in line for line in result.provenance)


def test_martingale_recursion_slope_approaches_exponent() -> None:
    result = martingale_tail_recursion(FamilyAssumptions.homogeneous(2, unit_tail(2)))
    slope = log_log_slope(result.tail, 20.0, 100.0)
    assert slope == pytest.approx(0.5, rel=0.1)


def test_theorem1_envelope_dominates_the_recursion_at_every_node() -> None:
    grid = martingale_tail_recursion(FamilyAssumptions.homogeneous(2, unit_tail(2))).tail
    envelope = theorem1_envelope(QVector.homogeneous(2, 2)).tail
    assert np.all(envelope.evaluate(grid.x) >= grid.t * (1.0 - 1e-9))
    midpoints = 0.5 * (grid.x[1:] + grid.x[:-1])
    assert np.all(envelope.evaluate(midpoints) >= grid.evaluate(midpoints) * (1.0 - 1e-9))


def test_theorem2_and_theorem3_exponents() -> None:
    independent = theorem2_envelope(QVector.homogeneous(2, 2))
    assert independent.exponent == pytest.approx(2.0 / 3.0)
    assert any("fell back" in flag for flag in independent.flags)
    assert not any("not tracked" in flag for flag in independent.flags)
    lower = theorem3_lower_envelope(3, "inf")
    assert lower.exponent == pytest.approx(2.0 / 3.0)
    assert theorem3_lower_envelope(2, 1).exponent == pytest.approx(0.5)


def test_theorem2_envelope_dominates_the_independent_recursion() -> None:
    result = theorem2_envelope(QVector.homogeneous(2, "inf"), K=[1.0, 1.0])
    assert result.flags == ()
    assert any("C =" in line for line in result.provenance)
    assumptions = FamilyAssumptions.homogeneous(
        2, unit_tail("inf"), cramer=CramerProfile.bounded(1.0), independence="independent"
    )
    grid = independent_tail_recursion(assumptions).tail
    assert np.all(result.tail.evaluate(grid.x) >= grid.t * (1.0 - 1e-9))


def test_coordinate_scales_are_validated() -> None:
    qv = QVector.homogeneous(2, 2)
    assert coordinate_scales(qv, None) == [1.0, 1.0]
    with pytest.raises(DimensionMismatch):
        coordinate_scales(qv, [1.0])
    with pytest.raises(InvalidParameter):
        coordinate_scales(qv, [1.0, 0.0])


def test_single_coordinate_recursion_is_the_truncation() -> None:
    tail = unit_tail(2)
    result = martingale_tail_recursion(FamilyAssumptions(d=1, tails=(tail,)))
    xs = np.linspace(0.0, 6.0, 25)
    assert np.allclose(result.tail.evaluate(xs), truncation_operator_W(tail).evaluate(xs))
    assert eval_tail(result.tail, 0.0) == 1.0
    assert result.theorem == 4


def test_coordinate_order() -> None:
    outer = FamilyAssumptions.homogeneous(3, unit_tail(1))
    assert coordinate_order(outer) == [3, 2, 1]
    ascending = FamilyAssumptions(d=3, tails=outer.tails, order="ascending")
    assert coordinate_order(ascending) == [1, 2, 3]


def test_independent_recursion_never_exceeds_martingale() -> None:
    assumptions = FamilyAssumptions.homogeneous(
        2, unit_tail(2), cramer=CramerProfile.gaussian(1.0), independence="independent"
    )
    independent = independent_tail_recursion(assumptions)
    martingale = martingale_tail_recursion(assumptions)
    xs = np.linspace(0.0, 30.0, 61)
    assert np.all(independent.tail.evaluate(xs) <= martingale.tail.evaluate(xs) * (1.0 + 1e-9))
    assert not independent.flags


def test_independent_recursion_fallbacks_are_flagged() -> None:
    plain = independent_tail_recursion(FamilyAssumptions.homogeneous(1, unit_tail(2)))
    assert "independence not asserted" in plain.flags[0]
    no_profile = independent_tail_recursion(
        FamilyAssumptions.homogeneous(1, unit_tail(2), independence="independent")
    )
    assert "no Cramér profile" in no_profile.flags[0]


def test_martingale_moment_bound_examples() -> None:
    assert martingale_moment_bound(_moment_family(1), 2.0) == pytest.approx(2.0 * math.sqrt(2.0))
    assert martingale_moment_bound(_moment_family(2), 3.0) == pytest.approx(36.0)
    assert martingale_moment_bound(_moment_family(3), 2.0) == pytest.approx(9.0 * math.sqrt(2.0) * 8.0)


def test_independent_moment_bound_examples() -> None:
    p = math.e**2
    assert independent_moment_bound(_moment_family(1, "independent"), p) == pytest.approx(math.sqrt(2.0) * p / 2.0)
    assert independent_moment_bound(_moment_family(2, "independent"), 2.0) == pytest.approx(8.0 / math.log(2.0))


def test_independent_moments_are_smaller_for_large_orders() -> None:
    martingale = _moment_family(2)
    independent = _moment_family(2, "independent")
    for p in range(8, 21):
        assert independent_moment_bound(independent, p) < martingale_moment_bound(martingale, p)


def test_moment_bounds_reject_bad_inputs() -> None:
    with pytest.raises(InvalidParameter):
        martingale_moment_bound(_moment_family(1), 1.5)
    with pytest.raises(AssumptionViolated):
        independent_moment_bound(_moment_family(1), 3.0)
    with pytest.raises(MissingMoments):
        martingale_moment_bound(FamilyAssumptions.homogeneous(1, unit_tail(2)), 3.0)


def test_moment_envelopes() -> None:
    gaussian = MomentEnvelope(kind="gaussian")
    assert gaussian(2.0) == pytest.approx(1.0)
    assert gaussian(4.0) == pytest.approx(3.0**0.25)
    assert MomentEnvelope(kind="weibull", q=1.0)(2.0) == pytest.approx(math.sqrt(2.0))
    table = MomentEnvelope(kind="table", p_table=(2.0, 4.0), values=(1.0, 2.0))
    assert table(3.0) == pytest.approx(math.sqrt(2.0))
    with pytest.raises(MissingMoments):
        table(5.0)


def test_moment_curve_and_lookup() -> None:
    curve = moment_curve(_moment_family(1), moment_grid(None, 4))
    assert [p for p, _ in curve.moments] == [2.0, 3.0, 4.0]
    assert curve.moment_at(3.0) == pytest.approx(3.0 * math.sqrt(2.0))
    with pytest.raises(MissingMoments):
        curve.moment_at(5.0)


def test_markov_conversion_realizes_exponent_one_over_d() -> None:
    tail = moments_to_tail(lambda p: 4.0 * p**2, horizon=64)
    assert eval_tail(tail, 0.0) == 1.0
    assert log_log_slope(tail, 1e3, 1e4) == pytest.approx(0.5, rel=0.05)


def test_markov_conversion_reports_horizon(caplog: pytest.LogCaptureFixture) -> None:
    caplog.set_level(logging.INFO)
    moments_to_tail(lambda p: 1.0, horizon=4.0)
    assert "moment_horizon_exceeded" in caplog.text
    with pytest.raises(InvalidParameter):
        moments_to_tail(lambda p: 1.0, p_min=4.0, horizon=4.0)


def test_dispatch_routes_parametric_theorems() -> None:
    assert compute_bound(BoundRequest(theorem=2, q=[2.0], d=2)).exponent == pytest.approx(2.0 / 3.0)
    assert compute_bound(BoundRequest(theorem=3, q=[1.0], d=2)).exponent == pytest.approx(0.5)
    assert exponent_vector(BoundRequest(theorem=1, q=[2.0, "inf"])).d == 2
    with pytest.raises(InvalidParameter):
        exponent_vector(BoundRequest(theorem=1, q=[2.0, 2.0], d=3))
    with pytest.raises(InvalidParameter):
        compute_bound(BoundRequest(theorem=4))


def test_dispatch_moment_theorems() -> None:
    spec = FamilyAssumptionsSpec(
        d=1,
        tails=[ParametricTailSpec(q=2.0)],
        moments=[MomentEnvelopeSpec(kind="constant")],
    )
    moments = compute_bound(BoundRequest(theorem=6, mode="moment", assumptions=spec, p=[2.0]))
    assert moments.moments[0][1] == pytest.approx(2.0 * math.sqrt(2.0))
    with pytest.raises(AssumptionViolated):
        compute_bound(BoundRequest(theorem=7, mode="moment", assumptions=spec, p=[3.0]))
    tail = compute_bound(BoundRequest(theorem=6, assumptions=spec))
    assert tail.mode == "tail"
    assert tail.exponent == pytest.approx(1.0)
    assert tail.to_model().tail is not None


def test_martingale_recursion_starts_span_and_logs(
    monkeypatch: pytest.MonkeyPatch, caplog: pytest.LogCaptureFixture
) -> None:
    spans: list[str] = []

    class _Span:
        def set_attribute(self, _key: str, _value: object) -> None:
            return

        def record_exception(self, _error: Exception) -> None:
            return

        def set_status(self, _status: object) -> None:
            return

    @contextmanager
    def _fake_start_span(name: str, _attributes: dict[str, object] | None = None):
        spans.append(name)
        yield _Span()

    monkeypatch.setattr(recursion_mod, "start_span", _fake_start_span)
    caplog.set_level(logging.INFO)
    martingale_tail_recursion(FamilyAssumptions(d=1, tails=(unit_tail(1),)))
    assert spans == ["bounds.recursion.martingale"]
    assert '"event": "bound_constructed"' in caplog.text
