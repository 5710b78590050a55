from __future__ import annotations

import math

import numpy as np
import pytest

from chaos_tails.domain.errors import Divergent
from chaos_tails.tails.cramer import CramerProfile
from chaos_tails.tails.functions import GridTail, ParametricTail, eval_tail, indicator_tail
from chaos_tails.tails.operators import (
    cramer_refine_Wbar,
    parametric_product,
    product_compose,
    tail_second_moment,
    truncation_envelope,
    truncation_operator_W,
)


def _exponential_second_moment(v: float) -> float:
    return (v * v + 2.0 * v + 2.0) * math.exp(-v)


def test_second_moment_of_bounded_tail_vanishes_beyond_bound() -> None:
    assert tail_second_moment(indicator_tail(1.0), 1.0) == 0.0
    assert tail_second_moment(indicator_tail(1.0), 3.0) == 0.0
    assert tail_second_moment(indicator_tail(1.0), 0.5) == pytest.approx(1.0)


def test_second_moment_of_exponential_tail() -> None:
    assert tail_second_moment(ParametricTail(q=1.0), 1e-12) == pytest.approx(2.0, rel=1e-9)
    assert tail_second_moment(ParametricTail(q=1.0), 1.5) == pytest.approx(_exponential_second_moment(1.5), rel=1e-9)


def test_second_moment_of_gaussian_type_tail() -> None:
    assert tail_second_moment(ParametricTail(q=2.0), 1.0) == pytest.approx(2.0 * math.exp(-1.0), rel=1e-9)


def test_second_moment_with_log_power_uses_quadrature() -> None:
    tail = ParametricTail(q=2.0, rho=-0.5)
    assert tail_second_moment(tail, 0.5) > tail_second_moment(ParametricTail(q=2.0), 0.5)


def test_second_moment_detects_heavy_grid_tail() -> None:
    heavy = GridTail(np.array([0.0, 1.0, 2.0]), np.array([1.0, 0.5, 0.4]))
    with pytest.raises(Divergent):
        tail_second_moment(heavy, 1.0)


def test_truncation_of_indicator_is_gaussian_envelope() -> None:
    w = truncation_operator_W(indicator_tail(1.0))
    xs = np.linspace(0.5, 8.0, 40)
    assert np.allclose(w.evaluate(xs), np.exp(-(xs**2) / 8.0), rtol=1e-3)
    assert eval_tail(w, 0.0) == 1.0


def test_truncation_respects_every_probe_level() -> None:
    tail = ParametricTail(q=1.0)
    w = truncation_operator_W(tail)
    values = w.evaluate(np.array([2.0, 5.0, 10.0, 20.0]))
    for x, value in zip([2.0, 5.0, 10.0, 20.0], values):
        for v0 in (0.5, 1.0, 2.0, 4.0, 8.0):
            probe = math.exp(-(x**2) / (8.0 * v0**2)) + 4.0 * _exponential_second_moment(v0) / x**2
            assert value <= min(1.0, probe) * (1.0 + 1e-3) + 1e-12


def test_truncation_output_is_a_valid_tail() -> None:
    w = truncation_operator_W(ParametricTail(q=1.0))
    xs = np.linspace(0.0, 60.0, 400)
    values = w.evaluate(xs)
    assert values[0] == 1.0
    assert np.all((values >= 0) & (values <= 1))
    assert np.all(np.diff(values) <= 1e-15)


def test_product_compose_is_symmetric() -> None:
    first = ParametricTail(q=1.0)
    second = ParametricTail(K=2.0, q=2.0)
    forward = product_compose(first, second)
    backward = product_compose(second, first)
    xs = np.geomspace(0.1, 50.0, 60)
    assert np.allclose(forward.evaluate(xs), backward.evaluate(xs), rtol=1e-9, atol=1e-300)


def test_product_compose_saturates_below_knee() -> None:
    composed = product_compose(ParametricTail(q=1.0), ParametricTail(q=1.0))
    assert eval_tail(composed, 0.0) == 1.0
    assert eval_tail(composed, 4.0) == 1.0


def test_parametric_product_dominates_numeric_composition() -> None:
    tail = ParametricTail(q=2.0)
    relaxed = parametric_product(tail, tail)
    assert (relaxed.q, relaxed.rho, relaxed.K, relaxed.Y) == (1.0, 0.0, 1.0, 8.0)
    composed = product_compose(tail, tail)
    xs = np.linspace(2.0, 30.0, 57)
    assert np.all(composed.evaluate(xs) <= relaxed.evaluate(xs) * (1.0 + 1e-3))


def test_parametric_product_exponents() -> None:
    assert parametric_product(ParametricTail(q=2.0), ParametricTail(q=3.0)).q == pytest.approx(1.2)
    assert parametric_product(ParametricTail(q=1.0), ParametricTail(q=1e6)).q == pytest.approx(1.0, rel=1e-5)
    mixed = parametric_product(ParametricTail(q=2.0, rho=1.0), ParametricTail(q=2.0, rho=-1.0))
    assert mixed.rho == 0.0


def test_cramer_refinement_never_exceeds_truncation() -> None:
    tail = indicator_tail(1.0)
    refined = cramer_refine_Wbar(tail, CramerProfile.gaussian(1.0))
    plain = truncation_operator_W(tail)
    xs = np.linspace(0.5, 6.0, 40)
    assert np.all(refined.evaluate(xs) <= plain.evaluate(xs) * (1.0 + 1e-9) + 1e-15)
    assert np.all(refined.evaluate(xs) <= np.exp(-(xs**2) / 2.0) * (1.0 + 1e-3) + 1e-15)


def test_cramer_refinement_without_profile_is_truncation() -> None:
    tail = ParametricTail(q=1.0)
    plain = truncation_operator_W(tail)
    xs = np.linspace(0.5, 20.0, 30)
    for profile in (None, CramerProfile.none()):
        assert np.allclose(cramer_refine_Wbar(tail, profile).evaluate(xs), plain.evaluate(xs))


def test_truncation_envelope_closed_form() -> None:
    envelope = truncation_envelope(ParametricTail(q=2.0))
    assert envelope.tail.q == pytest.approx(1.0)
    assert envelope.tail.K == pytest.approx(1.0)
    assert envelope.beta == pytest.approx(0.5, rel=1e-6)
    assert envelope.tail.Y == pytest.approx(2.0, rel=1e-6)
    assert envelope.flags == ()


def test_truncation_envelope_falls_back_when_beta_is_unbounded() -> None:
    envelope = truncation_envelope(ParametricTail(q=1.0))
    assert envelope.beta == pytest.approx(4.0 / math.e)
    assert any("closed form" in flag for flag in envelope.flags)
    assert envelope.tail.q == pytest.approx(2.0 / 3.0)
