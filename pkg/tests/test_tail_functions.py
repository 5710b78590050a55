from __future__ import annotations

import math

import numpy as np
import pytest

from chaos_tails.domain.errors import InvalidTail
from chaos_tails.domain.models import GridTailSpec, ParametricTailSpec
from chaos_tails.tails.functions import (
    GridTail,
    ParametricTail,
    eval_tail,
    fit_parametric_envelope,
    indicator_tail,
    log_term_offset,
    step_tail,
    tail_from_spec,
    tail_minimum,
    tail_mixture,
    to_grid,
)


def test_parametric_tail_is_one_at_zero() -> None:
    assert eval_tail(ParametricTail(Y=1.0, K=1.0, q=2.0), 0.0) == 1.0


def test_parametric_tail_closed_form_value() -> None:
    assert eval_tail(ParametricTail(Y=1.0, K=1.0, q=1.0), math.log(4.0)) == pytest.approx(0.25, rel=1e-12)


def test_grid_tail_hits_its_nodes() -> None:
    grid = GridTail(np.array([0.0, 1.0, 2.0]), np.array([1.0, 0.5, 0.25]))
    assert eval_tail(grid, 2.0) == pytest.approx(0.25, rel=1e-12)
    assert eval_tail(grid, 1.0) == pytest.approx(0.5, rel=1e-12)
    assert eval_tail(grid, 0.0) == 1.0


def test_grid_tail_extrapolates_last_slope() -> None:
    grid = GridTail(np.array([0.0, 1.0, 3.0]), np.array([1.0, 0.5, 0.125]))
    slope = grid.tail_slope()
    assert slope is not None and slope < 0
    expected = 0.125 * ((1.0 + 7.0) / (1.0 + 3.0)) ** slope
    assert eval_tail(grid, 7.0) == pytest.approx(expected, rel=1e-12)


def test_parametric_log_power_uses_offset() -> None:
    assert log_term_offset(2.0, -1.0) == 1.0
    assert log_term_offset(2.0, 0.5) == pytest.approx(math.exp(2.0))
    tail = ParametricTail(Y=1.0, K=1.0, q=1.0, rho=0.5)
    x = 3.0
    assert eval_tail(tail, x) == pytest.approx(math.exp(-x * math.log(math.e + x) ** 0.5), rel=1e-12)


def test_parametric_prefactor_clips_at_one() -> None:
    tail = ParametricTail(Y=4.0, K=1.0, q=2.0)
    knee = tail.clip_point()
    assert knee == pytest.approx(math.sqrt(math.log(4.0)))
    assert eval_tail(tail, 0.5 * knee) == 1.0
    assert eval_tail(tail, 2.0 * knee) < 1.0


@pytest.mark.parametrize(
    "kwargs",
    [{"Y": 0.5}, {"K": 0.0}, {"q": -1.0}, {"q": 1.0, "rho": -2.0}],
)
def test_parametric_tail_rejects_invalid_parameters(kwargs: dict[str, float]) -> None:
    with pytest.raises(InvalidTail):
        ParametricTail(**kwargs)


@pytest.mark.parametrize(
    "x, t",
    [
        ([0.5, 1.0], [1.0, 0.5]),
        ([0.0, 1.0, 1.0], [1.0, 0.5, 0.2]),
        ([0.0, 1.0], [0.9, 0.5]),
        ([0.0, 1.0, 2.0], [1.0, 0.2, 0.5]),
    ],
)
def test_grid_tail_rejects_invalid_tables(x: list[float], t: list[float]) -> None:
    with pytest.raises(InvalidTail):
        GridTail(np.array(x), np.array(t))


def test_eval_tail_rejects_negative_levels() -> None:
    with pytest.raises(InvalidTail):
        eval_tail(ParametricTail(), -1.0)


def test_indicator_tail_is_an_exact_step() -> None:
    tail = indicator_tail(2.0)
    assert eval_tail(tail, 1.999) == 1.0
    assert eval_tail(tail, 2.0) == 0.0
    assert eval_tail(tail, 10.0) == 0.0


def test_step_tail_of_rademacher_variable() -> None:
    tail = step_tail([-1.0, 1.0], [0.5, 0.5])
    assert eval_tail(tail, 0.0) == 1.0
    assert eval_tail(tail, 0.5) == pytest.approx(0.5)
    assert eval_tail(tail, 1.0) == 0.0


def test_step_tail_of_asymmetric_variable() -> None:
    tail = step_tail([-2.0, 1.0, 3.0], [0.2, 0.5, 0.3])
    assert eval_tail(tail, 0.5) == pytest.approx(0.8)
    assert eval_tail(tail, 1.5) == pytest.approx(0.3)
    assert eval_tail(tail, 2.5) == pytest.approx(0.3)
    assert eval_tail(tail, 3.0) == 0.0


def test_tail_minimum_is_pointwise() -> None:
    first = ParametricTail(q=1.0)
    second = ParametricTail(Y=2.0, q=2.0)
    low = tail_minimum(first, second)
    xs = np.linspace(0.1, 5.0, 50)
    expected = np.minimum(first.evaluate(xs), second.evaluate(xs))
    assert np.all(low.evaluate(xs) <= expected * (1.0 + 1e-3) + 1e-12)
    assert np.all(np.diff(low.evaluate(xs)) <= 0)


def test_tail_mixture_averages_and_validates_weights() -> None:
    mixed = tail_mixture([indicator_tail(1.0), indicator_tail(2.0)], [0.25, 0.75])
    assert eval_tail(mixed, 1.5) == pytest.approx(0.75)
    with pytest.raises(InvalidTail):
        tail_mixture([indicator_tail(1.0)], [0.5])


def test_to_grid_tracks_parametric_tail() -> None:
    tail = ParametricTail(q=2.0)
    grid = to_grid(tail)
    assert grid.x[0] == 0.0 and grid.t[0] == 1.0
    assert grid.t[-1] <= 1e-18
    xs = np.linspace(0.5, 4.0, 20)
    assert np.allclose(grid.evaluate(xs), tail.evaluate(xs), rtol=1e-3)


def test_tail_spec_round_trip_keeps_values() -> None:
    parametric = tail_from_spec(ParametricTailSpec(Y=2.0, K=3.0, q=1.5, rho=0.0))
    assert isinstance(parametric, ParametricTail)
    assert parametric.to_spec().model_dump() == {"repr": "parametric", "Y": 2.0, "K": 3.0, "q": 1.5, "rho": 0.0}
    grid = tail_from_spec(GridTailSpec(x=[0.0, 1.0], t=[1.0, 0.0]))
    assert eval_tail(grid, 0.5) == 1.0


def _assert_dominates(envelope: ParametricTail, grid: GridTail) -> None:
    midpoints = 0.5 * (grid.x[1:] + grid.x[:-1])
    assert np.all(envelope.evaluate(grid.x) >= grid.t * (1.0 - 1e-9))
    assert np.all(envelope.evaluate(midpoints) >= grid.evaluate(midpoints) * (1.0 - 1e-9))


def test_fitted_envelope_recovers_the_scale_and_dominates_between_nodes() -> None:
    grid = to_grid(ParametricTail(K=2.0, q=2.0))
    envelope, C = fit_parametric_envelope(grid, 2.0)
    assert C == pytest.approx(2.0, rel=1e-6)
    assert envelope.Y >= 1.0
    _assert_dominates(envelope, grid)

    scaled, C_scaled = fit_parametric_envelope(grid, 2.0, scale=4.0)
    assert C_scaled == pytest.approx(0.5, rel=1e-6)
    assert scaled.K == pytest.approx(envelope.K)


def test_fitted_envelope_of_indicator_lifts_the_prefactor() -> None:
    envelope, C = fit_parametric_envelope(indicator_tail(1.0), 2.0)
    assert C == 1.0
    assert envelope.Y == pytest.approx(math.e)
    assert eval_tail(envelope, 0.999) == 1.0


def test_fitted_envelope_with_log_power() -> None:
    grid = to_grid(ParametricTail(K=2.0, q=1.0, rho=0.5))
    envelope, C = fit_parametric_envelope(grid, 1.0, rho=0.5)
    assert C == pytest.approx(2.0, rel=1e-6)
    assert envelope.rho == 0.5
    _assert_dominates(envelope, grid)
