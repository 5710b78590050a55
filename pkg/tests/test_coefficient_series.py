from __future__ import annotations

import math

import numpy as np
import pytest

from chaos_tails.bounds.dispatch import compute_bound
from chaos_tails.domain.errors import DimensionMismatch, InvalidParameter, NonSummable
from chaos_tails.domain.models import BoundRequest, DenseFieldSpec, FieldEntry, PowerFieldSpec
from chaos_tails.exponents import QVector
from chaos_tails.series.bounds import (
    absolute_product_tail,
    convex_average_tail,
    diagonal_free_variance,
    normalized_field,
    normalized_sum_bounds,
    split_profile,
    theorem13_tail,
    theorem14_tail,
    theorem15_moment,
    theorem16_moment,
)
from chaos_tails.series.fields import DenseField, PowerLawField, SeparableField, field_from_spec, index_tuples
from chaos_tails.tails.functions import eval_tail

ORDERS = np.array([8.0, 12.0, 16.0, 24.0, 32.0])


def _growth(values: list[float], abscissa: np.ndarray) -> float:
    slope, _ = np.polyfit(np.log(abscissa), np.log(values), 1)
    return float(slope)


def test_split_profile_examples() -> None:
    field = DenseField.from_sequence([1.0, 0.5, 0.25])
    middle = split_profile(field, 0.5)
    assert (middle.a1, middle.a2) == (pytest.approx(0.75), pytest.approx(1.0))
    assert middle.head_l1 == pytest.approx(1.0)
    assert middle.tail_l2 == pytest.approx(math.sqrt(0.3125))
    top = split_profile(field, 10.0)
    assert (top.a1, top.a2) == (pytest.approx(1.75), 0.0)
    bottom = split_profile(field, 0.1)
    assert (bottom.a1, bottom.a2) == (0.0, pytest.approx(math.sqrt(1.3125)))
    with pytest.raises(InvalidParameter):
        split_profile(field, 0.0)


def test_split_profile_is_monotone_in_threshold() -> None:
    rng = np.random.default_rng(11)
    field = DenseField.from_sequence(rng.normal(size=40))
    lams = np.geomspace(1e-3, 10.0, 60)
    profiles = [split_profile(field, lam) for lam in lams]
    a1 = np.array([profile.a1 for profile in profiles])
    a2 = np.array([profile.a2 for profile in profiles])
    assert np.all(np.diff(a1) >= 0)
    assert np.all(np.diff(a2) <= 0)


def test_dense_field_validation() -> None:
    with pytest.raises(InvalidParameter):
        DenseField.from_entries(2, 3, {(2, 1): 1.0})
    with pytest.raises(InvalidParameter):
        DenseField.from_entries(2, 3, {(1, 4): 1.0})
    with pytest.raises(DimensionMismatch):
        DenseField.from_entries(2, 3, {(1,): 1.0})
    spec = DenseFieldSpec(d=2, n=3, entries=[FieldEntry(I=[1, 2], b=1.0), FieldEntry(I=[1, 2], b=2.0)])
    with pytest.raises(InvalidParameter):
        field_from_spec(spec)


def test_separable_square_sum_matches_enumeration() -> None:
    rng = np.random.default_rng(3)
    field = SeparableField(rng.uniform(0.5, 1.5, size=(3, 7)))
    _, values = field.dense()
    assert field.square_sum() == pytest.approx(float(np.sum(values**2)), rel=1e-12)
    assert field.normalized().square_sum() == pytest.approx(1.0, abs=1e-12)
    assert SeparableField.uniform(2, 6).square_sum() == pytest.approx(1.0, abs=1e-12)
    assert index_tuples(5, 2).shape == (10, 2)


def test_convex_average_tail_of_bounded_products() -> None:
    single = absolute_product_tail(QVector.of(["inf"]))
    average = convex_average_tail(single)
    assert eval_tail(average, 1.0) == 1.0
    assert eval_tail(average, 1.5) == pytest.approx(1.5**-64, rel=1e-3)
    assert eval_tail(average, 2.5) <= 1e-18

    pair = absolute_product_tail(QVector.homogeneous(2, 2))
    gaussian_pair = convex_average_tail(pair)
    xs = np.linspace(0.0, 30.0, 61)
    values = gaussian_pair.evaluate(xs)
    assert np.all(np.diff(values) <= 1e-15)
    assert values[-1] < 1e-3


def test_series_tail_of_single_bounded_coefficient() -> None:
    result = theorem13_tail(DenseField.from_sequence([1.0]), QVector.of(["inf"]))
    assert eval_tail(result.tail, 0.0) == 1.0
    assert eval_tail(result.tail, 0.9) >= 0.5
    assert eval_tail(result.tail, 3.0) <= 1e-10
    values = result.tail.evaluate(np.linspace(0.0, 4.0, 41))
    assert np.all(np.diff(values) <= 1e-15)
    assert result.flags == ()
    assert any("C1 =" in line and "C2 =" in line for line in result.provenance)


def test_independent_series_tail_never_exceeds_martingale() -> None:
    field = DenseField.from_entries(2, 4, {(1, 2): 0.8, (1, 3): 0.4, (2, 4): 0.3, (3, 4): 0.2})
    qv = QVector.homogeneous(2, 2)
    martingale = theorem13_tail(field, qv)
    independent = theorem14_tail(field, qv)
    xs = np.linspace(0.0, 10.0, 41)
    martingale_values = martingale.tail.evaluate(xs)
    independent_values = independent.tail.evaluate(xs)
    assert np.all(independent_values <= martingale_values * (1.0 + 1e-9) + 1e-15)
    assert np.all(np.diff(martingale_values) <= 1e-15)
    assert martingale.exponent == pytest.approx(0.5)
    assert independent.exponent == pytest.approx(2.0 / 3.0)
    assert any("orientation" in line for line in martingale.provenance)


def test_series_tail_checks_dimensions() -> None:
    with pytest.raises(DimensionMismatch):
        theorem13_tail(DenseField.from_sequence([1.0, 0.5]), QVector.homogeneous(2, 2))


def test_moment_series_on_dense_field() -> None:
    field = DenseField.from_sequence([1.0, 0.5, 0.25])
    for p in (4.0, 8.0, 16.0):
        independent = theorem15_moment(field, 1, p)
        martingale = theorem16_moment(field, 1, p)
        assert independent <= martingale + 1e-12
        assert martingale <= 1.75 + 1e-12
    with pytest.raises(InvalidParameter):
        theorem16_moment(field, 1, 1.0)


def test_power_law_field_construction() -> None:
    with pytest.raises(NonSummable):
        PowerLawField(alpha=1.0, d=2)
    with pytest.raises(InvalidParameter):
        PowerLawField(alpha=1.5, d=2, radius=2.0)
    finite = PowerLawField(alpha=1.25, d=2, n=10)
    _, values = finite.dense()
    assert values.size == 45
    assert split_profile(finite, 10.0).a1 == pytest.approx(float(np.sum(values)))
    assert finite.remainder_ceiling == 0.0


def test_subcritical_power_law_moment_growth() -> None:
    d, alpha = 2, 1.25
    field = PowerLawField(alpha=alpha, d=d)
    martingale = [theorem16_moment(field, d, p) for p in ORDERS]
    assert _growth(martingale, ORDERS) == pytest.approx(2.0 * (d - alpha), rel=0.15)
    independent = [theorem15_moment(field, d, p) for p in ORDERS]
    weights = ORDERS**d / np.log(ORDERS)
    assert _growth(independent, weights) == pytest.approx(2.0 * (d - alpha) / d, rel=0.15)


def test_critical_power_law_grows_slowly() -> None:
    field = PowerLawField(alpha=2.0, d=2)
    values = [theorem16_moment(field, 2, p) for p in ORDERS]
    assert np.all(np.diff(values) >= -1e-6 * max(values))
    assert _growth(values, ORDERS) < 1.0


def test_summable_power_law_moments_stay_bounded() -> None:
    request = BoundRequest(
        theorem=16,
        mode="moment",
        field=PowerFieldSpec(rule="power", alpha=2.5, d=2),
        p=[4.0, 8.0, 16.0, 32.0],
    )
    result = compute_bound(request)
    values = [bound for _, bound in result.moments]
    ceiling = split_profile(PowerLawField(alpha=2.5, d=2), 10.0).a1
    assert np.all(np.diff(values) >= -1e-6 * max(values))
    assert max(values) <= ceiling * (1.0 + 1e-9)
    assert any("enumerated" in line for line in result.provenance)


def test_normalized_field_has_unit_square_sum() -> None:
    rng = np.random.default_rng(5)
    field = normalized_field(rng.uniform(0.5, 2.0, size=(6, 2)))
    assert field.square_sum() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(InvalidParameter):
        normalized_field(np.array([[1.0, 0.0], [1.0, 1.0]]))


def test_normalized_sum_bound_modes() -> None:
    variances = np.full((5, 2), 2.0)
    qv = QVector.homogeneous(2, 2)
    martingale = normalized_sum_bounds(variances, qv, "martingale_tail")
    assert martingale.exponent == pytest.approx(0.5)
    independent = normalized_sum_bounds(variances, qv, "independent_tail")
    assert independent.exponent == pytest.approx(2.0 / 3.0)
    moments = normalized_sum_bounds(variances, qv, "martingale_moment", p_values=(2.0,))
    assert moments.moments[0][1] == pytest.approx(16.0)
    assert any("unit moment envelopes" in flag for flag in moments.flags)
    assert "normalized field" in moments.provenance[-1]
    with pytest.raises(InvalidParameter):
        normalized_sum_bounds(variances, qv, "bogus")  # type: ignore[arg-type]


def test_diagonal_free_variance() -> None:
    field = SeparableField.uniform(2, 4)
    assert diagonal_free_variance(field, np.ones((4, 2))) == pytest.approx(1.0)
    assert diagonal_free_variance(field, np.full((4, 2), 2.0)) == pytest.approx(4.0)
    with pytest.raises(DimensionMismatch):
        diagonal_free_variance(field, np.ones((3, 2)))
