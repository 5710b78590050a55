from __future__ import annotations

import numpy as np
import pytest

from chaos_tails.domain.errors import InvalidParameter, NonMonotoneMoments
from chaos_tails.tails.norms import norm_from_moments


def test_gaussian_like_moments_have_unit_norm() -> None:
    p = np.arange(1, 17, dtype=float)
    estimate = norm_from_moments(p, np.sqrt(p), "Gq", q=2.0)
    assert estimate.value == pytest.approx(1.0)
    assert estimate.horizon == 16.0


def test_constant_moments_peak_at_first_order() -> None:
    p = np.arange(1, 17, dtype=float)
    estimate = norm_from_moments(p, np.ones_like(p), "Gq", q=2.0)
    assert estimate.value == pytest.approx(1.0)
    assert estimate.argmax_p == 1.0


def test_linear_moments_cancel_for_exponential_class() -> None:
    p = np.arange(1, 11, dtype=float)
    assert norm_from_moments(p, p, "Gq", q=1.0).value == pytest.approx(1.0)


def test_log_refined_norm_skips_orders_below_two() -> None:
    p = np.array([1.0, 2.0, 4.0, 8.0])
    estimate = norm_from_moments(p, np.sqrt(p), "Gqr", q=2.0, r=1.0)
    assert estimate.argmax_p == 2.0
    assert estimate.value == pytest.approx(1.0 / np.log(2.0))


def test_exponential_weight_family() -> None:
    p = np.array([1.0, 2.0, 3.0])
    estimate = norm_from_moments(p, np.exp(p), "PsiBeta", C=1.0, beta=1.0)
    assert estimate.value == pytest.approx(1.0)


def test_lyapunov_violation_is_rejected() -> None:
    with pytest.raises(NonMonotoneMoments):
        norm_from_moments([2.0, 3.0, 4.0], [1.0, 0.9, 1.2], "Gq")


def test_invalid_inputs_are_rejected() -> None:
    with pytest.raises(InvalidParameter):
        norm_from_moments([2.0, 3.0], [1.0], "Gq")
    with pytest.raises(InvalidParameter):
        norm_from_moments([0.5], [1.0], "Gq")
    with pytest.raises(InvalidParameter):
        norm_from_moments([1.0], [1.0], "Gqr")
