from __future__ import annotations

from abc import ABC, abstractmethod
from typing import TYPE_CHECKING

import numpy as np
from numpy.typing import ArrayLike

if TYPE_CHECKING:
    from chaos_tails.domain.models import TailSpec, VerificationReport


class TailFunction(ABC):
    """A right-continuous nonincreasing bound on max(P(τ > x), P(τ < −x))."""

    @abstractmethod
    def evaluate(self, x: ArrayLike) -> np.ndarray:
        raise NotImplementedError

    @property
    @abstractmethod
    def scale(self) -> float:
        raise NotImplementedError

    @abstractmethod
    def to_spec(self) -> TailSpec:
        raise NotImplementedError

    def __call__(self, x: ArrayLike) -> np.ndarray:
        return self.evaluate(x)


class CoefficientField(ABC):
    """Coefficients b(I) over strictly increasing index tuples I = (i_1 < … < i_d)."""

    d: int

    @abstractmethod
    def magnitudes(self) -> np.ndarray:
        """Enumerated nonzero |b(I)| in ascending order, with multiplicity."""
        raise NotImplementedError

    @abstractmethod
    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        """(index tuples shaped (C, d), zero-based; values shaped (C,))."""
        raise NotImplementedError

    def remainder(self, lam: float) -> tuple[float, float, float, float]:
        """Bounds on the coefficients that magnitudes() leaves out.

        Returns (ℓ¹ mass at or below lam, squared ℓ² mass at or below lam, ℓ¹ mass above lam,
        squared ℓ² mass above lam). Fully enumerated fields have nothing left over.
        """
        return 0.0, 0.0, 0.0, 0.0

    @property
    def remainder_ceiling(self) -> float:
        """Largest |b(I)| outside the enumerated part; 0 when every coefficient is enumerated."""
        return 0.0


class ReportStore(ABC):
    @abstractmethod
    def save_report(self, report: VerificationReport) -> str:
        raise NotImplementedError

    @abstractmethod
    def get_report(self, campaign_id: str) -> VerificationReport | None:
        raise NotImplementedError

    @abstractmethod
    def list_reports(self) -> list[str]:
        raise NotImplementedError
