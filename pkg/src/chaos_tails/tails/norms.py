"""Orlicz-type norms recovered from a finite ladder of L^p moments."""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Literal, Sequence

import numpy as np

from chaos_tails.domain.errors import InvalidParameter, NonMonotoneMoments

NormFamily = Literal["Gq", "Gqr", "PsiBeta"]

LYAPUNOV_RTOL = 1e-9


@dataclass(frozen=True)
class NormEstimate:
    value: float
    argmax_p: float
    horizon: float


def norm_from_moments(
    p_values: Sequence[float] | np.ndarray,
    moments: Sequence[float] | np.ndarray,
    family: NormFamily,
    *,
    q: float = 2.0,
    r: float = 0.0,
    C: float = 1.0,
    beta: float = 1.0,
) -> NormEstimate:
    """Finite-horizon supremum of the weighted moment sequence.

    Gq weighs |η|_p by p^{-1/q}; Gqr uses p ≥ 2 only and adds log^{-r} p; PsiBeta weighs by
    exp(−C·p^β). The result is a lower estimate of the norm; `horizon` is the largest p used.
    """
    p = np.asarray(p_values, dtype=float)
    m = np.asarray(moments, dtype=float)
    if p.ndim != 1 or p.shape != m.shape or p.size == 0:
        raise InvalidParameter("p values and moments must be equal-length 1-D sequences")
    if np.any(p < 1) or np.any(~np.isfinite(m)) or np.any(m < 0):
        raise InvalidParameter("moments must be finite and nonnegative at p >= 1")
    if q <= 0:
        raise InvalidParameter(f"norm exponent q must be > 0, got {q}")

    order = np.argsort(p, kind="stable")
    p, m = p[order], m[order]
    drops = m[1:] < m[:-1] * (1.0 - LYAPUNOV_RTOL)
    if drops.any():
        at = float(p[1:][drops][0])
        raise NonMonotoneMoments(f"moment sequence decreases at p = {at:g}, violating Lyapunov ordering")

    if family == "Gq":
        weights = p ** (-1.0 / q) if math.isfinite(q) else np.ones_like(p)
    elif family == "Gqr":
        keep = p >= 2
        if not keep.any():
            raise InvalidParameter("the (q, r) norm needs moments at p >= 2")
        p, m = p[keep], m[keep]
        weights = (p ** (-1.0 / q) if math.isfinite(q) else np.ones_like(p)) * np.log(p) ** (-r)
    elif family == "PsiBeta":
        weights = np.exp(-C * p**beta)
    else:
        raise InvalidParameter(f"unknown norm family {family!r}")

    scores = m * weights
    best = int(np.argmax(scores))
    return NormEstimate(value=float(scores[best]), argmax_p=float(p[best]), horizon=float(p[-1]))
