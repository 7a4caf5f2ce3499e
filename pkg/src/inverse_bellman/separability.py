"""Minimum state-value gaps and the identifiability threshold they imply."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .exceptions import ValidationError


@dataclass(frozen=True)
class SeparabilityReport:
    """Smallest pairwise gap of a state-value vector.

    ``threshold`` is only filled in when a discount factor is known; it is the
    largest value error (exclusive) that still guarantees identifiability.
    """

    delta: float
    argpair: Tuple[int, int]
    threshold: Optional[float] = None
    gamma: Optional[float] = None

    @property
    def separable(self) -> bool:
        return self.delta > 0.0

    def identifiable_at(self, epsilon: float) -> bool:
        if self.gamma is None:
            raise ValidationError("report carries no discount factor")
        return is_identifiable(self.delta, epsilon, self.gamma)


def value_gap(v) -> SeparabilityReport:
    """Minimum ``|v[s] - v[x]|`` over distinct pairs.

    Ties between pairs are resolved toward the lexicographically smallest
    ``(s, x)`` with ``s < x``.
    """
    v = np.asarray(v, dtype=float).ravel()
    if v.size < 2:
        raise ValidationError("value_gap needs at least two states")
    # stable sort: within equal values, indices stay ascending, so adjacent
    # pairs already contain the lexicographic minimum
    order = np.argsort(v, kind="stable")
    diffs = np.diff(v[order])
    delta = float(diffs.min())
    hits = np.flatnonzero(diffs == delta)
    pairs = [tuple(sorted((int(order[i]), int(order[i + 1])))) for i in hits]
    return SeparabilityReport(delta=delta, argpair=min(pairs))


def _check_delta_gamma(delta, gamma):
    if not delta > 0.0:
        raise ValidationError(f"delta must be positive, got {delta}")
    if not 0.0 < gamma < 1.0:
        raise ValidationError(f"gamma must lie in (0, 1), got {gamma}")


def identifiability_threshold(delta: float, gamma: float) -> float:
    """Critical accuracy ``delta / (2/gamma + 2)``."""
    _check_delta_gamma(delta, gamma)
    return delta / (2.0 / gamma + 2.0)


def is_identifiable(delta: float, epsilon: float, gamma: float) -> bool:
    if not epsilon >= 0.0:
        raise ValidationError("epsilon must be nonnegative")
    return epsilon < identifiability_threshold(delta, gamma)


def perturbed_gap_lower_bound(delta: float, epsilon: float) -> float:
    """Worst-case gap ``delta - 2*epsilon`` left after an epsilon-perturbation.

    Negative values mean two states may swap order.
    """
    return delta - 2.0 * epsilon


def separability_report(v, gamma: float) -> SeparabilityReport:
    gap = value_gap(v)
    threshold = identifiability_threshold(gap.delta, gamma) if gap.delta > 0 else 0.0
    return SeparabilityReport(gap.delta, gap.argpair, threshold, float(gamma))
