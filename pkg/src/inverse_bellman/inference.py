"""Recover deterministic dynamics from a value table.

Rearranging the Bellman equation for a deterministic successor gives the
*scanned value* ``(Q(s, a) - r(s, a)) / gamma``, which equals the state value
of ``f(s, a)``.  Looking that value up in the state-value vector recovers the
successor; level sets and their intersections handle tables where the lookup
is not unique.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import FrozenSet, Iterable

import numpy as np

from .exceptions import DimensionError, ValidationError
from .gridworld import GridSpec
from .mdp import Selector, TabularMDP, ValueTable, state_values

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class InferenceResult:
    predicted_state: int
    scanned_value: float
    value_distance: float
    runner_up_margin: float
    ambiguous: bool


@dataclass(frozen=True)
class InferredModel:
    """Predicted successor for every ``(state, action)`` pair, plus diagnostics."""

    next_state: np.ndarray
    scanned: np.ndarray
    value_distance: np.ndarray
    runner_up_margin: np.ndarray
    ambiguous: np.ndarray

    @property
    def shape(self):
        return self.next_state.shape

    def per_pair(self, s: int, a: int) -> InferenceResult:
        return InferenceResult(
            int(self.next_state[s, a]),
            float(self.scanned[s, a]),
            float(self.value_distance[s, a]),
            float(self.runner_up_margin[s, a]),
            bool(self.ambiguous[s, a]),
        )


@dataclass(frozen=True)
class LevelSet:
    members: FrozenSet[int]
    center_value: float
    tolerance: float


@dataclass(frozen=True)
class LevelSetIntersection:
    members: FrozenSet[int]
    empty: bool


def _check_gamma(gamma):
    if not 0.0 < gamma < 1.0:
        raise ValidationError(f"inference needs gamma in (0, 1), got {gamma}")


def scanned_value(q: ValueTable, mdp: TabularMDP, s: int, a: int) -> float:
    _check_gamma(mdp.gamma)
    if not (0 <= s < mdp.num_states and 0 <= a < mdp.num_actions):
        raise ValidationError(f"invalid state-action pair ({s}, {a})")
    return (float(q.q[s, a]) - float(mdp.reward[s, a])) / mdp.gamma


def scanned_values(q: ValueTable, mdp: TabularMDP) -> np.ndarray:
    """Scanned value for every ``(s, a)``; same arithmetic as :func:`scanned_value`."""
    _check_gamma(mdp.gamma)
    if q.shape != mdp.shape:
        raise DimensionError(f"q shape {q.shape} does not match MDP shape {mdp.shape}")
    return (q.q - mdp.reward) / mdp.gamma


def _nearest(v: np.ndarray, scanned: np.ndarray):
    # distances: (..., S); argmin returns the first (lowest-index) minimiser
    dist = np.abs(v - scanned[..., None])
    best = np.argmin(dist, axis=-1)
    nearest = np.take_along_axis(dist, best[..., None], axis=-1)[..., 0]
    if v.size > 1:
        second = np.partition(dist, 1, axis=-1)[..., 1]
        margin = second - nearest
    else:
        margin = np.full(nearest.shape, np.inf)
    return best, nearest, margin


def infer_next_state(v, scanned: float, ambiguity_margin: float = 0.0) -> InferenceResult:
    """Pick the state whose value is closest to ``scanned``.

    Equidistant candidates resolve to the lowest index and are flagged
    ambiguous, since their margin is zero.
    """
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise ValidationError("empty value vector")
    if not ambiguity_margin >= 0:
        raise ValidationError("ambiguity_margin must be nonnegative")
    best, nearest, margin = _nearest(v, np.asarray(float(scanned)))
    return InferenceResult(
        int(best), float(scanned), float(nearest), float(margin),
        bool(margin <= ambiguity_margin),
    )


def infer_model(q: ValueTable, mdp: TabularMDP, selector: Selector = "greedy",
                ambiguity_margin: float | None = None) -> InferredModel:
    """Infer ``f(s, a)`` for all pairs from ``q``, ``mdp.reward`` and ``mdp.gamma``.

    The transition table of ``mdp`` is never read.  By default a prediction is
    flagged ambiguous when its runner-up margin is within ``2 * eps / gamma``,
    the width of the scanned-value uncertainty band for a table certified to
    ``eps``.
    """
    scanned = scanned_values(q, mdp)
    if ambiguity_margin is None:
        eps = q.certified_epsilon or 0.0
        ambiguity_margin = 2.0 * eps / mdp.gamma
    v = state_values(q, selector)
    best, nearest, margin = _nearest(v, scanned)
    return InferredModel(best, scanned, nearest, margin, margin <= ambiguity_margin)


def model_accuracy(model: InferredModel, mdp: TabularMDP) -> float:
    if model.shape != mdp.shape:
        raise ValidationError(f"model shape {model.shape} does not match MDP {mdp.shape}")
    return float(np.mean(model.next_state == mdp.transition))


def level_set(v, center: float, tolerance: float) -> LevelSet:
    """States whose value lies within ``tolerance`` of ``center``."""
    if not tolerance >= 0:
        raise ValidationError("tolerance must be nonnegative")
    v = np.asarray(v, dtype=float).ravel()
    members = frozenset(int(s) for s in np.flatnonzero(np.abs(v - center) <= tolerance))
    return LevelSet(members, float(center), float(tolerance))


def intersect_level_sets(sets: Iterable[LevelSet]) -> LevelSetIntersection:
    """Intersect level sets from several value functions with shared dynamics.

    An empty result is returned as-is and flagged; it means the value
    functions disagree or the tolerances were too tight.
    """
    sets = list(sets)
    if not sets:
        raise ValidationError("need at least one level set")
    members = frozenset.intersection(*(ls.members for ls in sets))
    if not members:
        logger.warning("level-set intersection is empty (%d sets)", len(sets))
    return LevelSetIntersection(members, not members)


def prune_by_locality(ls: LevelSet, current: int, radius: int,
                      geometry: GridSpec) -> FrozenSet[int]:
    """Keep members within Manhattan distance ``radius`` of ``current``."""
    if radius < 0:
        raise ValidationError("radius must be nonnegative")
    n = geometry.num_states
    if any(not 0 <= s < n for s in ls.members) or not 0 <= current < n:
        raise ValidationError("level set contains states outside the grid")
    return frozenset(s for s in ls.members if geometry.manhattan(s, current) <= radius)


def export_model_rows(model: InferredModel, mdp: TabularMDP | None = None):
    """Rows ``(state, action, predicted_next, true_next, value_distance, ambiguous)``.

    ``true_next`` is ``None`` when no reference MDP is given.
    """
    num_states, num_actions = model.shape
    for s in range(num_states):
        for a in range(num_actions):
            true_next = None if mdp is None else int(mdp.transition[s, a])
            yield (s, a, int(model.next_state[s, a]), true_next,
                   float(model.value_distance[s, a]), bool(model.ambiguous[s, a]))
