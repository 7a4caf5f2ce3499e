"""Empty N x N gridworlds with random state rewards.

States are indexed row-major, ``s = row * N + col``.  Actions are
``[north, south, east, west]``; a move off the grid leaves the agent in place.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .exceptions import SearchFailureError, ValidationError
from .mdp import TabularMDP, iterate_to_targets
from .separability import value_gap

ACTIONS = ("north", "south", "east", "west")
_MOVES = ((-1, 0), (1, 0), (0, 1), (0, -1))

REFERENCE_EPSILON = 1e-12


@dataclass(frozen=True)
class GridSpec:
    side: int
    actions: Tuple[str, ...] = ACTIONS

    def __post_init__(self):
        if int(self.side) != self.side or self.side < 1:
            raise ValidationError(f"side must be a positive integer, got {self.side}")
        if tuple(self.actions) != ACTIONS:
            raise ValidationError("a grid has exactly the four cardinal actions")

    @property
    def num_states(self) -> int:
        return self.side * self.side

    def coords(self, state: int) -> Tuple[int, int]:
        return divmod(int(state), self.side)

    def index(self, row: int, col: int) -> int:
        return row * self.side + col

    def manhattan(self, s1: int, s2: int) -> int:
        (r1, c1), (r2, c2) = self.coords(s1), self.coords(s2)
        return abs(r1 - r2) + abs(c1 - c2)


@dataclass(frozen=True)
class RewardSearchResult:
    reward: np.ndarray
    achieved_delta: float
    attempts: int
    seed: int


def grid_transitions(side: int) -> np.ndarray:
    spec = GridSpec(side)
    rows, cols = np.divmod(np.arange(spec.num_states), side)
    table = np.empty((spec.num_states, len(ACTIONS)), dtype=np.int64)
    for a, (dr, dc) in enumerate(_MOVES):
        r = np.clip(rows + dr, 0, side - 1)
        c = np.clip(cols + dc, 0, side - 1)
        table[:, a] = r * side + c
    return table


def make_empty_grid(side: int, gamma: float) -> TabularMDP:
    transition = grid_transitions(side)
    return TabularMDP(transition, np.zeros(transition.shape), gamma)


def sample_reward(side: int, seed: int) -> np.ndarray:
    """``side**2`` i.i.d. uniform rewards strictly inside ``(-1, 1)``."""
    GridSpec(side)
    rng = np.random.default_rng(seed)
    return rng.uniform(np.nextafter(-1.0, 0.0), 1.0, size=side * side)


def install_reward(mdp: TabularMDP, state_reward) -> TabularMDP:
    """Attach a per-state reward to every action: ``r(s, a) = rho(s)``."""
    rho = np.asarray(state_reward, dtype=float)
    if rho.shape != (mdp.num_states,):
        raise ValidationError(f"expected {mdp.num_states} state rewards, got {rho.shape}")
    return mdp.with_reward(np.repeat(rho[:, None], mdp.num_actions, axis=1))


def optimal_gaps(transition, state_rewards, gamma) -> np.ndarray:
    """Greedy state-value gap of each reward vector's optimal solution.

    Each task is solved to a 1e-12 certificate in one batched run.
    """
    rho = np.asarray(state_rewards, dtype=float)
    rewards = np.repeat(rho[:, :, None], transition.shape[1], axis=2)
    targets = np.full((rho.shape[0], 1), REFERENCE_EPSILON)
    snaps, _, _ = iterate_to_targets(transition, rewards, gamma, targets)
    values = snaps[:, 0].max(axis=2)
    return np.array([value_gap(v).delta for v in values])


def find_reward_with_gap(side: int, gamma: float, target_delta: float,
                         rel_tol: float = 0.01, seed: int = 0,
                         max_attempts: int = 100_000,
                         batch_size: int = 64) -> RewardSearchResult:
    """Rejection-sample rewards until the optimal values have the target gap.

    Attempt ``i`` (0-based) uses ``sample_reward(side, seed + i)`` and is
    accepted when ``|delta - target_delta| <= rel_tol * target_delta`` with
    ``delta > 0``.  Candidates are solved in batches, but acceptance follows
    attempt order, so the result matches a one-at-a-time search.
    """
    if not target_delta > 0:
        raise ValidationError("target_delta must be positive")
    if not rel_tol >= 0:
        raise ValidationError("rel_tol must be nonnegative")
    if max_attempts < 1:
        raise ValidationError("max_attempts must be positive")
    transition = grid_transitions(side)
    best = None
    done = 0
    while done < max_attempts:
        n = min(batch_size, max_attempts - done)
        seeds = [seed + done + i for i in range(n)]
        rho = np.stack([sample_reward(side, s) for s in seeds])
        gaps = optimal_gaps(transition, rho, gamma)
        for i, delta in enumerate(gaps):
            miss = abs(delta - target_delta)
            if delta > 0 and miss <= rel_tol * target_delta:
                return RewardSearchResult(rho[i], float(delta), done + i + 1, seeds[i])
            if best is None or miss < abs(best.achieved_delta - target_delta):
                best = RewardSearchResult(rho[i], float(delta), done + i + 1, seeds[i])
        done += n
    raise SearchFailureError(
        f"no reward with gap within {rel_tol:.0%} of {target_delta} "
        f"in {max_attempts} attempts (closest: {best.achieved_delta:.6g})",
        best=best,
    )
