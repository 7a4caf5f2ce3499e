"""Finite deterministic MDPs and certified Bellman fixed-point iteration.

Action values are stored as ``(num_states, num_actions)`` float arrays.  The
solver iterates a Bellman backup from ``q = 0`` and stops as soon as the
contraction certificate ``gamma * residual / (1 - gamma)`` falls below the
requested accuracy, so every returned table carries a provable sup-norm error
bound against the exact fixed point.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numba
import numpy as np

from .exceptions import DimensionError, NonConvergenceError, ValidationError
from .separability import value_gap

DEFAULT_MAX_ITER = 10**7
SOURCES = ("solved", "perturbed", "loaded", "backup")
PERTURB_MODES = ("uniform", "adversarial_pair")


def _frozen(array):
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class TabularMDP:
    """Deterministic MDP ``<S, A, f, r, gamma>`` with action-indexed rewards."""

    transition: np.ndarray
    reward: np.ndarray
    gamma: float

    def __post_init__(self):
        transition = np.asarray(self.transition)
        reward = np.asarray(self.reward, dtype=float)
        if transition.ndim != 2:
            raise DimensionError("transition must be a (num_states, num_actions) table")
        if not np.issubdtype(transition.dtype, np.integer):
            if not np.all(np.equal(np.mod(transition, 1), 0)):
                raise ValidationError("transition targets must be integers")
            transition = transition.astype(np.int64)
        if reward.shape != transition.shape:
            raise DimensionError(
                f"reward shape {reward.shape} != transition shape {transition.shape}"
            )
        num_states, num_actions = transition.shape
        if num_states < 1 or num_actions < 1:
            raise ValidationError("an MDP needs at least one state and one action")
        if transition.min() < 0 or transition.max() >= num_states:
            raise ValidationError("transition targets must lie in [0, num_states)")
        if not np.all(np.isfinite(reward)):
            raise ValidationError("rewards must be finite")
        gamma = float(self.gamma)
        if not 0.0 <= gamma < 1.0:
            raise ValidationError(f"gamma must lie in [0, 1), got {gamma}")
        object.__setattr__(self, "transition", _frozen(transition.astype(np.int64)))
        object.__setattr__(self, "reward", _frozen(reward))
        object.__setattr__(self, "gamma", gamma)

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def shape(self):
        return self.transition.shape

    def with_reward(self, reward) -> "TabularMDP":
        return TabularMDP(self.transition, reward, self.gamma)


@dataclass(frozen=True)
class Policy:
    """Stochastic policy ``pi(a|s)`` as a row-stochastic matrix."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 2:
            raise DimensionError("policy must be a (num_states, num_actions) matrix")
        if not np.all(np.isfinite(probs)) or probs.min() < 0.0 or probs.max() > 1.0:
            raise ValidationError("policy probabilities must lie in [0, 1]")
        if np.max(np.abs(probs.sum(axis=1) - 1.0)) > 1e-12:
            raise ValidationError("policy rows must sum to 1 within 1e-12")
        object.__setattr__(self, "probs", _frozen(probs))

    @classmethod
    def uniform(cls, num_states: int, num_actions: int) -> "Policy":
        return cls(np.full((num_states, num_actions), 1.0 / num_actions))

    @classmethod
    def greedy(cls, q) -> "Policy":
        """Deterministic argmax policy; ties go to the lowest action index."""
        q = q.q if isinstance(q, ValueTable) else np.asarray(q, dtype=float)
        probs = np.zeros_like(q)
        probs[np.arange(q.shape[0]), np.argmax(q, axis=1)] = 1.0
        return cls(probs)


@dataclass(frozen=True)
class ValueTable:
    """Action-value table with an optional sup-norm accuracy certificate.

    ``certified_epsilon`` is ``None`` when no certificate is known, e.g. the
    raw output of a single backup.
    """

    q: np.ndarray
    certified_epsilon: Optional[float] = None
    source: str = "solved"

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.ndim != 2:
            raise DimensionError("q must be a (num_states, num_actions) matrix")
        if not np.all(np.isfinite(q)):
            raise ValidationError("q entries must be finite")
        eps = self.certified_epsilon
        if eps is not None:
            eps = float(eps)
            if not eps >= 0.0:
                raise ValidationError("certified_epsilon must be nonnegative")
        if self.source not in SOURCES:
            raise ValidationError(f"unknown source tag {self.source!r}")
        object.__setattr__(self, "q", _frozen(q))
        object.__setattr__(self, "certified_epsilon", eps)

    @property
    def shape(self):
        return self.q.shape


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_residual: float
    certified_epsilon: float = field(init=False)
    gamma: float = 0.0

    def __post_init__(self):
        if self.gamma == 0.0:
            cert = 0.0
        else:
            cert = self.gamma * self.final_residual / (1.0 - self.gamma)
        object.__setattr__(self, "certified_epsilon", float(cert))


Selector = Union[str, Policy]


def _as_q(q) -> np.ndarray:
    return q.q if isinstance(q, ValueTable) else np.asarray(q, dtype=float)


def _check_shape(mdp: TabularMDP, q: np.ndarray):
    if q.shape != mdp.shape:
        raise DimensionError(f"q shape {q.shape} does not match MDP shape {mdp.shape}")


def _check_policy(policy: Policy, shape):
    if not isinstance(policy, Policy):
        raise ValidationError(f"expected a Policy, got {type(policy).__name__}")
    if policy.probs.shape != tuple(shape):
        raise DimensionError(
            f"policy shape {policy.probs.shape} does not match {tuple(shape)}"
        )


def state_values(q, selector: Selector = "greedy") -> np.ndarray:
    """State values ``V(s)`` from action values.

    ``"greedy"`` takes ``max_a q[s, a]``; a :class:`Policy` takes the
    expectation ``sum_a pi(a|s) q[s, a]``.
    """
    q = _as_q(q)
    if q.ndim != 2:
        raise DimensionError("q must be a (num_states, num_actions) matrix")
    if isinstance(selector, str):
        if selector != "greedy":
            raise ValidationError(f"unknown selector {selector!r}")
        return q.max(axis=1)
    _check_policy(selector, q.shape)
    return (q * selector.probs).sum(axis=1)


def bellman_optimality_backup(mdp: TabularMDP, q) -> ValueTable:
    q = _as_q(q)
    _check_shape(mdp, q)
    if not np.all(np.isfinite(q)):
        raise ValidationError("q entries must be finite")
    out = mdp.reward + mdp.gamma * q.max(axis=1)[mdp.transition]
    return ValueTable(out, None, "backup")


def bellman_policy_backup(mdp: TabularMDP, policy: Policy, q) -> ValueTable:
    q = _as_q(q)
    _check_shape(mdp, q)
    _check_policy(policy, mdp.shape)
    if not np.all(np.isfinite(q)):
        raise ValidationError("q entries must be finite")
    v = (q * policy.probs).sum(axis=1)
    out = mdp.reward + mdp.gamma * v[mdp.transition]
    return ValueTable(out, None, "backup")


@numba.njit(cache=True)
def _optimality_kernel(transition, rewards, gamma, scale, targets, max_iter,
                       snapshots, iterations, residuals):
    batch, num_states, num_actions = rewards.shape
    num_targets = targets.shape[1]
    q = np.empty((num_states, num_actions))
    q_next = np.empty((num_states, num_actions))
    v = np.empty(num_states)
    for b in range(batch):
        q[:] = 0.0
        v[:] = 0.0
        pending = num_targets
        k = 0
        while pending > 0:
            if k >= max_iter:
                return b
            residual = 0.0
            for s in range(num_states):
                for a in range(num_actions):
                    x = rewards[b, s, a] + gamma * v[transition[s, a]]
                    d = abs(x - q[s, a])
                    if d > residual:
                        residual = d
                    q_next[s, a] = x
            k += 1
            cert = scale * residual
            for j in range(num_targets):
                if iterations[b, j] == 0 and cert <= targets[b, j]:
                    snapshots[b, j] = q_next
                    iterations[b, j] = k
                    residuals[b, j] = residual
                    pending -= 1
            for s in range(num_states):
                best = q_next[s, 0]
                for a in range(1, num_actions):
                    if q_next[s, a] > best:
                        best = q_next[s, a]
                v[s] = best
                for a in range(num_actions):
                    q[s, a] = q_next[s, a]
    return -1


def _numpy_iterate(transition, rewards, gamma, scale, targets, probs, max_iter,
                   snapshots, iterations, residuals):
    pending = np.ones(targets.shape, dtype=bool)
    q = np.zeros_like(rewards)
    k = 0
    residual = np.zeros(rewards.shape[0])
    while pending.any():
        if k >= max_iter:
            raise NonConvergenceError(
                f"no certificate within {max_iter} iterations",
                iterations=k, residual=float(residual.max()),
            )
        if probs is None:
            v = q.max(axis=2)
        else:
            v = (q * probs).sum(axis=2)
        q_next = rewards + gamma * v[:, transition]
        residual = np.abs(q_next - q).max(axis=(1, 2))
        k += 1
        hit = pending & ((scale * residual)[:, None] <= targets)
        if hit.any():
            b_idx, k_idx = np.nonzero(hit)
            snapshots[b_idx, k_idx] = q_next[b_idx]
            iterations[b_idx, k_idx] = k
            residuals[b_idx, k_idx] = residual[b_idx]
            pending &= ~hit
        q = q_next


def iterate_to_targets(transition, rewards, gamma, targets, probs=None,
                       max_iter=DEFAULT_MAX_ITER, backend="auto"):
    """Batched value iteration capturing a snapshot per accuracy target.

    Parameters
    ----------
    transition : (S, A) int array, shared by every task in the batch.
    rewards : (B, S, A) float array, one reward table per task.
    gamma : discount factor.
    targets : (B, K) array of positive accuracy targets.
    probs : optional (S, A) policy; ``None`` selects the optimality backup.
    backend : ``"auto"``, ``"numba"`` or ``"numpy"``.  The compiled kernel
        only covers the optimality backup; both backends round identically.

    Returns
    -------
    snapshots : (B, K, S, A) array; ``snapshots[b, k]`` is the first iterate
        whose certificate is ``<= targets[b, k]``.
    iterations : (B, K) int array of backups applied.
    residuals : (B, K) array of the sup-norm change at that backup.

    Tasks never interact, so a batched solve reproduces single-task solves
    bit for bit.
    """
    transition = np.ascontiguousarray(transition, dtype=np.int64)
    rewards = np.ascontiguousarray(rewards, dtype=float)
    targets = np.ascontiguousarray(targets, dtype=float)
    batch, num_targets = targets.shape
    snapshots = np.empty((batch, num_targets) + rewards.shape[1:])
    iterations = np.zeros((batch, num_targets), dtype=np.int64)
    residuals = np.zeros((batch, num_targets))
    gamma = float(gamma)
    scale = 0.0 if gamma == 0.0 else gamma / (1.0 - gamma)
    if backend == "auto":
        backend = "numpy" if probs is not None else "numba"
    if backend == "numba":
        if probs is not None:
            raise ValidationError("the compiled kernel only handles the optimality backup")
        failed = _optimality_kernel(transition, rewards, gamma, scale, targets,
                                    int(max_iter), snapshots, iterations, residuals)
        if failed >= 0:
            raise NonConvergenceError(
                f"task {failed}: no certificate within {max_iter} iterations",
                iterations=int(max_iter),
            )
    elif backend == "numpy":
        _numpy_iterate(transition, rewards, gamma, scale, targets, probs, max_iter,
                       snapshots, iterations, residuals)
    else:
        raise ValidationError(f"unknown backend {backend!r}")
    return snapshots, iterations, residuals


def _resolve_mode(mdp, mode):
    if isinstance(mode, str):
        if mode != "optimality":
            raise ValidationError(f"unknown mode {mode!r}")
        return None
    _check_policy(mode, mdp.shape)
    return mode.probs


def value_iteration(mdp: TabularMDP, epsilon_target: float, mode="optimality",
                    max_iter: int = DEFAULT_MAX_ITER):
    """Solve ``mdp`` to certified sup-norm accuracy ``epsilon_target``.

    ``mode`` is ``"optimality"`` or a :class:`Policy` for policy evaluation.
    Returns ``(ValueTable, SolveReport)``.
    """
    (table, report), = value_iteration_path(mdp, [epsilon_target], mode, max_iter)
    return table, report


def value_iteration_path(mdp: TabularMDP, epsilon_targets: Sequence[float],
                         mode="optimality", max_iter: int = DEFAULT_MAX_ITER):
    """One value-iteration run, snapshotted at each accuracy target.

    Each returned pair equals ``value_iteration(mdp, eps, mode)`` for the
    corresponding ``eps``, at the cost of a single run.
    """
    targets = np.asarray(epsilon_targets, dtype=float)
    if targets.ndim != 1 or targets.size == 0:
        raise ValidationError("need at least one epsilon target")
    if not np.all(targets > 0):
        raise ValidationError("epsilon_target must be positive")
    probs = _resolve_mode(mdp, mode)
    snaps, iters, res = iterate_to_targets(
        mdp.transition, mdp.reward[None], mdp.gamma, targets[None], probs, max_iter
    )
    out = []
    for k in range(targets.size):
        report = SolveReport(int(iters[0, k]), float(res[0, k]), gamma=mdp.gamma)
        out.append((ValueTable(snaps[0, k], report.certified_epsilon, "solved"), report))
    return out


def perturb_values(q: ValueTable, epsilon: float, mode: str = "uniform",
                   seed: int = 0) -> ValueTable:
    """Return an ``epsilon``-perturbed copy of ``q``.

    ``uniform`` shifts every entry by an independent draw from
    ``[-epsilon, epsilon]``.  ``adversarial_pair`` finds the two states with
    the smallest greedy-value gap and moves them toward each other: every
    entry of the higher-valued state gets ``-epsilon``, every entry of the
    lower one ``+epsilon``; it needs at least two states.
    """
    epsilon = float(epsilon)
    if not epsilon >= 0.0:
        raise ValidationError("epsilon must be nonnegative")
    if mode not in PERTURB_MODES:
        raise ValidationError(f"unknown perturbation mode {mode!r}")
    base = q.q
    if mode == "uniform":
        rng = np.random.default_rng(seed)
        noise = rng.uniform(-epsilon, epsilon, size=base.shape)
        out = base + noise if epsilon > 0 else base.copy()
    else:
        out = base.copy()
        if epsilon > 0:
            v = state_values(base)
            i, j = value_gap(v).argpair
            hi, lo = (i, j) if v[i] >= v[j] else (j, i)
            out[hi] -= epsilon
            out[lo] += epsilon
    cert = None if q.certified_epsilon is None else q.certified_epsilon + epsilon
    return ValueTable(out, cert, "perturbed")
