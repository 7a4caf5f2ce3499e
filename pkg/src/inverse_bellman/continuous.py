"""Next-state recovery on a 1-D continuous state space.

Value functions here are strictly increasing piecewise-linear maps on
``[0, 1]``; their smallest segment slope is the reverse-Lipschitz constant
``L`` with ``|V(s1) - V(s2)| >= L |s1 - s2|``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .exceptions import ValidationError

BISECTION_TOL = 1e-10
# perturbed nodes keep at least this fraction of each original segment rise
MONOTONE_FLOOR = 0.5


@dataclass(frozen=True)
class PiecewiseLinearValue:
    coords: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if coords.ndim != 1 or coords.shape != values.shape or coords.size < 2:
            raise ValidationError("need matching 1-D coords/values with at least two nodes")
        if not (np.all(np.isfinite(coords)) and np.all(np.isfinite(values))):
            raise ValidationError("nodes must be finite")
        if np.any(np.diff(coords) <= 0):
            raise ValidationError("state coordinates must be strictly increasing")
        for name, arr in (("coords", coords), ("values", values)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.coords)

    @property
    def min_slope(self) -> float:
        return float(self.slopes.min())

    @property
    def max_slope(self) -> float:
        return float(self.slopes.max())

    @property
    def domain(self) -> Tuple[float, float]:
        return float(self.coords[0]), float(self.coords[-1])

    def __call__(self, s):
        return np.interp(s, self.coords, self.values)


def build_monotone_value(num_segments: int, L: float, seed: int,
                         max_slope_ratio: float = 10.0) -> PiecewiseLinearValue:
    """Random increasing piecewise-linear function on [0, 1].

    Segment slopes are drawn from ``[L, max_slope_ratio * L]``; breakpoints
    come from normalised random widths.
    """
    if not L > 0:
        raise ValidationError(f"L must be positive, got {L}")
    if num_segments < 1:
        raise ValidationError("num_segments must be positive")
    if max_slope_ratio < 1:
        raise ValidationError("max_slope_ratio must be at least 1")
    rng = np.random.default_rng(seed)
    widths = rng.uniform(0.5, 1.5, size=num_segments)
    coords = np.concatenate([[0.0], np.cumsum(widths / widths.sum())])
    coords[-1] = 1.0
    slopes = rng.uniform(L, max_slope_ratio * L, size=num_segments)
    start = rng.uniform(-1.0, 1.0)
    values = start + np.concatenate([[0.0], np.cumsum(slopes * np.diff(coords))])
    return PiecewiseLinearValue(coords, values)


def reverse_lipschitz_constant(v: PiecewiseLinearValue) -> float:
    slope = v.min_slope
    if not slope > 0:
        raise ValidationError("value function has a non-increasing segment")
    return slope


def invert_values(v: PiecewiseLinearValue, y, tol: float = BISECTION_TOL):
    """Vectorised bisection inverse of ``v``.

    Returns ``(s, extrapolated)``.  In-range targets are located to within
    ``tol``; out-of-range targets clamp to the nearer endpoint and are flagged.
    """
    if not tol > 0:
        raise ValidationError("tol must be positive")
    reverse_lipschitz_constant(v)
    y = np.asarray(y, dtype=float)
    lo_s, hi_s = v.domain
    below = y < v.values[0]
    above = y > v.values[-1]
    lo = np.full(y.shape, lo_s)
    hi = np.full(y.shape, hi_s)
    # stop at bracket width <= tol so the midpoint is within tol / 2
    while np.any(hi - lo > tol):
        mid = 0.5 * (lo + hi)
        go_right = v(mid) < y
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_right, hi, mid)
    s = 0.5 * (lo + hi)
    s = np.where(below, lo_s, np.where(above, hi_s, s))
    return s, below | above


def invert_value(v: PiecewiseLinearValue, y: float, tol: float = BISECTION_TOL):
    s, flag = invert_values(v, np.asarray([y], dtype=float), tol)
    return float(s[0]), bool(flag[0])


def theorem1_bound(epsilon: float, gamma: float, L: float) -> float:
    """Worst-case successor error ``(1 + gamma) * epsilon / (gamma * L)``."""
    if not 0.0 < gamma < 1.0:
        raise ValidationError(f"gamma must lie in (0, 1), got {gamma}")
    if not L > 0:
        raise ValidationError(f"L must be positive, got {L}")
    if not epsilon >= 0:
        raise ValidationError("epsilon must be nonnegative")
    return (1.0 + gamma) * epsilon / (gamma * L)


def lemma1_constant(L_r: float, L_p: float, L_pi: float, gamma: float) -> float:
    """Reverse-Lipschitz constant ``L_r / (1 - gamma * L_p * (1 + L_pi))`` of Q."""
    if not (L_r > 0 and L_p > 0 and L_pi >= 0):
        raise ValidationError("need L_r > 0, L_p > 0, L_pi >= 0")
    if not 0.0 < gamma < 1.0:
        raise ValidationError(f"gamma must lie in (0, 1), got {gamma}")
    denom = 1.0 - gamma * L_p * (1.0 + L_pi)
    if denom <= 0:
        raise ValidationError(
            f"gamma * L_p * (1 + L_pi) = {1.0 - denom:.6g} must be below 1"
        )
    return L_r / denom


def perturb_monotone(v: PiecewiseLinearValue, epsilon: float,
                     rng: np.random.Generator) -> PiecewiseLinearValue:
    """Node-wise noise in ``[-epsilon, epsilon]`` that keeps ``v`` increasing.

    A node pushed below ``prev + MONOTONE_FLOOR * rise`` is lifted to that
    floor; since the floor never exceeds ``v + epsilon``, the sup error stays
    within ``epsilon``.
    """
    noisy = v.values + rng.uniform(-epsilon, epsilon, size=v.values.size)
    rise = np.diff(v.values)
    out = noisy.copy()
    for i in range(1, out.size):
        out[i] = max(out[i], out[i - 1] + MONOTONE_FLOOR * rise[i - 1])
    return PiecewiseLinearValue(v.coords, out)


@dataclass(frozen=True)
class ContinuousTrialReport:
    seed: int
    epsilon: float
    gamma: float
    L: float
    true_L: float
    effective_L: float
    max_observed_error: float
    bound: float
    extrapolated: int
    violated: bool


def run_continuous_trial(num_segments: int, L: float, epsilon: float, gamma: float,
                         num_queries: int, seed: int,
                         tol: float = BISECTION_TOL) -> ContinuousTrialReport:
    """One seeded check of the successor-error bound.

    Builds ``V``, draws successors ``s'`` and rewards, forms exact
    ``Q = r + gamma V(s')``, perturbs ``Q`` and ``V`` by at most ``epsilon``,
    and inverts the perturbed ``V`` at the perturbed scanned values.  The bound
    uses the perturbed function's reverse-Lipschitz constant; a trial is
    violated when the error reaches ``bound + tol``.
    """
    if not epsilon >= 0:
        raise ValidationError("epsilon must be nonnegative")
    if num_queries < 1:
        raise ValidationError("num_queries must be positive")
    build_seq, trial_seq = np.random.SeedSequence(seed).spawn(2)
    v = build_monotone_value(num_segments, L, build_seq)
    rng = np.random.default_rng(trial_seq)
    successors = rng.uniform(0.0, 1.0, size=num_queries)
    rewards = rng.uniform(-1.0, 1.0, size=num_queries)
    q = rewards + gamma * v(successors)
    q_hat = q + rng.uniform(-epsilon, epsilon, size=num_queries)
    v_hat = perturb_monotone(v, epsilon, rng)
    effective_L = reverse_lipschitz_constant(v_hat)
    scanned = (q_hat - rewards) / gamma
    estimate, extrapolated = invert_values(v_hat, scanned, tol)
    max_error = float(np.max(np.abs(estimate - successors)))
    bound = theorem1_bound(epsilon, gamma, effective_L)
    return ContinuousTrialReport(
        seed=int(seed), epsilon=float(epsilon), gamma=float(gamma), L=float(L),
        true_L=reverse_lipschitz_constant(v), effective_L=effective_L,
        max_observed_error=max_error, bound=bound,
        extrapolated=int(extrapolated.sum()), violated=bool(max_error >= bound + tol),
    )
