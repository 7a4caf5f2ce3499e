"""Accuracy-vs-precision gridworld experiment and the continuous bound sweep."""
from __future__ import annotations

import csv
import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .continuous import ContinuousTrialReport, run_continuous_trial
from .exceptions import ValidationError
from .gridworld import REFERENCE_EPSILON, find_reward_with_gap, install_reward, make_empty_grid
from .inference import infer_model, model_accuracy
from .mdp import PERTURB_MODES, perturb_values, value_iteration, value_iteration_path
from .persistence import format_real, parse_key_values
from .separability import identifiability_threshold

logger = logging.getLogger(__name__)

EPSILON_MODES = ("iteration_truncation", "perturbation")
CURVE_HEADER = ("delta", "epsilon", "mean_accuracy", "standard_error", "critical_epsilon")
TRIAL_HEADER = ("seed", "epsilon", "gamma", "L", "effective_L", "max_error", "bound",
                "violated")


@dataclass(frozen=True)
class Fig1Config:
    """Settings for the accuracy-vs-precision sweep.

    ``epsilon_sweep=None`` gives each delta its own grid of ``sweep_points``
    log-spaced values spanning ``[critical / sweep_span, critical * sweep_span]``.
    """

    grid_side: int = 5
    gamma: float = 0.99
    delta_targets: Tuple[float, ...] = (0.005, 0.01, 0.02)
    epsilon_sweep: Optional[Tuple[float, ...]] = None
    sweep_points: int = 12
    sweep_span: float = 10.0
    tasks_per_delta: int = 20
    base_seed: int = 0
    epsilon_mode: str = "iteration_truncation"
    perturbation: str = "uniform"
    rel_tol: float = 0.01
    max_attempts: int = 100_000

    def __post_init__(self):
        if not self.delta_targets or any(d <= 0 for d in self.delta_targets):
            raise ValidationError("delta_targets must be a non-empty list of positive reals")
        if self.epsilon_sweep is not None:
            if not self.epsilon_sweep or any(e <= 0 for e in self.epsilon_sweep):
                raise ValidationError("epsilon_sweep must be non-empty and positive")
        if self.sweep_points < 1 or self.sweep_span < 1:
            raise ValidationError("sweep_points >= 1 and sweep_span >= 1 required")
        if self.tasks_per_delta < 1:
            raise ValidationError("tasks_per_delta must be positive")
        if self.base_seed < 0:
            raise ValidationError("base_seed must be nonnegative")
        if self.epsilon_mode not in EPSILON_MODES:
            raise ValidationError(f"epsilon_mode must be one of {EPSILON_MODES}")
        if self.perturbation not in PERTURB_MODES:
            raise ValidationError(f"perturbation must be one of {PERTURB_MODES}")
        if not 0.0 < self.gamma < 1.0:
            raise ValidationError("gamma must lie in (0, 1)")

    def critical_epsilon(self, delta: float) -> float:
        return identifiability_threshold(delta, self.gamma)

    def sweep_for(self, delta: float) -> np.ndarray:
        if self.epsilon_sweep is not None:
            return np.asarray(self.epsilon_sweep, dtype=float)
        span = np.log10(self.sweep_span)
        return self.critical_epsilon(delta) * np.logspace(-span, span, self.sweep_points)


@dataclass(frozen=True)
class CurvePoint:
    delta_target: float
    epsilon: float
    mean_accuracy: float
    standard_error: float
    critical_epsilon: float


@dataclass(frozen=True)
class TaskRecord:
    delta_index: int
    task_index: int
    seed: int
    reward_seed: int
    achieved_delta: float
    epsilons: np.ndarray
    accuracies: np.ndarray


def task_seed(base_seed: int, delta_index: int, task_index: int) -> int:
    """Search seed for one task: SeedSequence(base_seed) spawned at ``(delta_index, task_index)``."""
    seq = np.random.SeedSequence(base_seed, spawn_key=(delta_index, task_index))
    return int(seq.generate_state(1)[0])


def _perturb_seed(seed: int, eps_index: int) -> int:
    seq = np.random.SeedSequence(seed, spawn_key=(eps_index,))
    return int(seq.generate_state(1)[0])


def run_fig1_task(config: Fig1Config, delta_index: int, task_index: int,
                  seed: Optional[int] = None) -> TaskRecord:
    """Find one task at the indexed delta target and sweep its precision.

    ``seed`` overrides the derived search seed; no other task depends on it.
    """
    delta = config.delta_targets[delta_index]
    if seed is None:
        seed = task_seed(config.base_seed, delta_index, task_index)
    found = find_reward_with_gap(config.grid_side, config.gamma, delta, config.rel_tol,
                                 seed, config.max_attempts)
    mdp = install_reward(make_empty_grid(config.grid_side, config.gamma), found.reward)
    epsilons = config.sweep_for(delta)
    if config.epsilon_mode == "iteration_truncation":
        tables = [table for table, _ in value_iteration_path(mdp, epsilons)]
    else:
        exact, _ = value_iteration(mdp, REFERENCE_EPSILON)
        tables = [perturb_values(exact, eps, config.perturbation, _perturb_seed(seed, k))
                  for k, eps in enumerate(epsilons)]
    accuracies = np.array([model_accuracy(infer_model(t, mdp), mdp) for t in tables])
    logger.debug("delta %g task %d: seed %d, gap %.6g, attempts %d", delta, task_index,
                 found.seed, found.achieved_delta, found.attempts)
    return TaskRecord(delta_index, task_index, seed, found.seed, found.achieved_delta,
                      epsilons, accuracies)


def aggregate(config: Fig1Config, tasks: Sequence[TaskRecord]) -> List[CurvePoint]:
    points = []
    for d, delta in enumerate(config.delta_targets):
        rows = sorted((t for t in tasks if t.delta_index == d), key=lambda t: t.task_index)
        if not rows:
            continue
        acc = np.stack([t.accuracies for t in rows])
        mean = acc.mean(axis=0)
        if acc.shape[0] > 1:
            stderr = acc.std(axis=0, ddof=1) / np.sqrt(acc.shape[0])
        else:
            stderr = np.zeros_like(mean)
        critical = config.critical_epsilon(delta)
        for eps, m, se in zip(rows[0].epsilons, mean, stderr):
            points.append(CurvePoint(float(delta), float(eps), float(m), float(se), critical))
    return points


def run_fig1_detailed(config: Fig1Config):
    """Return ``(points, tasks)``; tasks hold per-task accuracy columns."""
    tasks = [run_fig1_task(config, d, i)
             for d in range(len(config.delta_targets))
             for i in range(config.tasks_per_delta)]
    return aggregate(config, tasks), tasks


def run_fig1(config: Fig1Config) -> List[CurvePoint]:
    return run_fig1_detailed(config)[0]


def run_theorem1_sweep(gammas=(0.5, 0.9, 0.99), Ls=(0.5, 1.0, 2.0),
                       epsilons=(0.0, 1e-3, 1e-2, 1e-1), seeds=range(50),
                       num_segments: int = 8,
                       num_queries: int = 100) -> List[ContinuousTrialReport]:
    """One continuous trial per (gamma, L, epsilon, seed) cell, in that nesting order."""
    return [
        run_continuous_trial(num_segments, L, eps, gamma, num_queries, seed)
        for gamma in gammas for L in Ls for eps in epsilons for seed in seeds
    ]


def count_violations(reports: Sequence[ContinuousTrialReport]) -> int:
    return sum(r.violated for r in reports)


def emit_csv(points: Sequence[CurvePoint], path) -> None:
    rows = sorted(points, key=lambda p: (p.delta_target, p.epsilon))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_HEADER)
        for p in rows:
            writer.writerow([format_real(x) for x in (p.delta_target, p.epsilon,
                             p.mean_accuracy, p.standard_error, p.critical_epsilon)])


def emit_trial_csv(reports: Sequence[ContinuousTrialReport], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRIAL_HEADER)
        for r in reports:
            writer.writerow([r.seed] + [format_real(x) for x in (
                r.epsilon, r.gamma, r.L, r.effective_L, r.max_observed_error, r.bound)]
                + [int(r.violated)])


def plot_fig1(points: Sequence[CurvePoint], path) -> None:
    """Accuracy vs epsilon per delta, with dashed lines at each critical epsilon."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for delta in sorted({p.delta_target for p in points}):
        curve = sorted((p for p in points if p.delta_target == delta), key=lambda p: p.epsilon)
        line = ax.errorbar([p.epsilon for p in curve], [p.mean_accuracy for p in curve],
                           yerr=[p.standard_error for p in curve], marker="o", ms=3,
                           capsize=2, label=f"δ = {delta:g}")
        ax.axvline(curve[0].critical_epsilon, ls="--", lw=1, color=line[0].get_color())
    ax.set_xscale("log")
    ax.set_xlabel("ε")
    ax.set_ylabel("model accuracy")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, format=Path(path).suffix.lstrip(".") or "svg")
    plt.close(fig)


@dataclass(frozen=True)
class ContinuousConfig:
    gammas: Tuple[float, ...] = (0.5, 0.9, 0.99)
    Ls: Tuple[float, ...] = (0.5, 1.0, 2.0)
    epsilons: Tuple[float, ...] = (0.0, 1e-3, 1e-2, 1e-1)
    num_seeds: int = 50
    base_seed: int = 0
    num_segments: int = 8
    num_queries: int = 100

    def run(self) -> List[ContinuousTrialReport]:
        seeds = range(self.base_seed, self.base_seed + self.num_seeds)
        return run_theorem1_sweep(self.gammas, self.Ls, self.epsilons, seeds,
                                  self.num_segments, self.num_queries)


def _coerce(field: dataclasses.Field, raw: str):
    kind = str(field.type)
    if "Tuple" in kind:
        items = [x.strip() for x in raw.split(",") if x.strip()]
        return tuple(float(x) for x in items)
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def config_from_text(cls, text: str, path="<string>"):
    """Build a config dataclass from ``key = value`` lines; lists are comma-separated."""
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, raw in parse_key_values(text).items():
        if key not in fields:
            raise ValidationError(f"{path}: unknown config key {key!r}")
        if raw.lower() == "none":
            kwargs[key] = None
            continue
        try:
            kwargs[key] = _coerce(fields[key], raw)
        except ValueError as exc:
            raise ValidationError(f"{path}: bad value for {key!r}: {raw!r}") from exc
    return cls(**kwargs)


def load_config(cls, path):
    return config_from_text(cls, Path(path).read_text(encoding="utf-8"), path)
