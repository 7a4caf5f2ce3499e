"""Acceptance gate.  Each test carries a ``criterion`` marker; the terminal
summary prints one PASS/FAIL line per criterion number."""
import time

import numpy as np
import pytest

from conftest import grid_task, random_mdp
from oracles import brute_force_gap
from inverse_bellman.continuous import theorem1_bound
from inverse_bellman.experiments import ContinuousConfig, Fig1Config, emit_csv, run_fig1
from inverse_bellman.gridworld import install_reward, make_empty_grid, sample_reward
from inverse_bellman.inference import (infer_model, intersect_level_sets, level_set,
                                       model_accuracy, scanned_values)
from inverse_bellman.mdp import (Policy, ValueTable, bellman_optimality_backup,
                                 bellman_policy_backup, perturb_values, state_values,
                                 value_iteration)
from inverse_bellman.persistence import load_value_table, save_value_table
from inverse_bellman.separability import identifiability_threshold, value_gap

MODES = ("uniform", "adversarial_pair")
ULP = np.finfo(float).eps
CURVES = "accuracy curves: exact below critical, drop at 10x, critical line, stable CSV"
LEVEL_SETS = "level sets and 3-task intersections contain the true successor"


def level_tolerance(eps, gamma, v, scanned):
    # the solver can stop at a float fixed point with certificate 0, so allow
    # 8 ulps of the value magnitude for rounding in V_hat and the scanned value
    return eps + eps / gamma + 8 * ULP * max(np.abs(v).max(), np.abs(scanned).max(), 1.0)


def criterion(number, label):
    return pytest.mark.criterion(number, label)


@criterion(1, "exact values recover every gridworld transition")
def test_exact_recovery():
    start = time.perf_counter()
    recovered = 0
    for seed in range(20):
        mdp = grid_task(seed)
        table, report = value_iteration(mdp, 1e-12)
        assert report.certified_epsilon <= 1e-12
        assert value_gap(state_values(table)).delta > 0
        model = infer_model(table, mdp)
        assert model_accuracy(model, mdp) == 1.0
        recovered += int((model.next_state == mdp.transition).sum())
    assert recovered == 20 * 100
    assert time.perf_counter() - start < 10.0


def _threshold_cases(rng):
    for seed in range(120):
        yield grid_task(10_000 + seed, gamma=float(rng.uniform(0.5, 0.99)))
    for _ in range(120):
        yield random_mdp(rng, num_states=int(rng.integers(2, 20)))


@criterion(2, "below the threshold accuracy is exactly 1.0")
def test_below_threshold_guarantee():
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    tasks = exceptions = 0
    for mdp in _threshold_cases(rng):
        exact, _ = value_iteration(mdp, 1e-12)
        c = exact.certified_epsilon
        delta = value_gap(state_values(exact)).delta - 2 * c
        if delta <= 0:
            continue
        tasks += 1
        # total error (solver + perturbation) must stay below the threshold of the true gap
        allowed = identifiability_threshold(delta, mdp.gamma)
        for mode in MODES:
            for k, frac in enumerate((0.0, float(rng.uniform(0, 1)), 0.999)):
                eps = max(frac * allowed - c, 0.0)
                noisy = perturb_values(exact, eps, mode, seed=k)
                assert noisy.certified_epsilon < allowed
                if model_accuracy(infer_model(noisy, mdp), mdp) != 1.0:
                    exceptions += 1
    assert tasks >= 100
    assert exceptions == 0
    assert time.perf_counter() - start < 60.0


@criterion(3, "perturbed minimum gap is at least delta - 2 eps")
def test_perturbed_gap_inequality():
    rng = np.random.default_rng(3)
    violations = 0
    for i in range(1000):
        n = int(rng.integers(2, 30))
        v = rng.uniform(-10, 10, size=n)
        delta = value_gap(v).delta
        assert delta == brute_force_gap(v)[0]
        eps = float(rng.uniform(0, 1)) * max(delta, 1e-3)
        noisy = perturb_values(ValueTable(v[:, None], 0.0), eps, MODES[i % 2], seed=i)
        after = value_gap(state_values(noisy)).delta
        assert after == brute_force_gap(noisy.q[:, 0])[0]
        slack = 8 * ULP * (np.abs(v).max() + eps)
        violations += after < delta - 2 * eps - slack
    assert violations == 0


@criterion(4, "scanned-value error is at most eps / gamma")
def test_scanned_value_bound():
    rng = np.random.default_rng(4)
    violations = 0
    for i in range(1000):
        mdp = random_mdp(rng, num_states=int(rng.integers(2, 15)))
        table = ValueTable(rng.normal(scale=3, size=mdp.shape), 0.0)
        eps = float(10 ** rng.uniform(-6, 0))
        noisy = perturb_values(table, eps, MODES[i % 2], seed=i)
        err = np.abs(scanned_values(noisy, mdp) - scanned_values(table, mdp)).max()
        violations += err > eps / mdp.gamma + 1e-12
    assert violations == 0


@criterion(5, "continuous successor error stays below the bound")
def test_continuous_bound_sweep():
    start = time.perf_counter()
    reports = ContinuousConfig().run()
    assert len(reports) == 1800
    assert {(r.gamma, r.L, r.epsilon) for r in reports} == {
        (g, L, e) for g in (0.5, 0.9, 0.99) for L in (0.5, 1.0, 2.0)
        for e in (0.0, 1e-3, 1e-2, 1e-1)}
    bad = [r for r in reports
           if not r.max_observed_error < theorem1_bound(r.epsilon, r.gamma, r.effective_L) + 1e-9]
    assert bad == []
    assert time.perf_counter() - start < 60.0


@pytest.fixture(scope="module")
def fig1_run(tmp_path_factory):
    config = Fig1Config()
    points = run_fig1(config)
    path = tmp_path_factory.mktemp("fig1") / "first.csv"
    emit_csv(points, path)
    return config, points, path


@criterion(6, CURVES)
def test_fig1_exact_below_critical(fig1_run):
    config, points, _ = fig1_run
    assert {p.delta_target for p in points} == set(config.delta_targets)
    below = [p for p in points if p.epsilon < p.critical_epsilon]
    assert below
    assert all(p.mean_accuracy == 1.0 for p in below)


@criterion(6, CURVES)
def test_fig1_critical_placement(fig1_run):
    _, points, _ = fig1_run
    for p in points:
        assert p.critical_epsilon == pytest.approx(
            p.delta_target / (2 / 0.99 + 2), rel=1e-15)


@criterion(6, CURVES)
def test_fig1_drop_at_ten_times_critical(fig1_run):
    # red under the default truncation mode: its error is nearly uniform across
    # states and cancels in the scanned value (see README, known deviations)
    _, points, _ = fig1_run
    far = [p for p in points if p.delta_target == 0.02
           and p.epsilon >= 10 * p.critical_epsilon * (1 - 1e-12)]
    assert far
    assert min(p.mean_accuracy for p in far) < 1.0


@criterion(6, CURVES)
def test_fig1_csv_reproducible(fig1_run, tmp_path):
    config, _, first = fig1_run
    second = tmp_path / "second.csv"
    emit_csv(run_fig1(config), second)
    assert first.read_bytes() == second.read_bytes()


@criterion(7, "Bellman backups contract by gamma")
def test_contraction():
    rng = np.random.default_rng(7)
    violations = 0
    for i in range(1000):
        mdp = random_mdp(rng)
        q1 = rng.normal(scale=5, size=mdp.shape)
        q2 = q1 + rng.normal(scale=float(10 ** rng.uniform(-6, 1)), size=mdp.shape)
        if i % 2:
            policy = Policy(rng.dirichlet(np.ones(mdp.num_actions), size=mdp.num_states))
            t1 = bellman_policy_backup(mdp, policy, q1).q
            t2 = bellman_policy_backup(mdp, policy, q2).q
        else:
            t1 = bellman_optimality_backup(mdp, q1).q
            t2 = bellman_optimality_backup(mdp, q2).q
        slack = 8 * ULP * max(np.abs(t1).max(), np.abs(t2).max(), 1.0)
        violations += np.abs(t1 - t2).max() > mdp.gamma * np.abs(q1 - q2).max() + slack
    assert violations == 0


@criterion(8, "persistence roundtrip is bit-exact")
def test_persistence_roundtrip(tmp_path):
    rng = np.random.default_rng(8)
    for i in range(100):
        mdp = grid_task(i) if i % 2 else random_mdp(rng, num_states=int(rng.integers(2, 15)))
        if i % 4 == 1:
            table = value_iteration(mdp, float(10 ** rng.uniform(-12, -2)))[0]
        else:
            table = ValueTable(rng.normal(scale=10 ** rng.uniform(-5, 5), size=mdp.shape),
                               float(rng.uniform(0, 0.1)))
        path = tmp_path / f"table{i}.txt"
        save_value_table(path, table, mdp)
        loaded = load_value_table(path)
        assert loaded.q.tobytes() == table.q.tobytes()
        assert loaded.certified_epsilon == table.certified_epsilon
        before, after = infer_model(table, mdp), infer_model(loaded, mdp)
        for field in ("next_state", "scanned", "value_distance", "runner_up_margin",
                      "ambiguous"):
            assert getattr(before, field).tobytes() == getattr(after, field).tobytes()


@criterion(9, LEVEL_SETS)
def test_level_set_soundness():
    rng = np.random.default_rng(9)
    base = make_empty_grid(5, 0.99)
    misses = 0
    for i in range(1000):
        mdp = install_reward(base, sample_reward(5, 20_000 + i))
        exact, _ = value_iteration(mdp, 1e-12)
        noisy = perturb_values(exact, float(10 ** rng.uniform(-6, 0)), MODES[i % 2], seed=i)
        eps = noisy.certified_epsilon
        v = state_values(noisy)
        scanned = scanned_values(noisy, mdp)
        tol = level_tolerance(eps, mdp.gamma, v, scanned)
        for s in range(25):
            for a in range(4):
                ls = level_set(v, scanned[s, a], tol)
                misses += base.transition[s, a] not in ls.members
    assert misses == 0


@criterion(9, LEVEL_SETS)
def test_level_set_intersection():
    rng = np.random.default_rng(90)
    base = make_empty_grid(5, 0.99)
    for group in range(50):
        sets = {}
        for k in range(3):
            mdp = install_reward(base, sample_reward(5, 30_000 + 3 * group + k))
            exact, _ = value_iteration(mdp, 1e-12)
            noisy = perturb_values(exact, float(10 ** rng.uniform(-4, -1)), "uniform",
                                   seed=group * 3 + k)
            eps = noisy.certified_epsilon
            v = state_values(noisy)
            scanned = scanned_values(noisy, mdp)
            tol = level_tolerance(eps, mdp.gamma, v, scanned)
            for s in range(25):
                for a in range(4):
                    sets.setdefault((s, a), []).append(
                        level_set(v, scanned[s, a], tol))
        for (s, a), per_task in sets.items():
            inter = intersect_level_sets(per_task)
            assert base.transition[s, a] in inter.members
            assert len(inter.members) <= min(len(x.members) for x in per_task)
