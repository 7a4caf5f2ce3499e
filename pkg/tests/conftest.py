import numpy as np
import pytest

from inverse_bellman.gridworld import install_reward, make_empty_grid, sample_reward
from inverse_bellman.mdp import TabularMDP


def random_mdp(rng, num_states=None, num_actions=None, gamma=None):
    num_states = num_states or int(rng.integers(1, 12))
    num_actions = num_actions or int(rng.integers(1, 5))
    gamma = rng.uniform(0.05, 0.98) if gamma is None else gamma
    transition = rng.integers(0, num_states, size=(num_states, num_actions))
    reward = rng.uniform(-1, 1, size=(num_states, num_actions))
    return TabularMDP(transition, reward, gamma)


def grid_task(seed, side=5, gamma=0.99):
    return install_reward(make_empty_grid(side, gamma), sample_reward(side, seed))


@pytest.fixture
def chain():
    """0 -> 1 -> 1 under the only action, r = [0, 1], gamma = 0.5."""
    return TabularMDP([[1], [1]], [[0.0], [1.0]], 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


# one line per acceptance criterion at the end of the run
_criteria = {}


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        number, label = marker
        ok = report.outcome == "passed"
        failed = _criteria.setdefault(number, (label, []))[1]
        if not ok:
            failed.append(report.nodeid.split("::")[-1])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        report.criterion = tuple(marker.args)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, label): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        label, failed = _criteria[number]
        status = "FAIL" if failed else "PASS"
        detail = f"  [failed: {', '.join(failed)}]" if failed else ""
        terminalreporter.write_line(f"criterion {number}: {status}  {label}{detail}")
