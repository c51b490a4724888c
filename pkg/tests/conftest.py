"""Shared, session-cached runs used by several test modules."""

import math

import numpy as np
import pytest

from dinavd import experiment, presets
from dinavd.dynamics import integrate
from dinavd.objectives import random_least_squares
from dinavd.schemes import SchemeConfig, igahd_run


def _dynamics(name):
    parsed = experiment.parse_config(presets.preset_config(name))
    return integrate(parsed["spec"], parsed["objective"]), parsed["objective"]


@pytest.fixture(scope="session")
def sharp_run():
    """Quadratic mu=1, alpha=4, beta=0.5, horizon 1e4."""
    return _dynamics("thm1-sharp-quadratic")


@pytest.fixture(scope="session")
def critical_run():
    """Quadratic mu=1, alpha=2, beta=1, horizon 500."""
    return _dynamics("thm1-critical-quadratic")


@pytest.fixture(scope="session")
def improved_run():
    """Quadratic mu=0.01, alpha=3, beta=1, horizon 1e4."""
    return _dynamics("thm2-sharp-quadratic")


@pytest.fixture(scope="session")
def flat_run():
    """|x|^4 / 4 in 2-D, alpha=3, beta=1, horizon 1e4."""
    return _dynamics("thm3-flat-power4")


@pytest.fixture(scope="session")
def ls50():
    obj = random_least_squares(50, 0)
    x0 = np.random.default_rng(1).standard_normal(50)
    return obj, x0


@pytest.fixture(scope="session")
def igahd_log(ls50):
    obj, x0 = ls50
    s = 1 / obj.lipschitz_grad
    return igahd_run(SchemeConfig(3.0, math.sqrt(s), s, 5000, x0), obj)


@pytest.fixture(scope="session")
def damping_logs(ls50):
    obj, x0 = ls50
    L = obj.lipschitz_grad
    s = 1 / (25 * L)
    return [igahd_run(SchemeConfig(3.0, b / math.sqrt(L), s, 5000, x0), obj) for b in (0, 1, 10)]


# -- acceptance report -----------------------------------------------------

ACCEPTANCE = {}


def record(number, name, passed, detail):
    """Store one acceptance line; several calls for one criterion are AND-ed."""
    prev = ACCEPTANCE.get(number)
    if prev is not None:
        passed = passed and prev[1]
        detail = f"{prev[2]}; {detail}"
    ACCEPTANCE[number] = (name, bool(passed), detail)
    print(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {name}: {detail}")


@pytest.fixture
def acceptance():
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        name, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(
            f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {name}: {detail}")
