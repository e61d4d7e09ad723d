import numpy as np
import pytest

from ebayes.experiments import scenario_fig1, scenario_fig4


@pytest.fixture(scope="session")
def fig1():
    return scenario_fig1()


@pytest.fixture(scope="session")
def fig4():
    return scenario_fig4()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES = {}


def record_criterion(number, passed, detail):
    """Store and print one pass/fail line for an acceptance criterion."""
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
