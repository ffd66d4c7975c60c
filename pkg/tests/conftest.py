import numpy as np
import pytest

from lsqhelm.problems import make_manufactured
from lsqhelm.verification import interface_system

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_system():
    """3x3 mesh, (q,p)=(2,4), manufactured quadratic data."""
    prob = make_manufactured(3.0, 2, seed=3)
    return prob, interface_system(prob, 3, 3, 2, 4)


@pytest.fixture
def acceptance_report():
    def record(criterion: str, passed: bool, detail: str) -> None:
        line = f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
