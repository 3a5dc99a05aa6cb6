import numpy as np
import pytest

from nlmc.kernel import FracParams
from nlmc.quadrature import QuadratureSpec


@pytest.fixture
def p2():
    return FracParams(2, 0.25)


@pytest.fixture
def p3():
    return FracParams(3, 0.25)


@pytest.fixture
def ref2():
    return QuadratureSpec(256)


@pytest.fixture
def ref3():
    return QuadratureSpec(64)


def angle(t):
    return np.array([np.cos(t), np.sin(t)])


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
