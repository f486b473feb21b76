import numpy as np
import pytest

from zigzag import AMPLIFIED, ATTENUATED
from zigzag.exact import make_context

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def amplified():
    return AMPLIFIED


@pytest.fixture(scope="session")
def attenuated():
    return ATTENUATED


@pytest.fixture(scope="session")
def ctx2(amplified):
    return make_context(amplified)


@pytest.fixture(scope="session")
def ctx3(attenuated):
    return make_context(attenuated)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
