import numpy as np
import pytest

from gblgp.program import parse_program
from gblgp.scfg import load_grammar

X2_PLUS_X = """\
0: r[1] = x1 * 1
1: r[2] = x1 * r[1]
2: r[0] = r[2] + 3
3: r[4] = r[2] + r[1]
"""

# Forced choices deriving x1 + 1 from the built-in first-experiment grammar.
X_PLUS_ONE_CHOICES = [0, 2, 2, 2, 0, 2, 1, 0]


@pytest.fixture
def x2_plus_x():
    return parse_program(X2_PLUS_X)


@pytest.fixture
def nguyen_grammar():
    return load_grammar("nguyen", 1)


@pytest.fixture
def extended_grammar():
    return load_grammar("extended", 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
