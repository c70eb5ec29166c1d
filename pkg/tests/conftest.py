import sys
from pathlib import Path

import numpy as np
import pytest

from reinbo.grammar import default_grammar


@pytest.fixture(scope="session")
def toy():
    return default_grammar(10)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    sys.path.insert(0, str(Path(__file__).parent))
    from helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
