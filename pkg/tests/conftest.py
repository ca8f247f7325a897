import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import OUTCOMES
    except ImportError:
        return
    if not OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(OUTCOMES):
        passed, detail = OUTCOMES[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
