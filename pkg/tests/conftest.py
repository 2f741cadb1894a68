import numpy as np
import pytest

from qutrit_metrology import constants
from qutrit_metrology.transmon import TransmonParams

PHI0 = constants.FLUX_QUANTUM


@pytest.fixture
def device():
    return TransmonParams.from_frequencies(250e6, 25e9, 0.3, 1e-10)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Call with (number, ok, detail); the line is echoed in the terminal summary."""

    def report(number, ok, detail=""):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
