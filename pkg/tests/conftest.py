import numpy as np
import pytest

from qfc.core import CavityParams


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit_cavity():
    return CavityParams(1.0, 1.0, 1.0, kn=1.0)


#: ``(criterion, passed, detail)`` lines collected by the acceptance suite
ACCEPTANCE_LINES: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE_LINES, key=lambda t: int(t[0].split()[0])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {name}: {detail}")
