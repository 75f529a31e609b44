import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from advecta.system import AdvancedSystem, Horizon  # noqa: E402
from advecta.transition import build_fundamental  # noqa: E402

settings.register_profile("advecta", deadline=None, max_examples=60)
settings.load_profile("advecta")

REPO = Path(__file__).resolve().parents[1]
SCENARIOS = REPO / "scenarios"

# lines recorded by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def scalar_system(a=0.5, h=0.4, b=0.3, r=0.2, t0=0.0):
    return AdvancedSystem.two_term([[a]], h, [[b]], r, t0=t0)


def constant_drift_system(D):
    """One zero-advance term A = -D, so the drift is exactly D."""
    D = np.asarray(D, dtype=float)
    return AdvancedSystem.from_strings([((-D).tolist(), 0)])


def grid_for(sys_, T, dt, lookahead=3, extension="hold"):
    return build_fundamental(sys_, Horizon(T, dt, lookahead, extension))


@pytest.fixture(scope="session")
def scalar_T20():
    """The alpha = 0.26 scalar example on a 20-unit window, dt = 0.01."""
    s = scalar_system()
    return s, grid_for(s, 20.0, 0.01)
