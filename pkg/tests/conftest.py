import time

import pytest

from qdlnsim.optics.models import DetectionModel, EmitterModel, TpiConfig
from qdlnsim.optics.montecarlo import simulate_tpi

# filled in by test_acceptance.py, printed at the end of the run
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int(k.rstrip("abcd")), k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def detection():
    return DetectionModel()


@pytest.fixture(scope="session")
def on_resonant_cfg():
    return TpiConfig()


@pytest.fixture(scope="session")
def on_resonant_run(on_resonant_cfg, detection):
    """One long run shared by the MC-agreement and fit-recovery checks, with its wall time."""
    t0 = time.perf_counter()
    h = simulate_tpi(on_resonant_cfg, detection, 10_000_000, seed=2024)
    return h, time.perf_counter() - t0


@pytest.fixture(scope="session")
def on_resonant_hist_1e7(on_resonant_run):
    return on_resonant_run[0]


@pytest.fixture(scope="session")
def emitter():
    return EmitterModel()
