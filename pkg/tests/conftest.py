import numpy as np
import pytest

from epiframes.synthpop import SimConfig, run_epidemic

# acceptance tests append (number, passed, detail) here; printed in the summary
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def trace():
    """Full-size epidemic, seed 1."""
    return run_epidemic(SimConfig(seed=1))


@pytest.fixture(scope="session")
def small_trace():
    """A 2x2 grid epidemic that grows over about 25 days and then declines."""
    cfg = SimConfig(grid_rows=2, grid_cols=2, cell_pop_min=150, cell_pop_max=200, phase1_days=20,
                    phase2_days=30, meetings_rate_1=4.0, meetings_rate_2=2.0, infections_per_meeting_1=2,
                    infections_per_meeting_2=1, initial_exposed=5, seed=4)
    return run_epidemic(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE_LINES, key=lambda x: x[0]):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
