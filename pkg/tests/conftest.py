import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mda_sim.harness import ExperimentConfig, run_experiment  # noqa: E402


@pytest.fixture(scope="session")
def default_report():
    """The default sweep at full size: K in {1,2,4,8,16}, L in {1,2,3}, 10^4 trials."""
    return run_experiment(ExperimentConfig(trials=10_000))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
