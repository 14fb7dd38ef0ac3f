import sys
from pathlib import Path

import numpy as np
import pytest

from socialirl.simulator import FIXTURE_THETA, FIXTURE_TRANSITIONS, generate_trajectories

DATA = Path(__file__).resolve().parents[1] / "src" / "socialirl" / "data"


@pytest.fixture(scope="session")
def events_path():
    return DATA / "synthetic_events.jsonl"


@pytest.fixture(scope="session")
def labels_path():
    return DATA / "synthetic_labels.csv"


@pytest.fixture(scope="session")
def fixture_trajectories():
    return generate_trajectories(FIXTURE_THETA, FIXTURE_TRANSITIONS, count=200, length=50, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
