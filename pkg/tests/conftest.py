from __future__ import annotations

import random

import pytest

from coig.backends import mock_profile
from coig.executor import Executor
from coig.store import RunStore

from helpers import random_caption  # noqa: F401  (re-exported for tests)

# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def store(tmp_path):
    return RunStore(tmp_path / "store")


@pytest.fixture
def profile():
    return mock_profile()


@pytest.fixture
def executor(store, profile):
    return Executor(store=store, profile=profile)


@pytest.fixture
def rng():
    return random.Random(1234)
