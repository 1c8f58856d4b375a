"""Shared fixtures and the acceptance summary printed after the run."""

from __future__ import annotations

import os

import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []

os.environ.setdefault("PYTHONHASHSEED", "0")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
