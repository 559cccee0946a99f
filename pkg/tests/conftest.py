"""Shared fixtures and the acceptance summary hook."""

from __future__ import annotations

import pytest

from sl_krein import preset

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def free_unit():
    return preset("free-unit")


@pytest.fixture(scope="session")
def free_pi():
    return preset("free-pi")


@pytest.fixture(scope="session")
def step_q():
    return preset("step-q")


@pytest.fixture(scope="session")
def step_p():
    return preset("step-p")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
