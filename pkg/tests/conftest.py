"""Shared fixtures: the bundled device and calibrated gate recipes.

Calibrations are slow, so each gate is calibrated at most once per session.
"""
from __future__ import annotations

import pytest

from paramgate.calibration import calibrate_gate
from paramgate.device import reference_device, reference_gate_table
from paramgate.dynamics import NoiseModel


@pytest.fixture(scope="session")
def device():
    return reference_device()


@pytest.fixture(scope="session")
def gate_table():
    return reference_gate_table()


class _RecipeBook:
    """Lazily calibrated recipes at the bundled operating amplitudes."""

    def __init__(self, device, table):
        self.device = device
        self.table = table
        self.recipes = {}
        self.seconds = {}

    def __getitem__(self, kind):
        if kind not in self.recipes:
            import time
            start = time.perf_counter()
            self.recipes[kind] = calibrate_gate(self.device, None, kind, self.table[kind]["amp_phi0"])
            self.seconds[kind] = time.perf_counter() - start
        return self.recipes[kind]

    def noise(self, kind):
        return NoiseModel.for_gate(self.device, self.table[kind])


@pytest.fixture(scope="session")
def recipes(device, gate_table):
    return _RecipeBook(device, gate_table)


# ---------------------------------------------------------------------------
# acceptance summary: one PASS/FAIL line per criterion at the end of the run

_ACCEPTANCE_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = {}


@pytest.fixture
def acceptance(request):
    """Record the verdict of one acceptance criterion.

    Call it as ``acceptance(number, title, passed, detail)``; the lines are
    printed in criterion order in the terminal summary.
    """
    log = request.config.stash[_ACCEPTANCE_KEY]

    def record(number: int, title: str, passed: bool, detail: str) -> None:
        log[number] = f"{'PASS' if passed else 'FAIL'}  criterion {number:>2}  {title}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(_ACCEPTANCE_KEY, {})
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(log):
        terminalreporter.write_line(log[number])
