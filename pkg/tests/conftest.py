"""Shared fixtures and the acceptance-criterion reporting hook.

Tests marked ``@pytest.mark.criterion(n, "label")`` are collected into a
per-criterion verdict; the terminal summary prints one PASS/FAIL line per
criterion so the suite's acceptance status can be read at a glance.
"""

from __future__ import annotations

import numpy as np
import pytest

_RESULTS: dict[int, list[str]] = {}
_LABELS: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(num, label): acceptance-criterion test")
    config.addinivalue_line(
        "markers", "slow: long-running statistical study")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    num = int(marker.args[0])
    _LABELS.setdefault(num, str(marker.args[1]) if len(marker.args) > 1 else "")
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _RESULTS.setdefault(num, []).append(rep.outcome)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RESULTS:
        return
    terminalreporter.ensure_newline()
    terminalreporter.section("acceptance criteria")
    for num in sorted(_RESULTS):
        outcomes = _RESULTS[num]
        if any(o == "failed" for o in outcomes):
            status = "FAIL"
        elif all(o == "skipped" for o in outcomes):
            status = "SKIP"
        else:
            status = "PASS"
        terminalreporter.write_line(
            f"criterion {num:2d}: {status} — {_LABELS.get(num, '')}")


@pytest.fixture
def rng():
    return np.random.default_rng(0)
