import os
import sys
from collections import defaultdict

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_CRITERIA: dict[int, str] = {}
_OUTCOMES: dict[int, list[bool]] = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k, title): acceptance criterion number k")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    k, title = marker.args
    _CRITERIA[k] = title
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _OUTCOMES[k].append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        results = _OUTCOMES.get(k, [])
        status = "PASS" if results and all(results) else "FAIL"
        terminalreporter.write_line(f"AC-{k} {status}  {_CRITERIA[k]} ({sum(results)}/{len(results)} checks)")
