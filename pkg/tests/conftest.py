"""Collects per-criterion outcomes from tests marked ``acceptance(n, title)``."""

from collections import OrderedDict

import pytest

_CRITERIA = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or rep.when != "call" and not rep.failed:
        return
    number, title = marker.args
    entry = _CRITERIA.setdefault(number, {"title": title, "failed": [], "passed": []})
    if rep.when == "call" and rep.passed:
        entry["passed"].append(item.name)
    elif rep.failed:
        entry["failed"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        status = "FAIL" if entry["failed"] else "PASS"
        line = f"criterion {number}: {status}  {entry['title']}"
        if entry["failed"]:
            line += f"  (failed: {', '.join(entry['failed'])})"
        tr.write_line(line)
