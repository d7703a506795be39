"""Collects ``@pytest.mark.criterion(n, text)`` outcomes and prints one line per criterion."""

from collections import OrderedDict

import pytest

_RESULTS: "OrderedDict[int, dict]" = OrderedDict()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, text = marker.args
    entry = _RESULTS.setdefault(number, {"text": text, "passed": True, "tests": [], "seen": False})
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        entry["seen"] = True
        entry["tests"].append((item.name, report.outcome))
        if report.outcome != "passed":
            entry["passed"] = False


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        entry = _RESULTS[number]
        if not entry["seen"]:
            continue
        status = "PASS" if entry["passed"] else "FAIL"
        failed = [name for name, outcome in entry["tests"] if outcome != "passed"]
        detail = f"  (failing: {', '.join(failed)})" if failed else ""
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {entry['text']}{detail}")
