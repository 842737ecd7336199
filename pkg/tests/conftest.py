import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA: dict[int, dict] = {}


@pytest.fixture
def finding(request):
    """Let an acceptance test attach a one-line measurement to its PASS/FAIL line."""
    marker = request.node.get_closest_marker("criterion")
    if marker is None:
        return lambda note: None
    return _entry(marker)["notes"].append


def _entry(marker):
    return _CRITERIA.setdefault(marker.args[0], {"title": marker.args[1], "notes": [], "outcome": None,
                                                 "seconds": 0.0})


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    entry = _entry(marker)
    entry["seconds"] += report.duration
    if report.failed:
        entry["outcome"] = "FAIL"
    elif report.when == "call" and entry["outcome"] is None:
        entry["outcome"] = "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        status = entry["outcome"] or "NOT RUN"
        detail = "; ".join(entry["notes"])
        line = f"criterion {number} {status}: {entry['title']} ({entry['seconds']:.1f}s)"
        terminalreporter.write_line(line + (f" | {detail}" if detail else ""))
