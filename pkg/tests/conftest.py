"""Collects the outcome of every acceptance criterion and prints one line per criterion."""

import pytest

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "seen": False, "detail": ""})
    for key, value in item.user_properties:
        if key == "summary":
            entry["summary"] = value
    if report.when == "call" or report.failed:
        entry["seen"] = True
        if report.failed:
            entry["ok"] = False
            entry["detail"] = report.longrepr.reprcrash.message if hasattr(report.longrepr, "reprcrash") else ""
        elif report.skipped:
            entry["ok"] = False
            entry["detail"] = "skipped"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        status = "PASS" if e["ok"] and e["seen"] else "FAIL"
        line = f"criterion {number:>2}: {status}  {e['title']}"
        if e.get("summary"):
            line += f"  [{e['summary']}]"
        if status == "FAIL" and e["detail"]:
            line += f"  ({e['detail'].splitlines()[0][:160]})"
        terminalreporter.write_line(line)
