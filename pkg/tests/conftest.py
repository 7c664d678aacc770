"""Collects the outcome of every acceptance criterion and prints one line each."""

import pytest

_RESULTS: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        measured = "; ".join(f"{k} = {v}" for k, v in item.user_properties if k != "criterion")
        status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        _RESULTS[number] = (status, title, measured)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        status, title, measured = _RESULTS[number]
        line = f"{status} criterion {number:2d}: {title}"
        if measured:
            line += f"  [{measured}]"
        terminalreporter.write_line(line)
