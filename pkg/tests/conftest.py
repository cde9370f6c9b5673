import pytest

# filled by test_acceptance; printed after the run so the lines survive output capture
CRITERIA_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(CRITERIA_LINES):
        terminalreporter.write_line(CRITERIA_LINES[key])
