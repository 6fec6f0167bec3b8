import pytest

_CRITERIA_LINES: list[str] = []


@pytest.fixture(scope="session")
def report_criterion():
    """Collect one summary line per acceptance criterion for the terminal report."""
    return _CRITERIA_LINES.append


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
