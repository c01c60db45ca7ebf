"""Shared test infrastructure.

The acceptance suite registers one verdict per criterion; a terminal
summary hook prints them as single pass/fail lines after the run.
"""

_CRITERIA: list = []


def record_criterion(number: int, name: str, passed: bool, detail: str) -> None:
    _CRITERIA.append((number, name, passed, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(_CRITERIA):
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{verdict}] criterion {number} ({name}): {detail}")
