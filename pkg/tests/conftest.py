"""Shared test plumbing.

The acceptance tests register one line per criterion; the summary hook
prints them even when pytest captures stdout.
"""

ACCEPTANCE_LINES = []


def record_acceptance(name: str, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES.append(f"[{status}] {name}: {detail}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
