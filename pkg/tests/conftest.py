"""Shared pytest plumbing: acceptance-criterion result reporting.

Acceptance tests record one line per criterion; the lines are echoed in a
dedicated section of the terminal summary so the verdicts are visible
regardless of pytest's output capturing.
"""

CRITERION_LINES = []


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"CRITERION {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    CRITERION_LINES.append((number, line))
    print(line, flush=True)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(CRITERION_LINES):
            terminalreporter.write_line(line)
