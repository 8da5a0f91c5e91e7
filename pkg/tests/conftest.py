"""Shared test hooks.

Acceptance tests append one verdict line per criterion to
ACCEPTANCE_LINES; the terminal-summary hook prints them after the run,
outside pytest's output capture, so the pass/fail ledger is always
visible at the end of the session.
"""

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
