"""Shared pytest plumbing: the acceptance-criteria summary block.

Acceptance tests register a one-line detail string via record(); the
terminal summary prints one PASS/FAIL line per criterion so the outcome
is visible even though pytest captures stdout of passing tests.
"""

import re

_DETAILS = {}
_OUTCOMES = {}

_CRITERION_RE = re.compile(r"test_criterion_(\d+)")


def record(criterion, detail):
    """Called from acceptance tests to attach measured values."""
    _DETAILS[int(criterion)] = detail


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    m = _CRITERION_RE.search(report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    # keep the worst outcome if a criterion maps to several tests
    _OUTCOMES[n] = _OUTCOMES.get(n, True) and report.passed


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        verdict = "PASS" if _OUTCOMES[n] else "FAIL"
        detail = _DETAILS.get(n, "")
        line = f"criterion {n:2d}: {verdict}"
        if detail:
            line += f"  {detail}"
        terminalreporter.write_line(line)
