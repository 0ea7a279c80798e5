import sys
from pathlib import Path

# make test-local helper modules (valgen, oracles) importable
sys.path.insert(0, str(Path(__file__).parent))

# acceptance criterion outcomes, echoed in the terminal summary:
# (criterion name, status, detail)
ACCEPTANCE_RESULTS: list[tuple[str, str, str]] = []


def record_criterion(name: str, ok: bool, detail: str, warning: str | None = None):
    """Log one acceptance criterion outcome, then enforce it."""
    status = "PASS" if ok else "FAIL"
    if ok and warning:
        status = "PASS (warning: %s)" % warning
    ACCEPTANCE_RESULTS.append((name, status, detail))
    assert ok, "%s: %s" % (name, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line("[%s] %s: %s" % (status, name, detail))
