import sys
from pathlib import Path

# Make sibling test modules importable (shared fixtures in test_index.py).
sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.skipped:
        _ACCEPTANCE_RESULTS[name] = "SKIP"
    else:
        _ACCEPTANCE_RESULTS[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in sorted(_ACCEPTANCE_RESULTS.items()):
        terminalreporter.write_line(f"{outcome:4s}  {name}")
