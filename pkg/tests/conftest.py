import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# Criterion name -> passed, filled in by the @pytest.mark.acceptance tests
# and echoed as one line each after the run.
ACCEPTANCE_RESULTS: dict[str, bool] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(name): a named release criterion; its verdict is "
        "echoed in the terminal summary"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call":
        mark = item.get_closest_marker("acceptance")
        if mark:
            name = mark.args[0]
            ACCEPTANCE_RESULTS[name] = ACCEPTANCE_RESULTS.get(name, True) and report.passed


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok in ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}")
