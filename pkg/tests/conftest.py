import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sumosim import ontology  # noqa: E402

_criteria: dict = {}


@pytest.fixture(scope="session")
def kb():
    return ontology.load_shipped()


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    ok = report.passed
    _criteria.setdefault(marker, []).append(ok)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = item.get_closest_marker("acceptance")
    if m is not None:
        report.criterion = m.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    from test_acceptance import CRITERIA

    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        results = _criteria[n]
        verdict = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(
            f"criterion {n}: {verdict} ({sum(results)}/{len(results)} checks) {CRITERIA[n]}")
