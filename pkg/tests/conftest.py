from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", derandomize=True, deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

CORPUS = Path(__file__).parent / "corpus"

_criteria: dict[int, str] = {}
_owner: dict[str, int] = {}
_failed: set[int] = set()
_seen: set[int] = set()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion checked by this test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            n, title = mark.args
            _criteria[n] = title
            _owner[item.nodeid] = n


def pytest_runtest_logreport(report):
    n = _owner.get(report.nodeid)
    if n is None:
        return
    if report.when == "call" or report.failed or report.skipped:
        _seen.add(n)
    if report.failed or (report.when == "call" and report.skipped):
        _failed.add(n)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        status = "FAIL" if n in _failed or n not in _seen else "PASS"
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {_criteria[n]}")


@pytest.fixture
def corpus():
    return CORPUS
