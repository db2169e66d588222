import pytest

from .helpers import gap_state


@pytest.fixture
def road_states():
    return gap_state("t0", 0, 30), gap_state("t1", 1, 15)


ACCEPTANCE_RESULTS = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None and report.when == "call":
        ACCEPTANCE_RESULTS[marker.args[0]] = (report.passed, marker.args[1])


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        passed, title = ACCEPTANCE_RESULTS[num]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {num}. {title}")
