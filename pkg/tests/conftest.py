import numpy as np
import pytest
from hypothesis import settings

from doboc import fixtures

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile("ci")

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion implemented by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        prev = _criteria.get(num, (title, "PASS"))[1]
        status = "PASS" if rep.outcome == "passed" and prev == "PASS" else "FAIL"
        _criteria[num] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        title, status = _criteria[num]
        terminalreporter.write_line(f"[{status}] criterion {num:>2}: {title}")


@pytest.fixture
def fix_a():
    return fixtures.fixture_a()


@pytest.fixture(scope="session")
def ring():
    return fixtures.ring_quadratic()


@pytest.fixture(scope="session")
def star():
    return fixtures.star_logistic()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
