import pytest

from ltem_ntn.orbit import OrbitScenario
from ltem_ntn.scenario import default_scenario

LEO600 = OrbitScenario(600.0)
LEO1200 = OrbitScenario(1200.0)
GEO = OrbitScenario(35786.0)


@pytest.fixture
def scenario():
    return default_scenario()


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
