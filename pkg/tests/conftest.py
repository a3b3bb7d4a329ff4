import logging

import pytest
from hypothesis import HealthCheck, settings

from aclp.bayesnet import load_alarm

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def alarm():
    return load_alarm()


@pytest.fixture(autouse=True)
def _quiet_search_logs():
    logging.getLogger("aclp.structlearn").setLevel(logging.ERROR)
    yield


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
