import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from spoofgeo.scenario import canonical_scenario

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def scn():
    return canonical_scenario()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def verdict():
    """Record a criterion outcome as one PASS/FAIL line, then assert it."""

    def record(n: int, ok: bool, detail: str):
        line = f"CRITERION {n:2d} {'PASS' if ok else 'FAIL'}: {detail}"
        ACCEPTANCE[n] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
