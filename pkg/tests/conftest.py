import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from orthoplab.batteries import solve_standard

settings.register_profile("lab", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")


@pytest.fixture(scope="session")
def solved_p4():
    return solve_standard("model_p4", 33)


@pytest.fixture(scope="session")
def solved_p15():
    return solve_standard("model_p1.5", 33)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance():
    """Record one criterion line: ``acceptance(k, title, ok, detail)``; returns ``ok``."""

    def record(k: int, title: str, ok: bool, detail: str) -> bool:
        _ACCEPTANCE[k] = f"criterion {k:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
