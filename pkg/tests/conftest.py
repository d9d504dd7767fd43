import numpy as np
import pytest
from hypothesis import settings

from uvesc import experiments as ex

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def example_result():
    """Synthesis of the two-input example; solved once per session."""
    return ex.synthesize_example()


@pytest.fixture(scope="session")
def example_poly():
    return ex.example_polytope()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = {}


def record(number: int, title: str, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (title, bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
