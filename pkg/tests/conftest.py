import numpy as np
import pytest

from nscq.bilevel import build_combined_program
from nscq.examples import SAWTOOTH_POINT, cubic_bilevel, exponential_bilevel, sawtooth_system


@pytest.fixture(scope="session")
def sawtooth():
    return sawtooth_system()


@pytest.fixture(scope="session")
def sawtooth_point():
    return SAWTOOTH_POINT.copy()


@pytest.fixture(scope="session")
def cubic():
    return cubic_bilevel()


@pytest.fixture(scope="session")
def cubic_cp(cubic):
    return build_combined_program(cubic)


@pytest.fixture(scope="session")
def exponential():
    return exponential_bilevel()


@pytest.fixture(scope="session")
def exponential_cp(exponential):
    return build_combined_program(exponential)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def cubic_sys(cubic_cp):
    return cubic_cp.system


@pytest.fixture(scope="session")
def exponential_sys(exponential_cp):
    return exponential_cp.system


# acceptance summary ---------------------------------------------------------------

_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record ``(name, passed, detail)`` for the end-of-run acceptance summary."""
    def record(name, passed, detail=""):
        _ACCEPTANCE[name] = (bool(passed), detail)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda s: int(s[2:])):
        passed, detail = _ACCEPTANCE[name]
        terminalreporter.write_line(f"{name} {'PASS' if passed else 'FAIL'} {detail}".rstrip())
