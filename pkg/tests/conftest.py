import numpy as np
import pytest

from smscma.model import SystemConfig, resolve_codebooks, make_default_codebooks


@pytest.fixture(scope="session")
def cfg3():
    """3 bpcu scenario: N_t=4, M=2, N_r=2."""
    return SystemConfig(N_t=4, M=2, N_r=2)


@pytest.fixture(scope="session")
def cb2():
    return resolve_codebooks(SystemConfig(M=2))


@pytest.fixture(scope="session")
def cb4():
    return resolve_codebooks(SystemConfig(M=4))


@pytest.fixture(scope="session")
def small_cfg():
    """N_t=2, M=2 on the six-user layout: ML is cheap (4^6 hypotheses)."""
    return SystemConfig(N_t=2, M=2, N_r=2, rho=(35, 70, 50))


@pytest.fixture(scope="session")
def single_user_cfg():
    return SystemConfig(U=1, R=1, N_t=2, M=2, N_r=2, rho=(), F=((1,),), require_overload=False)


@pytest.fixture(scope="session")
def single_user_cb():
    return make_default_codebooks(2, ((1,),))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
