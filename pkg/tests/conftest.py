import numpy as np
import pytest

from etpc.basis import monomial_basis
from etpc.config import example1_config
from etpc.feasibility import build_certificate, lyapunov_matrix
from etpc.horizon import compute_horizon
from etpc.plant import example1_model

K1 = np.array([[0.0, 0.0, -0.3]])
Q1 = 0.01 * np.eye(3)
X0 = np.array([2.0, 5.0, 6.0])


@pytest.fixture(scope="session")
def model1():
    return example1_model()


@pytest.fixture(scope="session")
def P1(model1):
    return lyapunov_matrix(model1, K1, Q1)


@pytest.fixture(scope="session")
def cfg1():
    return example1_config()


@pytest.fixture(scope="session")
def horizon1(model1):
    return compute_horizon(model1, monomial_basis(3), 25)


@pytest.fixture(scope="session")
def cert1(model1, horizon1):
    return build_certificate(model1, monomial_basis(3), horizon1, K1, Q1, 0.952)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance report -------------------------------------------------------

ACCEPTANCE = []


def record_acceptance(number, title, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} -- {detail}"
    ACCEPTANCE.append((number, line))
    print(line, flush=True)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE):
        terminalreporter.write_line(line)
