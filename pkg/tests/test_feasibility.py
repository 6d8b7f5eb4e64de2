import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etpc.basis import block_P, monomial_basis, tabulated_basis
from etpc.feasibility import (
    FeasibilityError,
    alpha_floor,
    build_certificate,
    construct_C,
    lmi_holds,
    lmi_margin,
    max_feasible_M,
)
from etpc.horizon import assemble_qcqp, compute_horizon, constraint_values
from etpc.linalg_core import solve_discrete_lyapunov
from etpc.plant import SystemModel

from conftest import K1, Q1
from oracles import cubic_char_roots, random_stabilizable


def scalar_horizon(a, N=10):
    return compute_horizon(SystemModel(np.array([[a]]), np.array([[1.0]]), 0.0), monomial_basis(0), N)


def test_construct_C_monomial_p2():
    C = construct_C(K1, monomial_basis(2))
    np.testing.assert_array_equal(C, [[0, 0, -0.3], [0, 0, 0], [0, 0, 0]])


def test_construct_C_constant_basis_is_K():
    np.testing.assert_array_equal(construct_C(K1, monomial_basis(0)), K1)


@pytest.mark.parametrize("p,m", [(0, 1), (2, 1), (3, 2), (4, 3)])
def test_construct_C_defining_property(rng, p, m):
    K = rng.standard_normal((m, 4))
    basis = monomial_basis(p)
    np.testing.assert_allclose(block_P(basis, 0, m) @ construct_C(K, basis), K, atol=0, rtol=0)


def test_construct_C_scaled_constant_table():
    table = np.column_stack([2.0 * np.ones(6), np.arange(6.0)])
    C = construct_C(K1, tabulated_basis(table))
    np.testing.assert_allclose(C[0], K1[0] / 2.0)
    assert not np.any(C[1])


def test_construct_C_rejects_bad_pattern():
    table = np.column_stack([np.ones(6), np.ones(6)])  # phi_1(0) != 0
    with pytest.raises(FeasibilityError):
        construct_C(K1, tabulated_basis(table))


def test_construct_C_rejects_nonconstant_phi0():
    table = np.column_stack([1.0 + np.arange(6.0), np.arange(6.0)])
    with pytest.raises(FeasibilityError, match="constant"):
        construct_C(K1, tabulated_basis(table))


def test_lmi_scalar_stable():
    h = scalar_horizon(0.5)
    assert lmi_holds(np.zeros((1, 1)), h, np.eye(1), 0.9, 1)
    assert lmi_margin(np.zeros((1, 1)), h, np.eye(1), 0.9, 1) == pytest.approx(0.25 - 0.9)


def test_lmi_scalar_marginal():
    h = scalar_horizon(1.0)
    assert not lmi_holds(np.zeros((1, 1)), h, np.eye(1), 0.9, 1)


def test_lmi_rejects_tau_zero():
    with pytest.raises(FeasibilityError):
        lmi_margin(np.zeros((1, 1)), scalar_horizon(0.5), np.eye(1), 0.9, 0)


def test_max_M_scalar_cases():
    assert max_feasible_M(np.zeros((1, 1)), scalar_horizon(0.5, 10), np.eye(1), 0.9, 10) == 10
    assert max_feasible_M(np.zeros((1, 1)), scalar_horizon(1.0, 10), np.eye(1), 0.9, 10) == 0


def test_example_window_is_eight(model1, horizon1, P1):
    C = construct_C(K1, monomial_basis(3))
    assert max_feasible_M(C, horizon1, P1, 0.952, 25) == 8
    for tau in range(1, 9):
        assert lmi_holds(C, horizon1, P1, 0.952, tau)
    assert not lmi_holds(C, horizon1, P1, 0.952, 9)


def test_example_certificate(cert1):
    assert cert1.M_max == 8
    np.testing.assert_array_equal(block_P(monomial_basis(3), 0, 1) @ cert1.C, K1)


def test_alpha_floor_trivial():
    assert alpha_floor(np.eye(3), np.eye(3)) == pytest.approx(0.0, abs=1e-15)
    assert alpha_floor(2 * np.eye(3), np.eye(3)) == pytest.approx(0.5, abs=1e-15)


def test_alpha_floor_example(P1):
    lam = cubic_char_roots(P1)
    expected = 1 - 0.01 / lam[-1]
    value = alpha_floor(P1, Q1)
    assert 0 < value < 1
    assert value == pytest.approx(expected, rel=1e-12)
    assert value == pytest.approx(0.951744772452361, rel=1e-12)


def test_certificate_point_feasible_example(P1, horizon1, cert1, rng):
    for _ in range(100):
        x = rng.standard_normal(3) * rng.uniform(0.01, 100)
        pr = assemble_qcqp(horizon1, x, P1, np.eye(1), 0.952, 8)
        assert np.max(constraint_values(pr, cert1.C @ x)) <= 0.0


def _random_case(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    m = int(rng.integers(1, 3))
    A, B, K = random_stabilizable(rng, n, m, radius=rng.uniform(0.5, 1.5))
    Q = np.diag(rng.uniform(0.01, 2.0, n))
    P = solve_discrete_lyapunov(A + B @ K, Q)
    return rng, SystemModel(A, B, 0.0), K, Q, P


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), p=st.integers(0, 3))
def test_lmi_implies_certificate_feasible(seed, p):
    rng, model, K, Q, P = _random_case(seed)
    fl = alpha_floor(P, Q)
    alpha = fl + (1 - fl) * rng.uniform(1e-3, 0.9)
    basis = monomial_basis(p)
    h = compute_horizon(model, basis, max(p, 4))
    C = construct_C(K, basis)
    M = max_feasible_M(C, h, P, alpha)
    if M == 0:
        return
    for _ in range(100):
        x = rng.standard_normal(model.n)
        pr = assemble_qcqp(h, x, P, np.eye(model.m), alpha, M)
        assert np.max(constraint_values(pr, C @ x)) <= 0.0


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), p=st.integers(0, 3), frac=st.floats(0.0, 0.999))
def test_alpha_above_floor_gives_M1(seed, p, frac):
    _, model, K, Q, P = _random_case(seed)
    fl = alpha_floor(P, Q)
    alpha = min(fl + 1e-9 + frac * (1 - fl), 1 - 1e-12)
    basis = monomial_basis(p)
    h = compute_horizon(model, basis, max(p, 1))
    assert lmi_holds(construct_C(K, basis), h, P, alpha, 1)


def test_build_certificate_rejects_unstable(model1, horizon1):
    with pytest.raises(FeasibilityError, match="not Schur stable"):
        build_certificate(model1, monomial_basis(3), horizon1, np.zeros((1, 3)), Q1, 0.952)
