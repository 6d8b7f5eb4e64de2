import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etpc.basis import monomial_basis
from etpc.controllers import ClfController
from etpc.plant import SystemModel, step, zero_disturbance
from etpc.trigger import (
    TriggerConfig,
    TriggerError,
    abar_table,
    make_trigger_config,
    predictor,
    should_trigger,
    sigma_bar,
    threshold,
)

from conftest import X0
from oracles import cubic_char_roots, naive_pow, power_iteration_norm


def cfg_with(eps_sq=1.0, beta=0.99, alpha=0.5, M=2):
    # D = 1, sigma = 1/eps
    return TriggerConfig(alpha, beta, 1.0 / math.sqrt(eps_sq), M, np.eye(2), 1.0)


def test_predictor_no_disturbance(model1, P1, rng):
    m0 = SystemModel(model1.A, model1.B, 0.0, zero_disturbance(3))
    x, u = rng.standard_normal(3), rng.standard_normal(1)
    y = model1.A @ x + model1.B @ u
    assert predictor(x, u, m0, P1) == pytest.approx(y @ P1 @ y, rel=1e-14)


def test_predictor_at_origin(model1, P1):
    lam = cubic_char_roots(P1)[-1]
    assert predictor(np.zeros(3), np.zeros(1), model1, P1) == pytest.approx(lam * 0.01**2, rel=1e-10)


def test_predictor_bounds_first_step(model1, P1, cert1):
    ctrl = ClfController(model1, monomial_basis(3), 25, 2, np.eye(1), 0.952, cert1)
    st0 = ctrl.on_event(X0, 0)
    u = ctrl.control_input(st0, 0)
    x1 = step(model1, X0, u, 0)
    assert x1 @ P1 @ x1 <= predictor(X0, u, model1, P1) + 1e-9


def test_threshold_zero_V():
    assert threshold(5, 0, 0.0, cfg_with(eps_sq=2.5)) == pytest.approx(2.5)


def test_threshold_arithmetic():
    assert threshold(1, 0, 100.0, cfg_with(eps_sq=1.0)) == pytest.approx(98.01, rel=1e-14)


def test_threshold_at_ball_boundary():
    cfg = cfg_with(eps_sq=1.0)
    for t in range(0, 50):
        assert threshold(t, 0, 1.0, cfg) == pytest.approx(1.0)


def test_threshold_rejects_past():
    with pytest.raises(TriggerError):
        threshold(0, 1, 1.0, cfg_with())


def test_should_trigger_inside_ball(model1, P1):
    cfg = make_trigger_config(model1, P1, 0.952, 0.99, 0.01, 2)
    # tiny state and input: predictor stays below eps^2 = 1
    x = np.full(3, 1e-3)
    assert not should_trigger(x, 3, 0, 0.5, np.zeros(1), cfg, model1)
    assert should_trigger(10 * X0, 3, 0, 0.5, np.zeros(1), cfg, model1)


def test_config_validation():
    with pytest.raises(TriggerError):
        TriggerConfig(0.99, 0.99, 0.01, 2, np.eye(2), 0.01)
    with pytest.raises(TriggerError):
        TriggerConfig(0.5, 0.9, 0.0, 2, np.eye(2), 0.01)
    with pytest.raises(TriggerError):
        TriggerConfig(0.5, 0.9, 0.1, 0, np.eye(2), 0.01)


def test_epsilon(model1, P1):
    cfg = make_trigger_config(model1, P1, 0.952, 0.99, 0.01, 2)
    assert cfg.epsilon == pytest.approx(1.0)
    assert cfg.eps_sq == pytest.approx(1.0)
    assert cfg.certified


def test_abar_table(model1, rng):
    tab = abar_table(model1.A, 6)
    assert tab[0] == 0.0
    for tau in range(1, 7):
        S = sum(naive_pow(model1.A, j) for j in range(tau))
        assert tab[tau] == pytest.approx(power_iteration_norm(S), rel=1e-9)
    assert np.all(tab >= 0)


def test_sigma_bar_equal_rates_is_zero(model1, P1):
    assert sigma_bar(model1, P1, 0.95, 0.95, 3) == 0.0


def test_sigma_bar_rejects_inverted(model1, P1):
    with pytest.raises(TriggerError):
        sigma_bar(model1, P1, 0.99, 0.95, 2)


@pytest.mark.parametrize("alpha,beta", [(0.5, 0.9), (0.952, 0.99), (0.1, 0.2)])
def test_sigma_bar_identity_P_single_step(model1, alpha, beta):
    val = sigma_bar(model1, np.eye(3), alpha, beta, 1)
    assert val == pytest.approx(math.sqrt(beta) - math.sqrt(alpha), rel=1e-12)


def test_sigma_bar_example(model1, P1):
    lam = cubic_char_roots(P1)
    lmin, lmax = lam[0], lam[-1]
    nA = power_iteration_norm(model1.A)
    expected = math.inf
    for tau in (1, 2):
        r = 0.952**tau / lmin
        num = -math.sqrt(r) + math.sqrt(r + (0.99**tau - 0.952**tau) / lmax)
        ab = power_iteration_norm(sum(naive_pow(model1.A, j) for j in range(tau - 1))) if tau > 1 else 0.0
        expected = min(expected, num / (1 + nA * ab))
    value = sigma_bar(model1, P1, 0.952, 0.99, 2)
    assert value == pytest.approx(expected, rel=1e-9)
    assert value >= 0.01
    assert value == pytest.approx(0.01080145323, rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(alpha=st.floats(0.05, 0.9), gap=st.floats(0.01, 0.09), M=st.integers(1, 5))
def test_sigma_bar_positive_and_nonincreasing_in_M(model1, P1, alpha, gap, M):
    beta = alpha + gap
    s_M = sigma_bar(model1, P1, alpha, beta, M)
    s_M1 = sigma_bar(model1, P1, alpha, beta, M + 1)
    assert s_M > 0
    assert s_M1 <= s_M


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_predictor_dominates_any_admissible_disturbance(model1, P1, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(3) * rng.uniform(0, 10)
    u = rng.standard_normal(1) * rng.uniform(0, 10)
    d = rng.standard_normal(3)
    d *= 0.01 * rng.uniform(0, 1) / np.linalg.norm(d)
    y = model1.A @ x + model1.B @ u + d
    assert y @ P1 @ y <= predictor(x, u, model1, P1) + 1e-9
