"""Feasibility certificate for the event QCQP.

If a matrix C makes ``(F(tau) + G(tau) C)' P (F(tau) + G(tau) C) - alpha**tau P``
negative definite for every tau in 1..M, then ``a = C x_k`` strictly
satisfies every constraint of the QCQP for any state ``x_k != 0``.  With a
stabilizing gain K and P from the closed-loop Lyapunov equation, the choice
``P(0) C = K`` is such a certificate for at least M = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisSet, eval_phi
from .horizon import HorizonData
from .linalg_core import (
    as_matrix,
    is_schur_stable,
    solve_discrete_lyapunov,
    sym_eig_extremes,
)
from .plant import SystemModel

LMI_MARGIN = 1e-12


class FeasibilityError(ValueError):
    pass


@dataclass(frozen=True)
class Certificate:
    C: np.ndarray
    K: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    alpha: float
    M_max: int


def construct_C(K, basis: BasisSet) -> np.ndarray:
    """C with ``P(0) C = K``: K / phi_0(0) on the constant-coefficient rows."""
    K = as_matrix(K, "K")
    m, n = K.shape
    phi0 = eval_phi(basis, 0)
    if phi0[0] == 0.0 or np.any(phi0[1:] != 0.0):
        raise FeasibilityError("basis must have phi_0(0) != 0 and phi_j(0) = 0 for j >= 1")
    if basis.kind == "table":
        col = basis.table[:, 0]
        if np.any(col != col[0]):
            raise FeasibilityError("phi_0 must be a constant function")
    size = basis.size
    C = np.zeros((m * size, n))
    C[::size, :] = K / phi0[0]
    return C


def lmi_margin(C, h: HorizonData, P, alpha: float, tau: int) -> float:
    """Largest eigenvalue of the closed-loop decrease matrix at step tau."""
    if tau < 1:
        raise FeasibilityError("tau must be >= 1")
    Fc = h.F[tau] + h.G[tau] @ C
    S = Fc.T @ P @ Fc - alpha**tau * P
    return sym_eig_extremes(0.5 * (S + S.T)).lambda_max


def lmi_holds(C, h: HorizonData, P, alpha: float, tau: int) -> bool:
    return lmi_margin(C, h, P, alpha, tau) < -LMI_MARGIN


def max_feasible_M(C, h: HorizonData, P, alpha: float, N: int | None = None) -> int:
    N = h.N if N is None else N
    if N < 1:
        raise FeasibilityError("N must be >= 1")
    M = 0
    for tau in range(1, min(N, h.N) + 1):
        if not lmi_holds(C, h, P, alpha, tau):
            break
        M = tau
    return M


def alpha_floor(P, Q) -> float:
    return 1.0 - sym_eig_extremes(Q).lambda_min / sym_eig_extremes(P).lambda_max


def lyapunov_matrix(model: SystemModel, K, Q) -> np.ndarray:
    Acl = model.A + model.B @ as_matrix(K, "K")
    if not is_schur_stable(Acl):
        raise FeasibilityError("A + BK is not Schur stable")
    return solve_discrete_lyapunov(Acl, Q)


def build_certificate(model: SystemModel, basis: BasisSet, h: HorizonData, K, Q, alpha: float) -> Certificate:
    K = as_matrix(K, "K")
    Q = as_matrix(Q, "Q")
    if K.shape != (model.m, model.n):
        raise FeasibilityError(f"K must be {model.m}x{model.n}, got {K.shape}")
    P = lyapunov_matrix(model, K, Q)
    C = construct_C(K, basis)
    return Certificate(C, K, P, Q, float(alpha), max_feasible_M(C, h, P, alpha))
