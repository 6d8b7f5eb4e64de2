"""Event-triggered controllers sharing the parameterized control law.

All three controllers recompute a coefficient vector ``a_k`` at an event and
then apply ``u(t) = P(t - t_k) a_k`` until the next event:

* ``ClfController``       - CLF-constrained finite-horizon QCQP
* ``EmulationController`` - least-squares fit of the ideal feedback ``K xhat``
* ``ZohController``       - the QCQP with a constant (p = 0) basis
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisSet, block_P, monomial_basis
from .feasibility import Certificate, build_certificate
from .horizon import HorizonData, compute_horizon, qcqp_template
from .linalg_core import as_matrix, is_schur_stable, mat_pow
from .plant import SystemModel
from .qcqp import SolveReport, solve

CONTROLLER_KINDS = ("clf", "emulation", "zoh")


class ControllerError(ValueError):
    pass


@dataclass(frozen=True)
class ControllerState:
    t_k: int
    a_k: np.ndarray
    V_k: float
    solve_report: SolveReport | None = None


def control_input(state: ControllerState, basis: BasisSet, t: int) -> np.ndarray:
    if t < state.t_k:
        raise ControllerError("t must be >= t_k")
    m = state.a_k.size // basis.size
    return block_P(basis, t - state.t_k, m) @ state.a_k


class _Base:
    kind = ""

    def __init__(self, model: SystemModel, basis: BasisSet, N: int, P):
        self.model = model
        self.basis = basis
        self.N = N
        self.P = np.asarray(P, dtype=float)
        self._blocks = [block_P(basis, tau, model.m) for tau in range(N + 1)]

    def block(self, tau: int) -> np.ndarray:
        while tau >= len(self._blocks):
            self._blocks.append(block_P(self.basis, len(self._blocks), self.model.m))
        return self._blocks[tau]

    def control_input(self, state: ControllerState, t: int) -> np.ndarray:
        return self.block(t - state.t_k) @ state.a_k

    def _state(self, x_k, t_k, a, report=None) -> ControllerState:
        x_k = np.asarray(x_k, dtype=float)
        return ControllerState(int(t_k), a, float(x_k @ self.P @ x_k), report)


class ClfController(_Base):
    kind = "clf"

    def __init__(self, model, basis, N, M, R, alpha, certificate: Certificate,
                 horizon: HorizonData | None = None):
        super().__init__(model, basis, N, certificate.P)
        if M > certificate.M_max:
            raise ControllerError(
                f"certificate only guarantees feasibility up to M={certificate.M_max}, requested M={M}"
            )
        self.M = M
        self.R = np.atleast_2d(np.asarray(R, dtype=float))
        self.alpha = alpha
        self.certificate = certificate
        self.horizon = horizon if horizon is not None else compute_horizon(model, basis, N)
        self.template = qcqp_template(self.horizon, certificate.P, self.R, alpha, M, N)

    def on_event(self, x_k, t_k: int = 0) -> ControllerState:
        x_k = np.asarray(x_k, dtype=float)
        if not np.any(x_k):
            return self._state(x_k, t_k, np.zeros(self.horizon.dim))
        problem = self.template.instantiate(x_k)
        a0 = self.certificate.C @ x_k
        report = solve(problem, a0)
        return self._state(x_k, t_k, report.a_star, report)


class ZohController(ClfController):
    """Constant input between events: the CLF QCQP over a p = 0 basis."""

    kind = "zoh"

    def __init__(self, model, N, M, R, alpha, certificate: Certificate, horizon=None):
        if certificate.C.shape[0] != model.m:
            raise ControllerError("ZOH certificate must be built for the constant basis")
        super().__init__(model, monomial_basis(0), N, M, R, alpha, certificate, horizon)


class EmulationController(_Base):
    """Fit the basis to the ideal feedback trajectory ``K (A+BK)**tau x_k``.

    Equality-constrained least squares, solved once in closed form: the
    optimal coefficients are ``a_k = E x_k`` for a fixed matrix E.
    """

    kind = "emulation"

    def __init__(self, model: SystemModel, basis: BasisSet, N: int, K, P):
        super().__init__(model, basis, N, P)
        K = as_matrix(K, "K")
        Acl = model.A + model.B @ K
        if not is_schur_stable(Acl):
            raise ControllerError("A + BK is not Schur stable")
        self.K = K
        self.E = emulation_gain(model, basis, N, K)

    def on_event(self, x_k, t_k: int = 0) -> ControllerState:
        x_k = np.asarray(x_k, dtype=float)
        return self._state(x_k, t_k, self.E @ x_k)


def emulation_gain(model: SystemModel, basis: BasisSet, N: int, K) -> np.ndarray:
    m, n = model.m, model.n
    d = m * basis.size
    Acl = model.A + model.B @ K
    Phi = np.vstack([block_P(basis, tau, m) for tau in range(N + 1)])
    T = np.vstack([K @ mat_pow(Acl, tau) for tau in range(N + 1)])
    P0 = block_P(basis, 0, m)
    # column scaling keeps the normal equations usable for raw monomials
    s = np.linalg.norm(Phi, axis=0)
    s[s == 0] = 1.0
    Phs = Phi / s
    P0s = P0 / s
    kkt = np.block([[2.0 * Phs.T @ Phs, P0s.T], [P0s, np.zeros((m, m))]])
    rhs = np.vstack([2.0 * Phs.T @ T, K])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError as exc:
        raise ControllerError("singular emulation KKT system") from exc
    return sol[:d] / s[:, None]


def make_controller(kind: str, model: SystemModel, basis: BasisSet, N: int, M: int, R, alpha: float, K, Q,
                    certificate: Certificate | None = None):
    """Build one of the three controllers from shared design parameters."""
    if kind == "clf":
        h = compute_horizon(model, basis, N)
        cert = certificate or build_certificate(model, basis, h, K, Q, alpha)
        return ClfController(model, basis, N, M, R, alpha, cert, h)
    if kind == "zoh":
        b0 = monomial_basis(0)
        h = compute_horizon(model, b0, N)
        cert = build_certificate(model, b0, h, K, Q, alpha)
        return ZohController(model, N, M, R, alpha, cert, h)
    if kind == "emulation":
        h = compute_horizon(model, basis, N)
        cert = certificate or build_certificate(model, basis, h, K, Q, alpha)
        return EmulationController(model, basis, N, K, cert.P)
    raise ControllerError(f"unknown controller kind {kind!r}; expected one of {CONTROLLER_KINDS}")
