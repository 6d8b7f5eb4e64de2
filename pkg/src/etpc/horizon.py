"""Prediction matrices over the horizon and assembly of the per-event QCQP.

Over an inter-event interval the nominal state is
``xhat(t_k + tau) = F(tau) x_k + G(tau) a`` with ``F(tau) = A**tau`` and
``G(tau) = sum_{j<tau} A**(tau-1-j) B P(j)``.  The finite-horizon problem

    min_a  J(a)  s.t.  H_tau(a) <= 0,  tau = 1..M

uses ``J(a) = a'Q0 a + 2 q0'a + c0`` and
``H_tau(a) = a'Qc a + 2 qc'a + cc`` (all quadratic forms PSD).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisSet, block_P, check_independence
from .plant import SystemModel


class HorizonError(ValueError):
    pass


@dataclass(frozen=True)
class HorizonData:
    F: tuple
    G: tuple
    Pblocks: tuple

    @property
    def N(self) -> int:
        return len(self.F) - 1

    @property
    def n(self) -> int:
        return self.F[0].shape[0]

    @property
    def dim(self) -> int:
        return self.G[0].shape[1]


def compute_horizon(model: SystemModel, basis: BasisSet, N: int) -> HorizonData:
    if N < 1:
        raise HorizonError("horizon N must be >= 1")
    if not check_independence(basis, N):
        raise HorizonError("basis not independent on horizon")
    A, B = model.A, model.B
    n, m = model.n, model.m
    Pb = [block_P(basis, tau, m) for tau in range(N + 1)]
    F = [np.eye(n)]
    G = [np.zeros((n, m * basis.size))]
    for tau in range(N):
        F.append(A @ F[-1])
        G.append(A @ G[-1] + B @ Pb[tau])
    return HorizonData(tuple(F), tuple(G), tuple(Pb))


@dataclass(frozen=True)
class QcqpProblem:
    Q0: np.ndarray
    q0: np.ndarray
    c0: float
    constraints: tuple  # (Qc, qc, cc) for tau = 1..M

    @property
    def dim(self) -> int:
        return self.Q0.shape[0]

    @property
    def M(self) -> int:
        return len(self.constraints)


@dataclass(frozen=True)
class QcqpTemplate:
    """State-independent parts of the QCQP for fixed (P, R, alpha, M, N).

    ``instantiate(x_k)`` only needs matrix-vector products, so one template
    is shared across every event of a run.
    """

    Q0: np.ndarray
    L0: np.ndarray  # sum F'PG, so q0 = L0' x_k
    C0: np.ndarray  # sum F'PF
    Qc: tuple
    Lc: tuple  # F(tau)'P G(tau)
    Cc: tuple  # F(tau)'P F(tau) - alpha**tau P

    def instantiate(self, x_k) -> QcqpProblem:
        x = np.asarray(x_k, dtype=float)
        cons = tuple(
            (Q, L.T @ x, float(x @ C @ x)) for Q, L, C in zip(self.Qc, self.Lc, self.Cc)
        )
        return QcqpProblem(self.Q0, self.L0.T @ x, float(x @ self.C0 @ x), cons)


def _sym(S: np.ndarray) -> np.ndarray:
    return 0.5 * (S + S.T)


def qcqp_template(h: HorizonData, P, R, alpha: float, M: int, N: int | None = None) -> QcqpTemplate:
    N = h.N if N is None else N
    if N > h.N or N < 0:
        raise HorizonError(f"N={N} outside precomputed horizon [0, {h.N}]")
    if M > N:
        raise HorizonError(f"M={M} must not exceed N={N}")
    if M < 0:
        raise HorizonError("M must be >= 0")
    if not 0.0 < alpha < 1.0:
        raise HorizonError("alpha must lie in (0, 1)")
    P = np.asarray(P, dtype=float)
    R = np.atleast_2d(np.asarray(R, dtype=float))
    d = h.dim
    Q0 = np.zeros((d, d))
    L0 = np.zeros((h.n, d))
    C0 = np.zeros((h.n, h.n))
    for tau in range(N + 1):
        F, G, Pb = h.F[tau], h.G[tau], h.Pblocks[tau]
        PG = P @ G
        Q0 += G.T @ PG + Pb.T @ R @ Pb
        L0 += F.T @ PG
        C0 += F.T @ P @ F
    Qc, Lc, Cc = [], [], []
    for tau in range(1, M + 1):
        F, G = h.F[tau], h.G[tau]
        Qc.append(_sym(G.T @ P @ G))
        Lc.append(F.T @ P @ G)
        Cc.append(_sym(F.T @ P @ F - alpha**tau * P))
    return QcqpTemplate(_sym(Q0), L0, _sym(C0), tuple(Qc), tuple(Lc), tuple(Cc))


def assemble_qcqp(h: HorizonData, x_k, P, R, alpha: float, M: int, N: int | None = None) -> QcqpProblem:
    return qcqp_template(h, P, R, alpha, M, N).instantiate(x_k)


def eval_cost(problem: QcqpProblem, a) -> float:
    a = np.asarray(a, dtype=float)
    return float(a @ problem.Q0 @ a + 2.0 * problem.q0 @ a + problem.c0)


def eval_constraint(problem: QcqpProblem, tau: int, a) -> float:
    """H_tau(a) for tau in 1..M."""
    if not 1 <= tau <= problem.M:
        raise HorizonError(f"constraint index tau={tau} outside [1, {problem.M}]")
    Q, q, c = problem.constraints[tau - 1]
    a = np.asarray(a, dtype=float)
    return float(a @ Q @ a + 2.0 * q @ a + c)


def cost_gradient(problem: QcqpProblem, a) -> np.ndarray:
    return 2.0 * (problem.Q0 @ a + problem.q0)


def constraint_values(problem: QcqpProblem, a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return np.array([a @ Q @ a + 2.0 * q @ a + c for Q, q, c in problem.constraints])


def rollout(model: SystemModel, h: HorizonData, x_k, a, steps: int | None = None) -> np.ndarray:
    """Nominal (disturbance-free) states xhat(t_k + tau), tau = 0..steps."""
    steps = h.N if steps is None else steps
    x = np.asarray(x_k, dtype=float)
    out = [x]
    for tau in range(steps):
        x = model.A @ x + model.B @ (h.Pblocks[tau] @ a)
        out.append(x)
    return np.array(out)
