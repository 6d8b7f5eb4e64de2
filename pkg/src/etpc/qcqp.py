"""Log-barrier interior-point solver for the convex event QCQP.

The problem is ``min a'Q0 a + 2 q0'a + c0`` subject to
``a'Qc a + 2 qc'a + cc <= 0`` with every ``Q`` PSD.  A strictly feasible
starting point is always available to the caller (the certificate point
``C x_k``), so there is no phase-1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .horizon import QcqpProblem, constraint_values, eval_cost

log = logging.getLogger(__name__)

MU_START = 1.0
MU_END = 1e-9
MU_FACTOR = 10.0
NEWTON_TOL = 1e-10
MAX_NEWTON = 200
RIDGE = 1e-12
STRICT_TOL = 1e-12
FEAS_TOL = 1e-9
KKT_TOL = 1e-7

OPTIMAL = "optimal"
FALLBACK = "feasible-fallback"
INFEASIBLE_INPUT = "infeasible-input"


@dataclass(frozen=True)
class SolveReport:
    a_star: np.ndarray
    objective: float
    iterations: int
    max_constraint_violation: float
    status: str
    multipliers: np.ndarray
    kkt_residual: float = 0.0


class _Scaled:
    """The problem in normalized form.

    Variables are Jacobi-scaled (b = a / s with s = diag(Q0)**-1/2), the
    objective is divided by J(a0) and each constraint by |H_tau(a0)|, so the
    fixed barrier schedule gives a duality gap relative to the problem's own
    magnitude.
    """

    def __init__(self, problem: QcqpProblem, a0):
        d = problem.dim
        diag = np.diag(problem.Q0).copy()
        pos = diag > 0
        s = np.ones(d)
        s[pos] = 1.0 / np.sqrt(diag[pos])
        self.s = s
        ss = np.outer(s, s)
        J0 = abs(eval_cost(problem, a0))
        self.js = J0 if J0 > 0 else 1.0
        self.Q0 = problem.Q0 * ss / self.js
        self.q0 = problem.q0 * s / self.js
        self.c0 = problem.c0 / self.js
        h0 = constraint_values(problem, a0) if problem.M else np.zeros(0)
        self.hs = np.where(np.abs(h0) > 0, np.abs(h0), 1.0)
        self.Qc = [Q * ss / w for (Q, _, _), w in zip(problem.constraints, self.hs)]
        self.qc = [q * s / w for (_, q, _), w in zip(problem.constraints, self.hs)]
        self.cc = [c / w for (_, _, c), w in zip(problem.constraints, self.hs)]

    def cost(self, b):
        return float(b @ self.Q0 @ b + 2.0 * self.q0 @ b + self.c0)

    def cons(self, b):
        return np.array([b @ Q @ b + 2.0 * q @ b + c for Q, q, c in zip(self.Qc, self.qc, self.cc)])


def _barrier_value(sp: _Scaled, b, t):
    h = sp.cons(b)
    if np.any(h >= 0.0):
        return np.inf
    return t * sp.cost(b) - float(np.sum(np.log(-h)))


def _barrier_change(sp: _Scaled, b, step, s, t, h, gJ):
    """f(b + s*step) - f(b) without forming f itself.

    Differencing two barrier values loses everything below eps*t*J, which at
    t = 1e9 is far larger than the Newton tolerance.
    """
    dJ = s * (gJ @ step) + s * s * (step @ sp.Q0 @ step)
    total = t * dJ
    for Q, q, hv in zip(sp.Qc, sp.qc, h):
        dh = 2.0 * s * (step @ (Q @ b + q)) + s * s * (step @ Q @ step)
        r = dh / hv  # new h = hv * (1 + r), must stay negative
        if r <= -1.0:
            return np.inf
        total -= np.log1p(r)
    return total


def _centering(sp: _Scaled, b, t, tol, max_iter):
    """Damped Newton on t*J(b) - sum log(-H(b)); returns (b, iterations)."""
    d = b.size
    eye = np.eye(d)
    it = 0
    for it in range(1, max_iter + 1):
        h = sp.cons(b)
        gJ = 2.0 * (sp.Q0 @ b + sp.q0)
        grad = t * gJ
        hess = 2.0 * t * sp.Q0
        for Q, q, hv in zip(sp.Qc, sp.qc, h):
            gh = 2.0 * (Q @ b + q)
            grad = grad + gh / (-hv)
            hess = hess + 2.0 * Q / (-hv) + np.outer(gh, gh) / (hv * hv)
        hess = hess + RIDGE * (1.0 + np.max(np.abs(np.diag(hess)))) * eye
        try:
            step = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(hess, grad, rcond=None)[0]
        dec2 = float(-grad @ step)
        if not dec2 > 0.0 or dec2 / 2.0 <= tol:
            return b, it
        s = 1.0
        for _ in range(60):
            if _barrier_change(sp, b, step, s, t, h, gJ) <= -0.25 * s * dec2:
                break
            s *= 0.5
        else:
            return b, it
        b = b + s * step
    return b, it


def kkt_residual(problem: QcqpProblem, a, multipliers) -> float:
    """Stationarity norm plus complementary-slackness magnitude."""
    lam = np.asarray(multipliers, dtype=float)
    if lam.shape != (problem.M,):
        raise ValueError(f"expected {problem.M} multipliers, got {lam.shape}")
    if np.any(lam < 0):
        raise ValueError("multipliers must be nonnegative")
    a = np.asarray(a, dtype=float)
    g = 2.0 * (problem.Q0 @ a + problem.q0)
    for li, (Q, q, _) in zip(lam, problem.constraints):
        g = g + li * 2.0 * (Q @ a + q)
    h = constraint_values(problem, a) if problem.M else np.zeros(0)
    return float(np.linalg.norm(g) + np.sum(np.abs(lam * h)))


def _scaled_kkt(sp: _Scaled, b, lam) -> float:
    g = 2.0 * (sp.Q0 @ b + sp.q0)
    for li, Q, q in zip(lam, sp.Qc, sp.qc):
        g = g + li * 2.0 * (Q @ b + q)
    h = sp.cons(b)
    return float(np.linalg.norm(g) + np.sum(np.abs(lam * h)))


def _is_homogeneous(problem: QcqpProblem) -> bool:
    if np.any(problem.q0) or problem.c0 != 0.0:
        return False
    return all(not np.any(q) and c == 0.0 for _, q, c in problem.constraints)


def _active_set_polish(problem: QcqpProblem, sp: _Scaled, a, lam, active, a0, max_iter: int = 20):
    """Newton on the KKT equations with the barrier's active set held fixed.

    The barrier leaves a duality gap of order mu; a few Newton steps on
    stationarity plus ``H_i = 0`` (i active) remove it.  The result is kept
    only if it is feasible, no worse than ``a0`` and has a smaller residual.
    """
    idx = np.nonzero(active)[0]
    if idx.size == 0:
        return a, lam
    best_a, best_lam = a, lam
    best_res = kkt_residual(problem, a, lam)
    J0 = eval_cost(problem, a0)
    b = a / sp.s
    # scaled multipliers of the active constraints
    la = lam[idx] * sp.hs[idx] / sp.js
    d, k = b.size, idx.size
    for _ in range(max_iter):
        g = 2.0 * (sp.Q0 @ b + sp.q0)
        Hs = 2.0 * sp.Q0
        Jc = np.empty((k, d))
        hv = np.empty(k)
        for j, i in enumerate(idx):
            gi = 2.0 * (sp.Qc[i] @ b + sp.qc[i])
            g = g + la[j] * gi
            Hs = Hs + 2.0 * la[j] * sp.Qc[i]
            Jc[j] = gi
            hv[j] = b @ sp.Qc[i] @ b + 2.0 * sp.qc[i] @ b + sp.cc[i]
        kkt = np.block([[Hs, Jc.T], [Jc, np.zeros((k, k))]])
        try:
            step = np.linalg.solve(kkt, -np.concatenate([g, hv]))
        except np.linalg.LinAlgError:
            break
        b = b + step[:d]
        la = la + step[d:]
        if not np.all(np.isfinite(b)) or np.any(la < 0):
            break
        a_new = b * sp.s
        lam_new = np.zeros_like(lam)
        lam_new[idx] = la * sp.js / sp.hs[idx]
        h = constraint_values(problem, a_new)
        if np.max(h) > FEAS_TOL or eval_cost(problem, a_new) > J0:
            continue
        r = kkt_residual(problem, a_new, lam_new)
        if r < best_res:
            best_a, best_lam, best_res = a_new, lam_new, r
        if np.linalg.norm(step) <= 1e-15 * max(1.0, np.linalg.norm(b)):
            break
    return best_a, best_lam


def _free_minimizer(problem: QcqpProblem):
    """Unconstrained minimizer when Q0 is positive definite, else None."""
    try:
        L = np.linalg.cholesky(problem.Q0)
    except np.linalg.LinAlgError:
        return None
    return -np.linalg.solve(L.T, np.linalg.solve(L, problem.q0))


def solve(problem: QcqpProblem, a0) -> SolveReport:
    a0 = np.asarray(a0, dtype=float)
    M = problem.M
    if _is_homogeneous(problem):
        # x_k = 0: a = 0 is feasible and optimal
        z = np.zeros(problem.dim)
        return SolveReport(z, 0.0, 0, 0.0, OPTIMAL, np.zeros(M))

    h0 = constraint_values(problem, a0) if M else np.zeros(0)
    if M and np.max(h0) >= -STRICT_TOL:
        return SolveReport(
            a0, eval_cost(problem, a0), 0, max(0.0, float(np.max(h0))), INFEASIBLE_INPUT, np.zeros(M)
        )

    sp = _Scaled(problem, a0)
    b = a0 / sp.s
    iters = 0
    if M == 0:
        b, iters = _centering(sp, b, 1.0, NEWTON_TOL, MAX_NEWTON)
        lam = np.zeros(0)
    else:
        mu = MU_START
        while True:
            b, k = _centering(sp, b, 1.0 / mu, NEWTON_TOL, MAX_NEWTON)
            iters += k
            if mu <= MU_END * (1 + 1e-12):
                break
            mu /= MU_FACTOR
        # polish: Newton converges quadratically near the central point
        b, k = _centering(sp, b, 1.0 / mu, 1e-30, 10)
        iters += k
        lam = mu / -sp.cons(b)

    a = b * sp.s
    lam = lam * sp.js / sp.hs
    a_free = _free_minimizer(problem)
    if a_free is not None and M and np.max(constraint_values(problem, a_free)) <= 0.0:
        # the constraints do not bind; the barrier only approaches this point at rate sqrt(mu)
        a, lam = a_free, np.zeros(M)
    elif M:
        active = -sp.cons(b) < np.sqrt(mu)
        a, lam = _active_set_polish(problem, sp, a, lam, active, a0)
    J = eval_cost(problem, a)
    J0 = eval_cost(problem, a0)
    h = constraint_values(problem, a) if M else np.zeros(0)
    viol = max(0.0, float(np.max(h))) if M else 0.0
    if not np.all(np.isfinite(a)) or viol > FEAS_TOL or J > J0:
        log.debug("barrier result rejected (J=%g, J0=%g, viol=%g)", J, J0, viol)
        return SolveReport(a0, J0, iters, max(0.0, float(np.max(h0))) if M else 0.0, FALLBACK, np.zeros(M))
    # judged in the normalized coordinates: raw monomial coefficients can
    # differ by many orders of magnitude, so an absolute raw residual is
    # dominated by rounding
    res = _scaled_kkt(sp, a / sp.s, lam * sp.hs / sp.js)
    status = OPTIMAL if res <= KKT_TOL else FALLBACK
    if status != OPTIMAL:
        log.debug("KKT residual %g above tolerance", res)
    return SolveReport(a, J, iters, viol, status, lam, res)
