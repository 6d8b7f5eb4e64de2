"""Small dense linear-algebra helpers used throughout the package.

Matrices are plain ``numpy.ndarray`` objects. Everything here is meant for
the small state dimensions of the control problems (n <= 10 or so).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SYMMETRY_TOL = 1e-10
STABILITY_MARGIN = 1e-12


class LinalgError(ValueError):
    pass


class NotSchurStableError(LinalgError):
    pass


@dataclass(frozen=True)
class SymEigExtremes:
    lambda_min: float
    lambda_max: float


def as_matrix(A, name: str = "matrix") -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2:
        raise LinalgError(f"{name} must be two-dimensional, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise LinalgError(f"{name} has non-finite entries")
    return A


def _require_square(A: np.ndarray, name: str = "matrix") -> None:
    if A.shape[0] != A.shape[1]:
        raise LinalgError(f"{name} must be square, got shape {A.shape}")


def mat_pow(A, tau: int) -> np.ndarray:
    """Return ``A**tau`` by repeated squaring; ``A**0`` is the identity."""
    A = as_matrix(A)
    _require_square(A)
    if tau < 0:
        raise LinalgError("tau must be nonnegative")
    result = np.eye(A.shape[0])
    base = A.copy()
    k = int(tau)
    while k:
        if k & 1:
            result = result @ base
        k >>= 1
        if k:
            base = base @ base
    return result


def jacobi_eigenvalues(S, tol: float = 1e-15, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations (ascending)."""
    S = np.array(as_matrix(S), dtype=float)
    _require_square(S)
    n = S.shape[0]
    if n == 1:
        return S[0].copy()
    scale = np.max(np.abs(S))
    if scale == 0.0:
        return np.zeros(n)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(S, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = S[p, q]
                if apq == 0.0:
                    continue
                theta = (S[q, q] - S[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # rotate rows/cols p and q
                Sp = S[p, :].copy()
                Sq = S[q, :].copy()
                S[p, :] = c * Sp - s * Sq
                S[q, :] = s * Sp + c * Sq
                Sp = S[:, p].copy()
                Sq = S[:, q].copy()
                S[:, p] = c * Sp - s * Sq
                S[:, q] = s * Sp + c * Sq
                S[p, q] = S[q, p] = 0.0
    return np.sort(np.diag(S))


def sym_eig_extremes(P) -> SymEigExtremes:
    P = as_matrix(P, "P")
    _require_square(P, "P")
    asym = np.max(np.abs(P - P.T)) if P.size else 0.0
    if asym > SYMMETRY_TOL * max(1.0, np.max(np.abs(P))):
        raise LinalgError(f"matrix is not symmetric (max asymmetry {asym:.3g})")
    eig = jacobi_eigenvalues(0.5 * (P + P.T))
    return SymEigExtremes(float(eig[0]), float(eig[-1]))


def spectral_norm(A) -> float:
    """Induced 2-norm, i.e. the largest singular value."""
    A = as_matrix(A)
    if A.size == 0:
        return 0.0
    lam = jacobi_eigenvalues(A.T @ A)[-1]
    return float(np.sqrt(max(lam, 0.0)))


def spectral_radius(A) -> float:
    A = as_matrix(A)
    _require_square(A)
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def is_schur_stable(A) -> bool:
    return spectral_radius(A) < 1.0 - STABILITY_MARGIN


def is_positive_definite(P, tol: float = 0.0) -> bool:
    try:
        return sym_eig_extremes(P).lambda_min > tol
    except LinalgError:
        return False


def solve_discrete_lyapunov(Acl, Q) -> np.ndarray:
    """Solve ``Acl.T @ P @ Acl - P = -Q`` for symmetric P.

    Uses the Kronecker (vectorized) form of the equation, which is an exact
    direct solve for the small dimensions we care about.
    """
    Acl = as_matrix(Acl, "Acl")
    Q = as_matrix(Q, "Q")
    _require_square(Acl, "Acl")
    n = Acl.shape[0]
    if Q.shape != (n, n):
        raise LinalgError(f"Q must be {n}x{n}, got {Q.shape}")
    if not is_schur_stable(Acl):
        raise NotSchurStableError(
            f"closed-loop matrix is not Schur stable (spectral radius {spectral_radius(Acl):.6g})"
        )
    if not is_positive_definite(Q):
        raise LinalgError("Q must be symmetric positive definite")
    lhs = np.eye(n * n) - np.kron(Acl.T, Acl.T)
    P = np.linalg.solve(lhs, Q.reshape(-1)).reshape(n, n)
    return 0.5 * (P + P.T)


def lyapunov_residual(Acl, P, Q) -> float:
    return spectral_norm(Acl.T @ P @ Acl - P + Q)


def quad(x: np.ndarray, P: np.ndarray) -> float:
    return float(x @ P @ x)
