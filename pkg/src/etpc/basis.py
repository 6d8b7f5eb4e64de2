"""Scalar basis functions for the parameterized control input.

A control input over an inter-event interval is ``u(t_k + tau) = P(tau) a``
where ``P(tau)`` is block diagonal with ``m`` copies of the row vector
``phi(tau) = [phi_0(tau), ..., phi_p(tau)]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RANK_TOL = 1e-10


class BasisError(ValueError):
    pass


@dataclass(frozen=True)
class BasisSet:
    """Basis family ``{phi_0, ..., phi_p}``.

    ``kind`` is ``"monomial"`` (``phi_j(tau) = tau**j``) or ``"table"``, in
    which case ``table[tau, j]`` holds ``phi_j(tau)`` for ``tau`` in
    ``[0, N_max]``.
    """

    p: int
    kind: str = "monomial"
    table: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.p < 0:
            raise BasisError("basis degree p must be >= 0")
        if self.kind == "monomial":
            return
        if self.kind != "table":
            raise BasisError(f"unknown basis kind {self.kind!r}")
        if self.table is None:
            raise BasisError("tabulated basis requires a table")
        tab = np.atleast_2d(np.asarray(self.table, dtype=float))
        if tab.shape[1] != self.p + 1:
            raise BasisError(f"table must have p+1={self.p + 1} columns, got {tab.shape[1]}")
        object.__setattr__(self, "table", tab)

    @property
    def size(self) -> int:
        return self.p + 1

    def phi(self, tau: int) -> np.ndarray:
        return eval_phi(self, tau)


def monomial_basis(p: int) -> BasisSet:
    return BasisSet(p=p)


def tabulated_basis(table) -> BasisSet:
    tab = np.atleast_2d(np.asarray(table, dtype=float))
    return BasisSet(p=tab.shape[1] - 1, kind="table", table=tab)


def eval_phi(basis: BasisSet, tau: int) -> np.ndarray:
    if tau < 0:
        raise BasisError("tau must be nonnegative")
    if basis.kind == "monomial":
        out = np.empty(basis.p + 1)
        v = 1.0
        for j in range(basis.p + 1):
            out[j] = v
            v *= tau
        return out
    if tau >= basis.table.shape[0]:
        raise BasisError(f"tabulated basis only defined up to tau={basis.table.shape[0] - 1}")
    return basis.table[tau].copy()


def block_P(basis: BasisSet, tau: int, m: int) -> np.ndarray:
    """The ``m x m(p+1)`` block-diagonal matrix mapping coefficients to inputs."""
    if m < 1:
        raise BasisError("input dimension m must be >= 1")
    return np.kron(np.eye(m), eval_phi(basis, tau)[None, :])


def evaluation_matrix(basis: BasisSet, N: int) -> np.ndarray:
    return np.array([eval_phi(basis, t) for t in range(N + 1)])


def numerical_rank(V: np.ndarray, rtol: float = RANK_TOL) -> int:
    """Rank by Gaussian elimination with complete pivoting."""
    V = np.array(V, dtype=float)
    rows, cols = V.shape
    if V.size == 0:
        return 0
    scale = np.max(np.abs(V))
    if scale == 0.0:
        return 0
    rank = 0
    for k in range(min(rows, cols)):
        sub = np.abs(V[k:, k:])
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        if sub[i, j] <= rtol * scale:
            break
        i += k
        j += k
        V[[k, i], :] = V[[i, k], :]
        V[:, [k, j]] = V[:, [j, k]]
        V[k + 1:, k:] -= np.outer(V[k + 1:, k] / V[k, k], V[k, k:])
        rank += 1
    return rank


def check_independence(basis: BasisSet, N: int) -> bool:
    """True iff phi_0..phi_p are linearly independent on the integers [0, N]."""
    if N < 0:
        raise BasisError("N must be nonnegative")
    if basis.p + 1 > N + 1:
        return False
    if basis.kind == "table" and N >= basis.table.shape[0]:
        return False
    V = evaluation_matrix(basis, N)
    # column scaling keeps monomials of very different magnitude comparable
    norms = np.linalg.norm(V, axis=0)
    if np.any(norms == 0.0):
        return False
    return numerical_rank(V / norms) == basis.p + 1
