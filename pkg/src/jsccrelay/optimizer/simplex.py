"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Solves ``min c @ x`` subject to ``A_ub @ x <= b_ub``, ``A_eq @ x == b_eq`` and
``x >= 0``.  Meant for the tiny master problems of generalized programming
(a handful of rows, at most a few hundred columns), where a deterministic,
dependency-free solver matters more than speed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LpResult", "linprog"]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LpResult:
    status: str
    x: np.ndarray | None
    fun: float
    basis: tuple[int, ...] = ()
    # standard-form data, kept so callers can recover duals from the basis
    A: np.ndarray | None = None
    c: np.ndarray | None = None
    row_sign: np.ndarray | None = None
    rows: tuple[int, ...] = ()

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]


def _run(T, basis, ncols, tol, max_iter) -> str:
    """Iterate on tableau ``T`` whose last row holds reduced costs."""
    m = T.shape[0] - 1
    for _ in range(max_iter):
        reduced = T[-1, :ncols]
        entering = next((j for j in range(ncols) if reduced[j] < -tol), None)
        if entering is None:
            return OPTIMAL
        col = T[:m, entering]
        best = None
        for r in range(m):
            if col[r] > tol:
                ratio = T[r, -1] / col[r]
                key = (ratio, basis[r])
                if best is None or key[0] < best[0] - tol or (
                    abs(key[0] - best[0]) <= tol and key[1] < best[1]
                ):
                    best = (ratio, basis[r], r)
        if best is None:
            return UNBOUNDED
        leave = best[2]
        _pivot(T, leave, entering)
        basis[leave] = entering
    raise RuntimeError("simplex iteration limit reached")


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, tol=1e-11, max_iter=5000) -> LpResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # standard form: [x | slacks] with one slack per inequality row
    A = np.zeros((m, n + m_ub))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b = b * sign
    c_std = np.concatenate([c, np.zeros(m_ub)])
    nstd = n + m_ub

    # a slack with a +1 coefficient can start in the basis; others need artificials
    basis = [-1] * m
    for r in range(m_ub):
        if sign[r] > 0:
            basis[r] = n + r
    keep = list(range(m))
    art_rows = [r for r in range(m) if basis[r] < 0]
    na = len(art_rows)
    T = np.zeros((m + 1, nstd + na + 1))
    T[:m, :nstd] = A
    T[:m, -1] = b
    for k, r in enumerate(art_rows):
        T[r, nstd + k] = 1.0
        basis[r] = nstd + k

    if na:
        # phase 1: minimize the sum of artificials
        T[-1, nstd:nstd + na] = 1.0
        for r in art_rows:
            T[-1] -= T[r]
        _run(T, basis, nstd + na, tol, max_iter)
        if -T[-1, -1] > 1e-9 * max(1.0, np.abs(b).max(initial=0.0)):
            return LpResult(INFEASIBLE, None, np.inf)
        # drive zero-level artificials out of the basis where possible
        for r in range(m):
            if basis[r] >= nstd:
                j = next((j for j in range(nstd) if abs(T[r, j]) > tol), None)
                if j is not None:
                    _pivot(T, r, j)
                    basis[r] = j
        keep = [r for r in range(m) if basis[r] < nstd]
        T = np.vstack([T[keep][:, list(range(nstd)) + [T.shape[1] - 1]], np.zeros((1, nstd + 1))])
        basis = [basis[r] for r in keep]
        m = len(keep)
    else:
        T = np.delete(T, np.s_[nstd:nstd + na], axis=1)

    # phase 2 reduced costs
    T[-1, :] = 0.0
    T[-1, :nstd] = c_std
    for r in range(m):
        if T[-1, basis[r]] != 0.0:
            T[-1] -= T[-1, basis[r]] * T[r]
    status = _run(T, basis, nstd, tol, max_iter)
    if status == UNBOUNDED:
        return LpResult(UNBOUNDED, None, -np.inf)
    x = np.zeros(nstd)
    for r in range(m):
        x[basis[r]] = T[r, -1]
    x = np.maximum(x, 0.0)
    return LpResult(OPTIMAL, x[:n], float(c @ x[:n]), tuple(basis), A, c_std, sign, tuple(keep))
