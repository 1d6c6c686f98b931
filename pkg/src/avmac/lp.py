"""Dense two-phase simplex with Bland's anti-cycling rule.

Solves ``min c @ x`` subject to ``A_ub @ x <= b_ub``, ``A_eq @ x == b_eq``,
``x >= 0``. Meant for the small feasibility programs of the symmetrizability
checks (tens of variables, a few hundred rows), where a dense tableau is fine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverFailure

PIVOT_TOL = 1e-10
# a ray whose reduced cost is only this negative is round-off, not unboundedness
RAY_TOL = 1e-7


@dataclass
class LPResult:
    x: np.ndarray
    fun: float
    iterations: int


def _pivot(T, row, col):
    T[row] /= T[row, col]
    piv = T[row]
    colvals = T[:, col].copy()
    colvals[row] = 0.0
    T -= np.outer(colvals, piv)


def _run(T, basis, allowed, max_iter, it0):
    """Minimize the objective in the last row of T over columns in ``allowed``."""
    m = T.shape[0] - 1
    it = it0
    allowed = allowed.copy()
    while True:
        cost = T[-1, :-1]
        # Bland: lowest-index improving column
        cand = np.flatnonzero((cost < -PIVOT_TOL) & allowed)
        if cand.size == 0:
            return it
        col = cand[0]
        colv = T[:m, col]
        pos = colv > PIVOT_TOL
        if not np.any(pos):
            if cost[col] > -RAY_TOL:
                allowed[col] = False
                continue
            raise SolverFailure("linear program is unbounded")
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / colv[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))
        row = ties[np.argmin(basis[ties])]
        _pivot(T, row, col)
        basis[row] = col
        it += 1
        if it >= max_iter:
            raise SolverFailure(f"simplex exceeded {max_iter} iterations")


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, max_iter=50_000) -> LPResult:
    c = np.asarray(c, dtype=np.float64)
    nvar = c.size
    A_ub = np.zeros((0, nvar)) if A_ub is None else np.asarray(A_ub, dtype=np.float64)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=np.float64)
    A_eq = np.zeros((0, nvar)) if A_eq is None else np.asarray(A_eq, dtype=np.float64)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=np.float64)
    mu, me = A_ub.shape[0], A_eq.shape[0]
    m = mu + me

    A = np.zeros((m, nvar + mu))
    A[:mu, :nvar] = A_ub
    A[:mu, nvar:] = np.eye(mu)
    A[mu:, :nvar] = A_eq
    b = np.concatenate([b_ub, b_eq])
    neg = b < 0
    A[neg] *= -1
    b = np.where(neg, -b, b)

    # rows whose slack can start in the basis need no artificial variable
    slack_ok = np.zeros(m, dtype=bool)
    slack_ok[:mu] = ~neg[:mu]
    art_rows = np.flatnonzero(~slack_ok)
    na = art_rows.size
    ncol = nvar + mu + na

    T = np.zeros((m + 1, ncol + 1))
    T[:m, :nvar + mu] = A
    T[:m, -1] = b
    basis = np.empty(m, dtype=np.int64)
    basis[slack_ok] = nvar + np.flatnonzero(slack_ok)
    for k, r in enumerate(art_rows):
        T[r, nvar + mu + k] = 1.0
        basis[r] = nvar + mu + k

    it = 0
    allowed = np.ones(ncol, dtype=bool)
    if na:
        T[-1, :] = 0.0
        T[-1, nvar + mu:ncol] = 1.0
        for r in art_rows:
            T[-1] -= T[r]
        it = _run(T, basis, allowed, max_iter, it)
        if -T[-1, -1] > 1e-8 * max(1.0, np.abs(b).max(initial=0.0)):
            raise SolverFailure(f"linear program is infeasible (phase-1 residual {-T[-1, -1]:.3e})")
        # drive remaining artificials out of the basis
        for r in range(m):
            if basis[r] >= nvar + mu:
                row = T[r, :nvar + mu]
                nz = np.flatnonzero(np.abs(row) > PIVOT_TOL)
                if nz.size:
                    _pivot(T, r, nz[0])
                    basis[r] = nz[0]
        allowed[nvar + mu:] = False

    T[-1, :] = 0.0
    T[-1, :nvar] = c
    for r in range(m):
        if basis[r] < ncol and T[-1, basis[r]] != 0.0:
            T[-1] -= T[-1, basis[r]] * T[r]
    it = _run(T, basis, allowed, max_iter, it)

    x = np.zeros(ncol)
    x[basis] = T[:m, -1]
    sol = x[:nvar]
    return LPResult(sol, float(c @ sol), it)
