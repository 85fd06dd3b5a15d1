"""Dense two-phase revised simplex for small standard-form LPs.

Solves::

    minimize    c @ x
    subject to  A @ x == b,  x >= 0

with ``A`` of shape (m, N).  The fitting problems here have very few rows
(the number of polynomial coefficients plus one) and many columns, so the
basis matrix is kept dense and re-inverted every iteration; pricing is a
single matrix-vector product over all columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverFailure

TOL = 1e-9


@dataclass
class LPResult:
    x: np.ndarray
    objective: float
    duals: np.ndarray  # y with B^T y = c_B, i.e. the simplex multipliers
    basis: np.ndarray
    iterations: int
    removed_rows: np.ndarray  # rows dropped as linearly dependent


def _iterate(c, A, b, basis, tol, max_iter):
    """Phase-2 style iterations from a feasible basis.  Returns (basis, x_B, y, iters)."""
    m = A.shape[0]
    degenerate_run = 0
    bland = False
    for it in range(max_iter):
        try:
            Binv = np.linalg.inv(A[:, basis])
        except np.linalg.LinAlgError as exc:
            raise SolverFailure("singular basis") from exc
        x_B = Binv @ b
        y = c[basis] @ Binv
        d = c - y @ A
        d[basis] = 0.0
        if bland:
            cand = np.flatnonzero(d < -tol)
            if cand.size == 0:
                return basis, x_B, y, it
            j = int(cand[0])
        else:
            j = int(np.argmin(d))
            if d[j] >= -tol:
                return basis, x_B, y, it
        w = Binv @ A[:, j]
        pos = w > tol
        if not pos.any():
            raise SolverFailure("LP is unbounded")
        ratios = np.full(m, np.inf)
        ratios[pos] = np.maximum(x_B[pos], 0.0) / w[pos]
        theta = ratios.min()
        ties = np.flatnonzero(ratios <= theta + tol * max(1.0, abs(theta)))
        if bland:
            r = int(ties[np.argmin(basis[ties])])
        else:
            r = int(ties[np.argmax(w[ties])])
        if theta <= tol:
            degenerate_run += 1
            if degenerate_run > 2 * m + 10:
                bland = True
        else:
            degenerate_run = 0
        basis = basis.copy()
        basis[r] = j
    raise SolverFailure(f"simplex did not converge in {max_iter} iterations")


def solve_standard_form(
    c: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    basis: np.ndarray | None = None,
    tol: float = TOL,
    max_iter: int | None = None,
) -> LPResult:
    """Minimise ``c @ x`` subject to ``A @ x == b``, ``x >= 0``.

    If ``basis`` (m column indices forming a primal feasible basis) is
    supplied, phase 1 is skipped.  Otherwise artificial variables are added
    and driven out first.

    Raises
    ------
    SolverFailure
        Infeasible or unbounded problem, singular basis, or iteration cap hit.
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if max_iter is None:
        max_iter = 50 * (m + n) + 1000
    removed = np.zeros(0, dtype=int)
    neg = np.zeros(m, dtype=bool)

    if basis is None:
        neg = b < 0
        A = A.copy()
        b = b.copy()
        A[neg] *= -1.0
        b[neg] *= -1.0
        A1 = np.hstack([A, np.eye(m)])
        c1 = np.concatenate([np.zeros(n), np.ones(m)])
        basis1 = np.arange(n, n + m)
        basis1, x_B, _, it1 = _iterate(c1, A1, b, basis1, tol, max_iter)
        scale = max(1.0, float(np.abs(b).max(initial=0.0)))
        if float(x_B[basis1 >= n].sum()) > 1e3 * tol * scale:
            raise SolverFailure("LP is infeasible")
        # drive remaining (zero-level) artificials out of the basis
        keep = np.ones(m, dtype=bool)  # constraint rows
        stay = np.ones(m, dtype=bool)  # basis positions
        basis1 = basis1.copy()
        for r in range(m):
            if basis1[r] < n:
                continue
            Binv_row = np.linalg.solve(A1[:, basis1].T, np.eye(m)[r])
            row = Binv_row @ A
            row[basis1[basis1 < n]] = 0.0
            cand = np.flatnonzero(np.abs(row) > 1e3 * tol)
            if cand.size:
                basis1[r] = int(cand[np.argmax(np.abs(row[cand]))])
            else:
                # the artificial's own row is a combination of the others
                keep[basis1[r] - n] = False
                stay[r] = False
        if not keep.all():
            removed = np.flatnonzero(~keep)
            A = A[keep]
            b = b[keep]
            m = A.shape[0]
        basis = basis1[stay]
    else:
        basis = np.asarray(basis, dtype=int).copy()
        it1 = 0
        if basis.shape != (m,):
            raise ValueError("basis must hold one column index per row")

    basis, x_B, y, it2 = _iterate(c, A, b, basis, tol, max_iter)
    x = np.zeros(n)
    x[basis] = x_B
    if removed.size:
        full_y = np.zeros(m + removed.size)
        full_y[np.setdiff1d(np.arange(m + removed.size), removed)] = y
        y = full_y
    y = np.where(neg, -y, y)
    return LPResult(
        x=x,
        objective=float(c @ x),
        duals=y,
        basis=basis,
        iterations=it1 + it2,
        removed_rows=removed,
    )
