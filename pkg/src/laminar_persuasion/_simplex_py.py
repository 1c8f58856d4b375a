"""Pure NumPy tableau kernels; fallback for the compiled ``_simplex_core``.

Tableau layout: rows ``0..m-1`` are constraints, row ``m`` holds reduced
costs of a minimization, the last column is the right-hand side and
``T[m, -1]`` is minus the current objective.  ``basis[i]`` is the column
basic in row ``i``.  Status codes: 0 optimal, 1 unbounded (primal) or
infeasible (dual), 2 iteration limit.

Ratio tests use Harris' two passes: the step bound is relaxed by the
tolerance, then the largest pivot within the bound is taken.  After 50
consecutive degenerate pivots the kernels switch to Bland's rule with the
textbook ratio test until progress resumes.  Dual simplex absorbs a
negative right-hand side smaller than ``PIVOT_TOL`` when its row offers no
pivot, rather than declaring infeasibility over round-off.
"""

from __future__ import annotations

import numpy as np

PIVOT_TOL = 1e-9
BLAND_AFTER = 50


def pivot(T: np.ndarray, r: int, j: int) -> None:
    prow = T[r] / T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, prow)
    T[r] = prow
    T[:, j] = 0.0
    T[r, j] = 1.0


def primal(T: np.ndarray, basis: np.ndarray, n_enter: int, tol: float, max_iter: int) -> tuple[int, int]:
    m = T.shape[0] - 1
    stall = 0
    for it in range(max_iter):
        d = T[m, :n_enter]
        bland = stall > BLAND_AFTER
        if bland:
            cand = np.flatnonzero(d < -tol)
            if cand.size == 0:
                return 0, it
            j = int(cand[0])
        else:
            j = int(np.argmin(d))
            if d[j] >= -tol:
                return 0, it
        col = T[:m, j]
        rows = np.flatnonzero(col > PIVOT_TOL)
        if rows.size == 0:
            return 1, it
        a = col[rows]
        rhs = np.maximum(T[rows, -1], 0.0)
        if bland:
            ratios = rhs / a
            rmin = ratios.min()
            ties = rows[ratios <= rmin + 1e-12 * (1.0 + rmin)]
            r = int(ties[np.argmin(basis[ties])])
        else:
            bound = ((rhs + tol) / a).min()
            ok = rhs / a <= bound
            r = int(rows[ok][np.argmax(a[ok])])
            rmin = T[r, -1] / T[r, j] if T[r, -1] > 0 else 0.0
        stall = stall + 1 if rmin * (-d[j]) <= tol * tol else 0
        pivot(T, r, j)
        basis[r] = j
    return 2, max_iter


def dual(T: np.ndarray, basis: np.ndarray, n_enter: int, tol: float, max_iter: int) -> tuple[int, int]:
    m = T.shape[0] - 1
    stall = 0
    for it in range(max_iter):
        rhs = T[:m, -1]
        bland = stall > BLAND_AFTER
        if bland:
            cand = np.flatnonzero(rhs < -tol)
            if cand.size == 0:
                return 0, it
            r = int(cand[np.argmin(basis[cand])])
        else:
            r = int(np.argmin(rhs))
            if rhs[r] >= -tol:
                return 0, it
        row = T[r, :n_enter]
        cols = np.flatnonzero(row < -PIVOT_TOL)
        if cols.size == 0:
            if T[r, -1] > -PIVOT_TOL:
                # round-off sized shortfall with no usable pivot: absorb it
                T[r, -1] = 0.0
                continue
            return 1, it
        a = -row[cols]
        dj = np.maximum(T[m, cols], 0.0)
        if bland:
            ratios = dj / a
            rmin = ratios.min()
            j = int(cols[ratios <= rmin + 1e-12 * (1.0 + rmin)][0])
        else:
            bound = ((dj + PIVOT_TOL) / a).min()
            ok = dj / a <= bound
            j = int(cols[ok][np.argmax(a[ok])])
            rmin = max(T[m, j], 0.0) / -T[r, j]
        stall = stall + 1 if rmin <= tol else 0
        pivot(T, r, j)
        basis[r] = j
    return 2, max_iter
