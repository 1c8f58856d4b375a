"""Dense two-phase tableau simplex with warm-started row addition.

Solves ``max c @ x`` subject to ``A_ub @ x <= b_ub``, ``A_eq @ x == b_eq`` and
``x >= 0``.  Rows appended after an optimal solve are absorbed by dual
simplex pivots from the previous basis, which is what makes outer
approximation by cutting planes cheap.

The pivoting kernels come from the compiled ``_simplex_core`` extension when
it is importable and from :mod:`._simplex_py` otherwise.  Setting the
environment variable ``LAMINAR_PERSUASION_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from types import ModuleType

import numpy as np

from . import _simplex_py


def _load_backend() -> ModuleType:
    if os.environ.get("LAMINAR_PERSUASION_PURE_PYTHON", "") not in ("", "0"):
        return _simplex_py
    try:
        from . import _simplex_core
    except ImportError:
        return _simplex_py
    return _simplex_core


_backend = _load_backend()
BACKEND = "compiled" if _backend is not _simplex_py else "python"

OPTIMAL, UNBOUNDED, INFEASIBLE, ITERATION_LIMIT = "optimal", "unbounded", "infeasible", "iteration_limit"


def available_backends() -> dict[str, ModuleType]:
    out = {"python": _simplex_py}
    try:
        from . import _simplex_core
        out["compiled"] = _simplex_core
    except ImportError:
        pass
    return out


class LPError(RuntimeError):
    def __init__(self, status: str, message: str = ""):
        super().__init__(message or status)
        self.status = status


@dataclass
class LPResult:
    x: np.ndarray
    objective: float
    status: str
    pivots: int
    max_violation: float


class LinearProgram:
    """Maximize ``c @ x`` over a polyhedron in the nonnegative orthant.

    Parameters
    ----------
    tol : float
        Reduced-cost tolerance of the pivoting rules.
    feas_tol : float, optional
        Primal feasibility tolerance of dual simplex after :meth:`add_rows`;
        defaults to ``tol * 1e-3`` so that cutting-plane loops can drive
        residuals below ``tol``.
    backend : module, optional
        Kernel module exposing ``pivot``, ``primal`` and ``dual``; defaults to
        the one selected at import.
    """

    def __init__(self, c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, *, tol: float = 1e-9,
                 feas_tol: float | None = None, max_iter: int = 200_000, backend: ModuleType | None = None):
        self.c = np.asarray(c, dtype=float)
        n = self.c.size
        self.n = n
        self.A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, n)
        self.b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
        self.A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
        self.b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
        self.tol = tol
        self.feas_tol = tol * 1e-3 if feas_tol is None else feas_tol
        self.max_iter = max_iter
        self.kernels = backend or _backend
        self.pivots = 0
        self._T: np.ndarray | None = None
        self._basis: np.ndarray | None = None
        self.result: LPResult | None = None

    # public API ---------------------------------------------------------

    def solve(self) -> LPResult:
        """Cold solve from an all-slack basis."""
        self._phase_one()
        self._phase_two()
        return self._finish()

    def add_rows(self, A, b) -> LPResult:
        """Append ``A @ x <= b`` and re-optimize from the current basis."""
        A = np.asarray(A, dtype=float).reshape(-1, self.n)
        b = np.asarray(b, dtype=float).ravel()
        self.A_ub = np.vstack([self.A_ub, A])
        self.b_ub = np.concatenate([self.b_ub, b])
        if self._T is None:
            return self.solve()
        T, basis = self._T, self._basis
        m, ncol = T.shape[0] - 1, T.shape[1] - 1
        k = A.shape[0]
        # new slack columns go just before the right-hand side
        T2 = np.zeros((m + k + 1, ncol + k + 1))
        T2[:m, :ncol] = T[:m, :ncol]
        T2[:m, -1] = T[:m, -1]
        T2[-1, :ncol] = T[m, :ncol]
        T2[-1, -1] = T[m, -1]
        raw = np.zeros((k, ncol + k + 1))
        raw[:, : self.n] = A
        raw[np.arange(k), ncol + np.arange(k)] = 1.0
        raw[:, -1] = b
        coef = raw[:, basis]
        raw -= coef @ T2[:m]
        T2[m : m + k] = raw
        self._T = np.ascontiguousarray(T2)
        self._basis = np.concatenate([basis, ncol + np.arange(k)]).astype(np.intp)
        status, it = self.kernels.dual(self._T, self._basis, self._T.shape[1] - 1, self.feas_tol, self.max_iter)
        self.pivots += it
        if status == 1:
            raise LPError(INFEASIBLE, "added rows make the program infeasible")
        if status == 2:
            raise LPError(ITERATION_LIMIT, "dual simplex iteration limit")
        self._primal_cleanup()
        return self._finish()

    # internals ------------------------------------------------------------

    def _phase_one(self) -> None:
        n = self.n
        A_ub, b_ub, A_eq, b_eq = self.A_ub, self.b_ub, self.A_eq, self.b_eq
        m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
        m = m_ub + m_eq
        neg = b_ub < 0
        n_art = int(neg.sum()) + m_eq
        ncol = n + m_ub + n_art
        T = np.zeros((m + 1, ncol + 1))
        basis = np.empty(m, dtype=np.intp)
        T[:m_ub, :n] = A_ub
        T[np.arange(m_ub), n + np.arange(m_ub)] = 1.0
        T[:m_ub, -1] = b_ub
        T[m_ub:m, :n] = A_eq
        T[m_ub:m, -1] = b_eq
        art = n + m_ub
        art_rows = []
        for i in range(m):
            needs = neg[i] if i < m_ub else True
            if needs:
                if T[i, -1] < 0:
                    T[i, :] *= -1.0
                T[i, art] = 1.0
                basis[i] = art
                art_rows.append(i)
                art += 1
            else:
                basis[i] = n + i
        self._n_art_start = n + m_ub
        if art_rows:
            T[m, : n + m_ub] = -T[art_rows, : n + m_ub].sum(axis=0)
            T[m, -1] = -T[art_rows, -1].sum()
            T = np.ascontiguousarray(T)
            status, it = self.kernels.primal(T, basis, ncol, self.tol, self.max_iter)
            self.pivots += it
            if status == 2:
                raise LPError(ITERATION_LIMIT, "phase one iteration limit")
            scale = 1.0 + np.abs(T[:m, -1]).max(initial=0.0)
            if -T[m, -1] > 1e-7 * scale:
                raise LPError(INFEASIBLE, f"phase one residual {-T[m, -1]:.3e}")
            self._drop_artificials(T, basis)
        else:
            self._T, self._basis = np.ascontiguousarray(T[:, list(range(ncol)) + [ncol]]), basis

    def _drop_artificials(self, T: np.ndarray, basis: np.ndarray) -> None:
        m = T.shape[0] - 1
        start = self._n_art_start
        keep_rows = []
        for i in range(m):
            if basis[i] >= start:
                row = np.abs(T[i, :start])
                j = int(np.argmax(row)) if start else -1
                if j >= 0 and row[j] > 1e-7:
                    self.kernels.pivot(T, i, j)
                    basis[i] = j
                    keep_rows.append(i)
                # otherwise the row is redundant and goes away
            else:
                keep_rows.append(i)
        cols = list(range(start)) + [T.shape[1] - 1]
        rows = keep_rows + [m]
        self._T = np.ascontiguousarray(T[np.ix_(rows, cols)])
        self._basis = basis[keep_rows].copy()

    def _phase_two(self) -> None:
        T, basis = self._T, self._basis
        m = T.shape[0] - 1
        ncol = T.shape[1] - 1
        cost = np.zeros(ncol)
        cost[: self.n] = -self.c
        cb = cost[basis]
        T[m, :ncol] = cost - cb @ T[:m, :ncol]
        T[m, -1] = -(cb @ T[:m, -1])
        status, it = self.kernels.primal(T, basis, ncol, self.tol, self.max_iter)
        self.pivots += it
        if status == 1:
            raise LPError(UNBOUNDED, "objective is unbounded")
        if status == 2:
            raise LPError(ITERATION_LIMIT, "phase two iteration limit")

    def _primal_cleanup(self) -> None:
        T = self._T
        status, it = self.kernels.primal(T, self._basis, T.shape[1] - 1, self.tol, self.max_iter)
        self.pivots += it
        if status == 1:
            raise LPError(UNBOUNDED, "objective is unbounded")

    def _extract(self) -> np.ndarray:
        T, basis = self._T, self._basis
        x = np.zeros(self.n)
        mask = basis < self.n
        x[basis[mask]] = np.maximum(T[: T.shape[0] - 1, -1][mask], 0.0)
        return x

    def violation(self, x: np.ndarray) -> float:
        v = 0.0
        if self.A_ub.size:
            v = max(v, float(np.max(self.A_ub @ x - self.b_ub)))
        if self.A_eq.size:
            v = max(v, float(np.max(np.abs(self.A_eq @ x - self.b_eq))))
        return v

    def _finish(self) -> LPResult:
        x = self._extract()
        viol = self.violation(x)
        scale = 1.0 + max(np.abs(self.b_ub).max(initial=0.0), np.abs(self.b_eq).max(initial=0.0))
        if viol > 1e-8 * scale:
            # round-off has crept into the tableau: rebuild from the original rows
            self._phase_one()
            self._phase_two()
            x = self._extract()
            viol = self.violation(x)
        self.result = LPResult(x, float(self.c @ x), OPTIMAL, self.pivots, viol)
        return self.result
