"""Dense-tableau two-phase simplex.

:func:`solve_lp` minimizes ``c @ x`` subject to ``G @ x >= h`` with ``x``
free. Synthesis LPs have few variables and many rows, so the solver works
on the dual ``max h @ y  s.t.  G.T @ y = c, y >= 0`` whose tableau has only
``len(x)`` rows, and recovers ``x`` from the optimal dual basis by
complementary slackness.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class LPStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass
class LPResult:
    status: LPStatus
    x: np.ndarray | None = None
    objective: float | None = None
    iterations: int = 0
    max_violation: float | None = None

    def to_json(self) -> dict:
        return {"status": self.status.value, "objective": self.objective,
                "iterations": self.iterations, "max_violation": self.max_violation}


@dataclass
class StandardFormResult:
    status: LPStatus
    y: np.ndarray | None
    basis: list[int]
    objective: float | None
    iterations: int


REINVERT_EVERY = 100
PIVOT_TOL = 1e-9
PRIMAL_TOL = 1e-9


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    col_vals = T[:, col].copy()
    col_vals[row] = 0.0
    T -= np.outer(col_vals, T[row])


def _run(T: np.ndarray, basis: list[int], allowed: np.ndarray, tol: float,
         max_iter: int, reinvert=None) -> tuple[LPStatus, int]:
    """Primal simplex on tableau ``T`` (last row: reduced costs, last column:
    right-hand side). Dantzig pricing, switching to Bland's rule after a run
    of degenerate pivots. ``reinvert(T, basis)`` rebuilds the tableau from
    the original data every ``REINVERT_EVERY`` pivots to stop rounding drift."""
    m = T.shape[0] - 1
    it = 0
    stall = 0
    bland = False
    last_obj = T[-1, -1]
    while it < max_iter:
        costs = np.where(allowed, T[-1, :-1], 0.0)
        if bland:
            cand = np.flatnonzero(costs < -tol)
            if cand.size == 0:
                return LPStatus.OPTIMAL, it
            col = int(cand[0])
        else:
            col = int(np.argmin(costs))
            if costs[col] >= -tol:
                return LPStatus.OPTIMAL, it
        colv = T[:m, col]
        pos = colv > PIVOT_TOL
        if not pos.any():
            return LPStatus.UNBOUNDED, it
        # Harris ratio test: among rows whose ratio is within a small primal
        # tolerance of the minimum, pivot on the largest entry
        rhs = np.maximum(T[:m, -1], 0.0)
        ratios = np.full(m, np.inf)
        ratios[pos] = rhs[pos] / colv[pos]
        relaxed = np.full(m, np.inf)
        relaxed[pos] = (rhs[pos] + PRIMAL_TOL) / colv[pos]
        ties = np.flatnonzero(ratios <= relaxed.min())
        if bland:
            row = int(min(ties, key=lambda r: basis[r]))
        else:
            row = int(ties[np.argmax(colv[ties])])
        _pivot(T, row, col)
        basis[row] = col
        it += 1
        if reinvert is not None and it % REINVERT_EVERY == 0:
            reinvert(T, basis)
        obj = T[-1, -1]
        if abs(obj - last_obj) <= tol * max(1.0, abs(obj)):
            stall += 1
            if stall > 50:
                bland = True
        else:
            stall = 0
            bland = False
        last_obj = obj
    return LPStatus.ITERATION_LIMIT, it


def simplex_standard(A: np.ndarray, b: np.ndarray, d: np.ndarray, tol: float = 1e-9,
                     max_iter: int | None = None) -> StandardFormResult:
    """Two-phase simplex for ``min d @ y  s.t.  A @ y = b, y >= 0``."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    d = np.array(d, dtype=float)
    m, n = A.shape
    if max_iter is None:
        max_iter = 50 * (m + n) + 1000
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    # phase 1: artificials n..n+m-1
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    allowed = np.ones(n + m, dtype=bool)
    status, it1 = _run(T, basis, allowed, tol, max_iter)
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if status is LPStatus.ITERATION_LIMIT:
        return StandardFormResult(status, None, basis, None, it1)
    if -T[-1, -1] > 1e-7 * scale:
        return StandardFormResult(LPStatus.INFEASIBLE, None, basis, None, it1)

    # drive zero-level artificials out of the basis where possible
    keep_rows = []
    for r in range(m):
        if basis[r] >= n:
            row = T[r, :n]
            cand = np.flatnonzero(np.abs(row) > 1e-9)
            if cand.size:
                col = int(cand[np.argmax(np.abs(row[cand]))])
                _pivot(T, r, col)
                basis[r] = col
                keep_rows.append(r)
            # else: redundant row, dropped below
        else:
            keep_rows.append(r)
    T = np.vstack([T[keep_rows], T[-1:]])
    basis = [basis[r] for r in keep_rows]

    # phase 2
    T = np.delete(T, np.s_[n:n + m], axis=1)
    T[-1, :] = 0.0
    T[-1, :n] = d
    for r, j in enumerate(basis):
        if d[j] != 0.0:
            T[-1] -= d[j] * T[r]
    A_kept = A[keep_rows]
    b_kept = b[keep_rows]

    def reinvert(T, basis):
        B = A_kept[:, basis]
        try:
            T[:-1, :-1] = np.linalg.solve(B, A_kept)
            T[:-1, -1] = np.linalg.solve(B, b_kept)
        except np.linalg.LinAlgError:
            return
        T[-1, :-1] = d - d[basis] @ T[:-1, :-1]
        T[-1, -1] = -d[basis] @ T[:-1, -1]

    allowed = np.ones(n, dtype=bool)
    status, it2 = _run(T, basis, allowed, tol, max_iter, reinvert)
    if status is LPStatus.OPTIMAL:
        reinvert(T, basis)
        status, it3 = _run(T, basis, allowed, tol, max_iter, reinvert)
        it2 += it3
    if status is not LPStatus.OPTIMAL:
        return StandardFormResult(status, None, basis, None, it1 + it2)
    y = np.zeros(n)
    for r, j in enumerate(basis):
        y[j] = T[r, -1]
    return StandardFormResult(LPStatus.OPTIMAL, y, basis, float(d @ y), it1 + it2)


def solve_lp(c: np.ndarray, G: np.ndarray, h: np.ndarray, method: str = "simplex",
             tol: float = 1e-9) -> LPResult:
    """Minimize ``c @ x`` subject to ``G @ x >= h`` (``x`` free).

    ``method="highs"`` delegates to SciPy's HiGHS solver instead; it is
    used to cross-check the built-in simplex.
    """
    c = np.asarray(c, dtype=float)
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    if G.ndim != 2 or G.shape[1] != c.size or G.shape[0] != h.size:
        raise ValueError("inconsistent LP dimensions")
    if method == "highs":
        return _solve_highs(c, G, h)
    if method != "simplex":
        raise ValueError(f"unknown LP method {method!r}")
    # row scaling leaves the feasible set unchanged
    norms = np.abs(G).max(axis=1)
    empty = norms == 0
    if np.any(h[empty] > tol):
        return LPResult(LPStatus.INFEASIBLE)
    keep = ~empty
    Gs = G[keep] / norms[keep, None]
    hs = h[keep] / norms[keep]
    dual = simplex_standard(Gs.T, c, -hs, tol=tol)
    if dual.status is LPStatus.INFEASIBLE:
        # dual infeasible: primal unbounded or infeasible
        return LPResult(LPStatus.UNBOUNDED, iterations=dual.iterations)
    if dual.status is LPStatus.UNBOUNDED:
        return LPResult(LPStatus.INFEASIBLE, iterations=dual.iterations)
    if dual.status is not LPStatus.OPTIMAL:
        return LPResult(dual.status, iterations=dual.iterations)
    active = [j for j in dual.basis if j < Gs.shape[0]]
    x, *_ = np.linalg.lstsq(Gs[active], hs[active], rcond=None)
    viol = float(np.max(h - G @ x, initial=0.0))
    return LPResult(LPStatus.OPTIMAL, x, float(c @ x), dual.iterations, viol)


def _solve_highs(c, G, h) -> LPResult:
    from scipy.optimize import linprog
    res = linprog(c, A_ub=-G, b_ub=-h, bounds=[(None, None)] * c.size, method="highs")
    status = {0: LPStatus.OPTIMAL, 1: LPStatus.ITERATION_LIMIT, 2: LPStatus.INFEASIBLE,
              3: LPStatus.UNBOUNDED}.get(res.status, LPStatus.INFEASIBLE)
    if status is not LPStatus.OPTIMAL:
        return LPResult(status, iterations=int(getattr(res, "nit", 0)))
    x = np.asarray(res.x)
    return LPResult(status, x, float(c @ x), int(res.nit), float(np.max(h - G @ x, initial=0.0)))
