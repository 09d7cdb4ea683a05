"""Bounded-variable revised simplex.

Works on ``row_lo <= A x <= row_hi``, ``lb <= x <= ub`` by appending one
slack per row (``A x - s = 0`` with ``s`` carrying the row bounds), so
every column has simple bounds and the right-hand side is zero.  Phase 1
minimizes the sum of artificials placed on rows the starting point
violates.  Pricing is Dantzig's rule, switching permanently to Bland's
rule once the objective stalls for ``2*(rows+cols)`` iterations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

PIVOT_TOL = 1e-9
OPT_TOL = 1e-9
FEAS_TOL = 1e-7


@dataclass
class LpResult:
    status: str  # optimal | infeasible | unbounded | numerical
    x: np.ndarray | None = None
    objective: float | None = None
    row_duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    iterations: int = 0


class _Tableau:
    """Mutable state of one simplex run."""

    def __init__(self, A, cost, lo, hi, x, basis):
        self.A = A
        self.cost = cost
        self.lo = lo
        self.hi = hi
        self.x = x
        self.basis = basis
        self.is_basic = np.zeros(A.shape[1], dtype=bool)
        self.is_basic[basis] = True
        self.iterations = 0
        self.bland = False

    def factor(self):
        return la.lu_factor(self.A[:, self.basis], check_finite=False)

    def refresh_basic(self, lu):
        nb = ~self.is_basic
        rhs = -self.A[:, nb] @ self.x[nb]
        self.x[self.basis] = la.lu_solve(lu, rhs, check_finite=False)

    def run(self, max_iter: int) -> str:
        m, N = self.A.shape
        stall_limit = 2 * (m + N)
        stall = 0
        last_obj = math.inf
        lo, hi = self.lo, self.hi
        free = ~np.isfinite(lo) & ~np.isfinite(hi)
        fixed = hi - lo <= PIVOT_TOL
        while True:
            if self.iterations >= max_iter:
                return "numerical"
            lu = self.factor()
            self.refresh_basic(lu)
            y = la.lu_solve(lu, self.cost[self.basis], trans=1, check_finite=False)
            d = self.cost - self.A.T @ y
            d[self.is_basic] = 0.0

            at_lo = np.isfinite(lo) & (self.x <= lo + FEAS_TOL)
            at_hi = np.isfinite(hi) & (self.x >= hi - FEAS_TOL)
            up_ok = (d < -OPT_TOL) & (at_lo | free) & ~at_hi
            down_ok = (d > OPT_TOL) & (at_hi | free) & ~at_lo
            cand = (up_ok | down_ok) & ~self.is_basic & ~fixed
            if not cand.any():
                return "optimal"
            idx = np.flatnonzero(cand)
            j = int(idx[0]) if self.bland else int(idx[np.argmax(np.abs(d[idx]))])
            direction = 1.0 if up_ok[j] else -1.0

            alpha = la.lu_solve(lu, self.A[:, j], check_finite=False)
            delta = -direction * alpha  # change of basic values per unit step
            xb = self.x[self.basis]
            lob = lo[self.basis]
            hib = hi[self.basis]
            ratios = np.full(m, math.inf)
            dec = (delta < -PIVOT_TOL) & np.isfinite(lob)
            inc = (delta > PIVOT_TOL) & np.isfinite(hib)
            ratios[dec] = (xb[dec] - lob[dec]) / -delta[dec]
            ratios[inc] = (hib[inc] - xb[inc]) / delta[inc]
            np.maximum(ratios, 0.0, out=ratios)

            t_flip = hi[j] - lo[j]
            t_min = ratios.min() if m else math.inf
            if not math.isfinite(t_min) and not math.isfinite(t_flip):
                return "unbounded"

            self.iterations += 1
            if t_flip <= t_min:
                self.x[j] = hi[j] if direction > 0 else lo[j]
                self.x[self.basis] = xb + delta * t_flip
                step_obj = abs(d[j]) * t_flip
            else:
                ties = np.flatnonzero(ratios <= t_min + 1e-12)
                if self.bland:
                    r = int(ties[np.argmin(np.asarray(self.basis)[ties])])
                else:
                    r = int(ties[np.argmax(np.abs(delta[ties]))])
                leaving = self.basis[r]
                self.x[self.basis] = xb + delta * t_min
                self.x[j] += direction * t_min
                self.x[leaving] = lo[leaving] if delta[r] < 0 else hi[leaving]
                self.basis[r] = j
                self.is_basic[leaving] = False
                self.is_basic[j] = True
                step_obj = abs(d[j]) * t_min

            obj = float(self.cost @ self.x)
            if step_obj <= 1e-12 or obj >= last_obj - 1e-12:
                stall += 1
                if stall > stall_limit:
                    self.bland = True
            else:
                stall = 0
            last_obj = min(last_obj, obj)


def solve(c, A, row_lo, row_hi, lb, ub, max_iter: int | None = None) -> LpResult:
    """Minimize ``c @ x`` subject to row and column bounds.

    ``A`` may be dense or scipy-sparse.  Returns primal values, row duals
    (d objective / d row bound of the active side) and reduced costs.
    """
    A = A.toarray() if hasattr(A, "toarray") else np.asarray(A, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    row_lo = np.asarray(row_lo, dtype=float)
    row_hi = np.asarray(row_hi, dtype=float)
    if np.any(lb > ub + FEAS_TOL) or np.any(row_lo > row_hi + FEAS_TOL):
        return LpResult("infeasible")
    if np.any(lb == math.inf) or np.any(ub == -math.inf) or np.any(row_lo == math.inf) \
            or np.any(row_hi == -math.inf):
        return LpResult("infeasible")

    if m == 0:
        x = np.where(c > 0, lb, np.where(c < 0, ub, np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))))
        if not np.all(np.isfinite(x)):
            return LpResult("unbounded")
        return LpResult("optimal", x, float(c @ x), np.zeros(0), c.copy(), 0)

    lo = np.concatenate([lb, row_lo])
    hi = np.concatenate([ub, row_hi])
    x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
    act = A @ x[:n]
    x[n:] = act

    basis = []
    art_rows, art_sign = [], []
    for i in range(m):
        if row_lo[i] - FEAS_TOL <= act[i] <= row_hi[i] + FEAS_TOL:
            basis.append(n + i)
        else:
            v = row_lo[i] if act[i] < row_lo[i] else row_hi[i]
            x[n + i] = v
            r = v - act[i]
            art_rows.append(i)
            art_sign.append(1.0 if r > 0 else -1.0)
    k = len(art_rows)
    Afull = np.zeros((m, n + m + k))
    Afull[:, :n] = A
    Afull[:, n:n + m] = -np.eye(m)
    for a, (i, s) in enumerate(zip(art_rows, art_sign)):
        Afull[i, n + m + a] = s
        basis.append(n + m + a)
    # keep basis ordered by row so artificial a sits on row art_rows[a]
    row_of = {n + i: i for i in range(m)}
    row_of.update({n + m + a: i for a, i in enumerate(art_rows)})
    basis = sorted(basis, key=lambda col: row_of[col])

    lo_full = np.concatenate([lo, np.zeros(k)])
    hi_full = np.concatenate([hi, np.full(k, math.inf)])
    x_full = np.concatenate([x, np.zeros(k)])
    N = n + m + k
    if max_iter is None:
        max_iter = 50 * (m + N) + 1000

    total_iter = 0
    if k:
        cost1 = np.zeros(N)
        cost1[n + m:] = 1.0
        tab = _Tableau(Afull, cost1, lo_full, hi_full, x_full, basis)
        status = tab.run(max_iter)
        total_iter += tab.iterations
        if status != "optimal":
            return LpResult("numerical", iterations=total_iter)
        infeas = float(tab.x[n + m:].sum())
        scale = max(1.0, float(np.abs(row_lo[np.isfinite(row_lo)]).max(initial=0.0)),
                    float(np.abs(row_hi[np.isfinite(row_hi)]).max(initial=0.0)))
        if infeas > FEAS_TOL * scale:
            return LpResult("infeasible", iterations=total_iter)
        hi_full[n + m:] = 0.0
        x_full = tab.x
        x_full[n + m:] = np.clip(x_full[n + m:], 0.0, 0.0)
        basis = tab.basis

    cost2 = np.zeros(N)
    cost2[:n] = c
    tab = _Tableau(Afull, cost2, lo_full, hi_full, x_full, list(basis))
    status = tab.run(max_iter)
    total_iter += tab.iterations
    if status != "optimal":
        return LpResult(status, iterations=total_iter)

    lu = tab.factor()
    tab.refresh_basic(lu)
    y = la.lu_solve(lu, tab.cost[tab.basis], trans=1, check_finite=False)
    d = cost2 - Afull.T @ y
    xs = tab.x[:n].copy()
    resid = A @ xs
    viol = max(float(np.max(row_lo - resid, initial=0.0)), float(np.max(resid - row_hi, initial=0.0)),
               float(np.max(lb - xs, initial=0.0)), float(np.max(xs - ub, initial=0.0)))
    if viol > 1e-6 * max(1.0, float(np.abs(xs).max(initial=0.0))):
        return LpResult("numerical", iterations=total_iter)
    return LpResult("optimal", xs, float(c @ xs), y.copy(), d[:n].copy(), total_iter)
