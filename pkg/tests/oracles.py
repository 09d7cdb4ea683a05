"""Independent reference solvers built directly from instance data.

Nothing here goes through windtc's modeling layer: every clearing problem
is assembled as dense arrays and handed to ``scipy.optimize.linprog``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from windtc.grid_data import PowerSystem


@dataclass
class OracleLp:
    cost: float
    wind: float
    x: np.ndarray


def dcopf(system: PowerSystem, t: int, z: dict[str, int], u, *, cost_cap: float | None = None
          ) -> OracleLp | None:
    """Clearing LP of block ``t`` with line statuses ``z`` (missing ids are closed).

    Minimizes cost, or maximizes wind subject to ``cost <= cost_cap``.
    Columns: generator blocks, wind, shedding, angles, flows of closed lines.
    """
    D = system.demand(t)
    k = system.wind_factor(t)
    buses = [b.id for b in system.buses]
    pos = {b: i for i, b in enumerate(buses)}
    closed = [ln for ln in system.lines if z.get(ln.id, 1)]
    gens = [(g.bus, blk) for g in system.generators for blk in g.blocks]
    ng, nw, nb, nf = len(gens), len(system.wind_sites), len(buses), len(closed)
    n = ng + nw + nb + nb + nf
    og, ow, osh, oth, of = 0, ng, ng + nw, ng + nw + nb, ng + nw + 2 * nb

    cost = np.zeros(n)
    bounds = []
    for j, (_, blk) in enumerate(gens):
        cost[og + j] = blk.price
        bounds.append((0, blk.capacity))
    for s in range(nw):
        bounds.append((0, k[s] * float(u[s])))
    for i, b in enumerate(system.buses):
        cost[osh + i] = b.shed_penalty
        bounds.append((0, None))
    for b in system.buses:
        lim = 0.0 if b.is_reference else system.theta_max
        bounds.append((-lim, lim))
    for ln in closed:
        bounds.append((-ln.capacity, ln.capacity))

    A_eq, b_eq = [], []
    for i, b in enumerate(buses):
        row = np.zeros(n)
        for j, (bus, _) in enumerate(gens):
            if bus == b:
                row[og + j] = 1
        for s, site in enumerate(system.wind_sites):
            if site.bus == b:
                row[ow + s] = 1
        row[osh + i] = 1
        for q, ln in enumerate(closed):
            if ln.to_bus == b:
                row[of + q] += 1
            if ln.from_bus == b:
                row[of + q] -= 1
        A_eq.append(row)
        b_eq.append(D[i])
    for q, ln in enumerate(closed):
        row = np.zeros(n)
        row[of + q] = 1
        row[oth + pos[ln.from_bus]] -= ln.susceptance
        row[oth + pos[ln.to_bus]] += ln.susceptance
        A_eq.append(row)
        b_eq.append(0.0)

    if cost_cap is None:
        res = linprog(cost, A_eq=np.array(A_eq), b_eq=b_eq, bounds=bounds, method="highs")
    else:
        wind = np.zeros(n)
        wind[ow:ow + nw] = -1
        res = linprog(wind, A_ub=cost[None, :], b_ub=[cost_cap], A_eq=np.array(A_eq), b_eq=b_eq,
                      bounds=bounds, method="highs")
    if res.status != 0:
        return None
    return OracleLp(float(cost @ res.x), float(res.x[ow:ow + nw].sum()), res.x)


def patterns(system: PowerSystem, cardinality: int | None = None):
    sw = [ln.id for ln in system.switchable_lines]
    for bits in itertools.product((1, 0), repeat=len(sw)):
        if cardinality is not None and len(bits) - sum(bits) > cardinality:
            continue
        yield dict(zip(sw, bits))


def brute_sp1(system: PowerSystem, u, t: int, cardinality: int | None = None) -> float:
    """Minimum clearing cost over every switching pattern."""
    return min(dcopf(system, t, z, u).cost for z in patterns(system, cardinality))


def brute_sp2_wind(system: PowerSystem, u, t: int, phi: float, tol: float = 1e-6,
                   cardinality: int | None = None) -> float:
    """Largest absorbed wind among clearings costing at most ``phi + tol``."""
    best = -math.inf
    for z in patterns(system, cardinality):
        lp = dcopf(system, t, z, u, cost_cap=phi + tol)
        if lp is not None:
            best = max(best, lp.wind)
    return best


def upper_value(system: PowerSystem, u, cardinality: int | None = None) -> float:
    """Optimistic bilevel objective of a single-site build ``u`` (installs when u > 0)."""
    total = 0.0
    for t, blk in enumerate(system.demand_blocks):
        phi = brute_sp1(system, u, t, cardinality)
        total += system.kappa * blk.duration_h * brute_sp2_wind(system, u, t, phi, cardinality=cardinality)
    inv = float(system.annual_invest_cost @ np.asarray(u, dtype=float))
    inv += float(system.annual_fixed_cost @ np.array([1.0 if v > 0 else 0.0 for v in u]))
    return total - inv


def affordable_cap(system: PowerSystem) -> float:
    """Largest capacity of the single wind site the budget can pay for."""
    w = system.wind_sites[0]
    return max(0.0, min(w.cap_max, (system.budget - w.fixed_cost) / w.invest_cost_per_mw))


def grid_search(system: PowerSystem, points: int = 21, cardinality: int | None = None) -> tuple[float, float]:
    """Best ``(objective, u)`` over a uniform grid of single-site capacities (u = 0 included)."""
    top = affordable_cap(system)
    best = (upper_value(system, [0.0], cardinality), 0.0)
    for u in np.linspace(0.0, top, points)[1:]:
        best = max(best, (upper_value(system, [float(u)], cardinality), float(u)))
    return best


def brute_mip(c, A, lo, hi, lb, ub, binaries, maximize=False) -> float | None:
    """Exhaustive binary enumeration with an LP per assignment; None when infeasible."""
    best = None
    for bits in itertools.product((0.0, 1.0), repeat=len(binaries)):
        l2, u2 = lb.copy(), ub.copy()
        for j, v in zip(binaries, bits):
            l2[j] = u2[j] = v
        val = lp_value(c, A, lo, hi, l2, u2, maximize)
        if val is None:
            continue
        if best is None or (val > best if maximize else val < best):
            best = val
    return best


def lp_value(c, A, lo, hi, lb, ub, maximize=False) -> float | None:
    """Optimal value of ``min/max c x  s.t. lo <= A x <= hi, lb <= x <= ub`` via linprog."""
    A = np.asarray(A, dtype=float)
    rows_ub, rhs_ub, rows_eq, rhs_eq = [], [], [], []
    for a, l, h in zip(A, lo, hi):
        if l == h:
            rows_eq.append(a)
            rhs_eq.append(l)
            continue
        if math.isfinite(h):
            rows_ub.append(a)
            rhs_ub.append(h)
        if math.isfinite(l):
            rows_ub.append(-a)
            rhs_ub.append(-l)
    sign = -1.0 if maximize else 1.0
    res = linprog(sign * np.asarray(c, dtype=float),
                  A_ub=np.array(rows_ub) if rows_ub else None, b_ub=rhs_ub or None,
                  A_eq=np.array(rows_eq) if rows_eq else None, b_eq=rhs_eq or None,
                  bounds=[(None if not math.isfinite(a) else a, None if not math.isfinite(b) else b)
                          for a, b in zip(lb, ub)], method="highs")
    if res.status != 0:
        return None
    return sign * float(res.fun)
