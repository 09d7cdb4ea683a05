"""Lower-level market clearing with transmission switching.

One demand block is a DC power flow dispatch in which every switchable
line carries a binary status ``z``.  The bilinear flow definition
``f = S*(theta_o - theta_d)*z`` is linearized with one product gadget per
line end, using the angle limit as the gadget bound.

``solve_sp1`` returns the minimum clearing cost of each block for a given
wind build-out; ``solve_sp2`` picks, among cost-optimal clearings, the
ones that absorb the most wind (the optimistic tie-break) and reports the
switching pattern of every block.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .grid_data import PowerSystem
from .milp import LinExpr, MilpModel, Variable, add_product, lin_sum, solve_lp, solve_mip

SUBPROBLEM_GAP = 1e-9
COST_CAP_REL = 1e-9
COST_CAP_ABS = 1e-6


def cost_cap(phi: float) -> float:
    """Right-hand side used when a block's clearing cost is capped at ``phi``."""
    return phi + COST_CAP_ABS + COST_CAP_REL * abs(phi)


@dataclass
class LowerBlock:
    """Variable and constraint handles of one block's lower-level copy."""

    t: int
    gm: dict[tuple[str, int], Variable]
    gw: list[Variable]
    shed: dict[int, Variable]
    flow: dict[str, Variable]
    theta: dict[int, Variable]
    z: dict[str, Variable]
    aux: dict[str, tuple[Variable, Variable]]
    balance: dict[int, object]
    cost: LinExpr
    wind: LinExpr


@dataclass
class LowerBlockModel:
    """Standalone lower-level MIP of one block plus its handles."""

    t: int
    model: MilpModel
    block: LowerBlock


def _u_value(u) -> float | None:
    if isinstance(u, (int, float, np.floating, np.integer)):
        return float(u)
    return None


def add_lower_level(model: MilpModel, system: PowerSystem, t: int, u: Sequence, *, prefix: str = "",
                    cuts=None, cardinality: int | None = None, fix_closed: bool = False) -> LowerBlock:
    """Append one block's lower-level constraints to ``model``.

    ``u`` holds one entry per wind site: a number (capacity already decided)
    or a model variable/expression.  ``cuts`` is a :class:`~windtc.cuts.CutSet`
    for this block.  ``fix_closed`` keeps every line closed.
    """
    if len(u) != len(system.wind_sites):
        raise ValueError(f"expected {len(system.wind_sites)} wind capacities, got {len(u)}")
    D = system.demand(t)
    k = system.wind_factor(t)
    th = system.theta_max
    pre = f"{prefix}t{t}."
    fixed = set(cuts.fixed) if cuts is not None else set()

    gm = {}
    for g in system.generators:
        for b, blk in enumerate(g.blocks):
            gm[g.id, b] = model.add_var(f"{pre}gm[{g.id},{b}]", 0.0, blk.capacity)
    gw = []
    for s, site in enumerate(system.wind_sites):
        val = _u_value(u[s])
        if val is not None:
            gw.append(model.add_var(f"{pre}gw[{site.bus}]", 0.0, max(0.0, k[s] * val)))
        else:
            v = model.add_var(f"{pre}gw[{site.bus}]", 0.0, k[s] * site.cap_max)
            model.add_constr(v - k[s] * LinExpr.of(u[s]), "<=", 0.0, f"{pre}windcap[{site.bus}]")
            gw.append(v)
    total_demand = float(D.sum())
    shed = {b.id: model.add_var(f"{pre}s[{b.id}]", 0.0, max(total_demand, 0.0)) for b in system.buses}
    theta = {}
    for b in system.buses:
        lim = 0.0 if b.is_reference else th
        theta[b.id] = model.add_var(f"{pre}theta[{b.id}]", -lim, lim)
    flow = {ln.id: model.add_var(f"{pre}f[{ln.id}]", -ln.capacity, ln.capacity) for ln in system.lines}

    z, aux = {}, {}
    for ln in system.lines:
        f = flow[ln.id]
        if not ln.switchable:
            model.add_constr(f - ln.susceptance * (theta[ln.from_bus] - theta[ln.to_bus]), "==", 0.0,
                             f"{pre}flowdef[{ln.id}]")
            continue
        zv = model.add_binary(f"{pre}z[{ln.id}]")
        if fix_closed or ln.id in fixed:
            zv.lb = 1.0
        z[ln.id] = zv
        ao = add_product(model, zv, theta[ln.from_bus], th, f"{pre}vo[{ln.id}]")
        ad = add_product(model, zv, theta[ln.to_bus], th, f"{pre}vd[{ln.id}]")
        aux[ln.id] = (ao, ad)
        model.add_constr(f - ln.susceptance * (ao - ad), "==", 0.0, f"{pre}flowdef[{ln.id}]")

    inj: dict[int, LinExpr] = {b.id: LinExpr() for b in system.buses}
    gen_bus = {g.id: g.bus for g in system.generators}
    for (gid, _), v in gm.items():
        inj[gen_bus[gid]].add_term(v, 1.0)
    for s, site in enumerate(system.wind_sites):
        inj[site.bus].add_term(gw[s], 1.0)
    for ln in system.lines:
        inj[ln.to_bus].add_term(flow[ln.id], 1.0)
        inj[ln.from_bus].add_term(flow[ln.id], -1.0)
    balance = {}
    for i, b in enumerate(system.buses):
        inj[b.id].add_term(shed[b.id], 1.0)
        balance[b.id] = model.add_constr(inj[b.id], "==", float(D[i]), f"{pre}balance[{b.id}]")

    if cardinality is not None and z:
        model.add_constr(lin_sum(z.values()), ">=", len(z) - int(cardinality), f"{pre}cardinality")
    if cuts is not None:
        for q, group in enumerate(cuts.inequalities):
            model.add_constr(lin_sum(z[lid] for lid in group), ">=", 1.0, f"{pre}cut{q}")

    cost = LinExpr()
    for g in system.generators:
        for b, blk in enumerate(g.blocks):
            cost.add_term(gm[g.id, b], blk.price)
    for b in system.buses:
        cost.add_term(shed[b.id], b.shed_penalty)
    return LowerBlock(t, gm, gw, shed, flow, theta, z, aux, balance, cost, lin_sum(gw))


def build_lower_block(system: PowerSystem, u: Sequence[float], t: int, cuts=None,
                      cardinality: int | None = None) -> LowerBlockModel:
    """Standalone clearing-cost minimization for block ``t`` at capacities ``u``."""
    if not 0 <= t < system.num_blocks:
        raise IndexError(f"block {t} out of range")
    model = MilpModel(f"lower-t{t}")
    blk = add_lower_level(model, system, t, list(u), cuts=cuts, cardinality=cardinality)
    model.set_objective(blk.cost, "min")
    return LowerBlockModel(t, model.seal(), blk)


# ---------------------------------------------------------------------------
# results

@dataclass
class ClearingResult:
    t: int
    status: str
    cost: float
    gen: dict[tuple[str, int], float]
    wind: dict[int, float]  # absorbed MW per site bus
    available: dict[int, float]  # k*u per site bus
    shed: dict[int, float]
    flow: dict[str, float]
    theta: dict[int, float]
    closed: dict[str, bool]

    @property
    def wind_total(self) -> float:
        return sum(self.wind.values())

    @property
    def shed_total(self) -> float:
        return sum(self.shed.values())

    @property
    def open_lines(self) -> list[str]:
        return [lid for lid, c in self.closed.items() if not c]

    def switch_vector(self, system: PowerSystem) -> tuple[int, ...]:
        return tuple(int(self.closed[ln.id]) for ln in system.switchable_lines)


def _clean(v: float) -> float:
    v = float(v)
    return 0.0 if abs(v) < 1e-12 else v


def extract_result(system: PowerSystem, blk: LowerBlock, sol, u: Sequence[float]) -> ClearingResult:
    x = sol.x
    k = system.wind_factor(blk.t)
    closed = {ln.id: True for ln in system.lines}
    for lid, zv in blk.z.items():
        closed[lid] = bool(round(x[zv.index]))
    return ClearingResult(
        t=blk.t,
        status=sol.status,
        cost=float(blk.cost.value(x)),
        gen={key: _clean(x[v.index]) for key, v in blk.gm.items()},
        wind={site.bus: _clean(x[blk.gw[s].index]) for s, site in enumerate(system.wind_sites)},
        available={site.bus: float(k[s] * u[s]) for s, site in enumerate(system.wind_sites)},
        shed={b: _clean(x[v.index]) for b, v in blk.shed.items()},
        flow={lid: _clean(x[v.index]) for lid, v in blk.flow.items()},
        theta={b: _clean(x[v.index]) for b, v in blk.theta.items()},
        closed=closed,
    )


class SubproblemError(RuntimeError):
    def __init__(self, what: str, status: str):
        super().__init__(f"{what} ended with status {status}")
        self.status = status


def _check_u(system: PowerSystem, u) -> list[float]:
    u = [float(v) for v in u]
    if len(u) != len(system.wind_sites):
        raise ValueError(f"expected {len(system.wind_sites)} wind capacities, got {len(u)}")
    return u


def solve_sp1(system: PowerSystem, u, t: int, *, cuts=None, cardinality: int | None = None,
              backend=None, time_limit: float | None = None) -> tuple[float, ClearingResult]:
    """Minimum clearing cost of block ``t`` given capacities ``u``."""
    u = _check_u(system, u)
    lb = build_lower_block(system, u, t, cuts=cuts, cardinality=cardinality)
    sol = solve_mip(lb.model, backend, mip_gap=SUBPROBLEM_GAP, time_limit=time_limit)
    if not sol.has_solution:
        raise SubproblemError(f"clearing subproblem for block {t}", sol.status)
    res = extract_result(system, lb.block, sol, u)
    return res.cost, res


@dataclass
class Sp2Result:
    value: float  # optimistic upper-level objective at (u, x)
    wind_term: float
    invest_term: float
    patterns: list[tuple[int, ...]]
    results: list[ClearingResult]
    status: str = "optimal"
    bound: float | None = None


def investment_cost(system: PowerSystem, u, x) -> float:
    return float(system.annual_invest_cost @ np.asarray(u, dtype=float)
                 + system.annual_fixed_cost @ np.asarray(x, dtype=float))


def solve_sp2(system: PowerSystem, u, x, phi: Sequence[float], *, cuts=None,
              cardinality: int | None = None, backend=None, time_limit: float | None = None) -> Sp2Result:
    """Most wind-absorbing cost-optimal clearing across all blocks.

    Each block's clearing cost is capped at ``phi[t]`` (plus a small
    tolerance, see :func:`cost_cap`).
    """
    u = _check_u(system, u)
    T = system.num_blocks
    if len(phi) != T:
        raise ValueError("one clearing cost per demand block is required")
    model = MilpModel("sp2")
    blocks = []
    for t in range(T):
        blk = add_lower_level(model, system, t, u, cuts=None if cuts is None else cuts[t],
                              cardinality=cardinality)
        model.add_constr(blk.cost, "<=", cost_cap(float(phi[t])), f"t{t}.costcap")
        blocks.append(blk)
    inv = investment_cost(system, u, x)
    obj = lin_sum(blk.wind * (system.kappa * system.demand_blocks[blk.t].duration_h) for blk in blocks)
    model.set_objective(obj - inv, "max")
    model.seal()
    sol = solve_mip(model, backend, mip_gap=SUBPROBLEM_GAP, time_limit=time_limit)
    if not sol.has_solution:
        raise SubproblemError("optimistic clearing subproblem", sol.status)
    results = [extract_result(system, blk, sol, u) for blk in blocks]
    wind_term = sum(system.kappa * system.demand_blocks[r.t].duration_h * r.wind_total for r in results)
    return Sp2Result(
        value=wind_term - inv,
        wind_term=wind_term,
        invest_term=inv,
        patterns=[r.switch_vector(system) for r in results],
        results=results,
        status=sol.status,
        bound=sol.bound,
    )


def min_shedding(system: PowerSystem, t: int, backend=None) -> float | None:
    """Least total shedding of block ``t`` with no wind and all lines closed."""
    model = MilpModel(f"minshed-t{t}")
    blk = add_lower_level(model, system.with_lines([_closed(ln) for ln in system.lines]), t,
                          [0.0] * len(system.wind_sites))
    model.set_objective(lin_sum(blk.shed.values()), "min")
    sol = solve_lp(model, backend)
    return float(sol.objective) if sol.is_optimal else None


def _closed(ln):
    return replace(ln, switchable=False)


# ---------------------------------------------------------------------------
# reporting

@dataclass
class AbsorptionSummary:
    wind_term: float
    costs: list[float]
    absorbed: np.ndarray  # [t, site] MW
    curtailment: np.ndarray  # [t, site] MW
    hours: np.ndarray  # [t]

    @property
    def total_curtailment_mwh(self) -> float:
        return float(self.hours @ self.curtailment.sum(axis=1))


def absorption_summary(results: Sequence[ClearingResult], system: PowerSystem) -> AbsorptionSummary:
    """Weighted wind energy, clearing costs and per-site curtailment."""
    if len(results) != system.num_blocks:
        raise ValueError("one clearing result per demand block is required")
    buses = [w.bus for w in system.wind_sites]
    absorbed = np.array([[r.wind[b] for b in buses] for r in results]).reshape(len(results), len(buses))
    avail = np.array([[r.available[b] for b in buses] for r in results]).reshape(len(results), len(buses))
    hours = np.array([system.demand_blocks[r.t].duration_h for r in results])
    wind_term = float(system.kappa * hours @ absorbed.sum(axis=1))
    curtail = np.maximum(avail - absorbed, 0.0)
    return AbsorptionSummary(wind_term, [r.cost for r in results], absorbed, curtail, hours)


def write_dispatch_csv(results: Sequence[ClearingResult], system: PowerSystem, path: str | Path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["block", "bus", "generator_block", "MW"])
        for r in results:
            for g in system.generators:
                for b in range(len(g.blocks)):
                    w.writerow([r.t, g.bus, f"{g.id}:{b + 1}", _fmt(r.gen[g.id, b])])
            for bus, mw in r.wind.items():
                w.writerow([r.t, bus, "wind", _fmt(mw)])
            for bus, mw in r.shed.items():
                if mw > 0:
                    w.writerow([r.t, bus, "shed", _fmt(mw)])


def write_topology_csv(results: Sequence[ClearingResult], path: str | Path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["block", "line", "status"])
        for r in results:
            for lid, c in r.closed.items():
                w.writerow([r.t, lid, "closed" if c else "open"])


def write_summary_csv(results: Sequence[ClearingResult], path: str | Path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["block", "cost", "wind_MW", "available_MW", "curtailed_MW", "shed_MW", "open_lines"])
        for r in results:
            avail = sum(r.available.values())
            w.writerow([r.t, _fmt(r.cost), _fmt(r.wind_total), _fmt(avail), _fmt(max(0.0, avail - r.wind_total)),
                         _fmt(r.shed_total), " ".join(r.open_lines)])


def _fmt(v: float) -> str:
    # fixed rounding keeps files stable across backends and platforms
    v = round(float(v), 6)
    if v == 0 or math.isclose(v, 0.0, abs_tol=5e-7):
        v = 0.0
    return f"{v:.6f}"
