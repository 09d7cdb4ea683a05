"""Optimality blocks for fixed switching patterns and the master problem.

With every switching status fixed, a block's clearing problem is an LP.
:func:`fixed_switch_form` writes that LP in one canonical shape

    min c x   s.t.  A x = b        (duals free)
                    G x >= h(u)    (duals >= 0, h affine in the wind capacities)
                    x_j >= 0 or free

and :func:`build_kkt_block` derives its optimality conditions mechanically
from that statement: primal feasibility, stationarity
``c - A'pi - G'eta = r`` with ``r >= 0`` (``r = 0`` for free columns), and
big-M complementarity for ``x_j * r_j`` and ``eta_i * (G x - h)_i``.  Dual
values follow the ``d objective / d rhs`` convention, so LP duals of the
same form plug in directly.

:func:`build_master` assembles the upper level, one optimistic copy of the
lower level per block, and one optimality block per enumerated pattern.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .grid_data import PowerSystem
from .market import LowerBlock, add_lower_level
from .milp import LinExpr, MilpModel, Solution, Variable, add_complementarity, lin_sum, solve_lp
from .milp.model import INF

Pattern = tuple[int, ...]


@dataclass
class Row:
    name: str
    coeffs: dict[int, float]  # column -> coefficient
    const: float  # right-hand side constant
    u_coef: dict[int, float] = field(default_factory=dict)  # site -> coefficient on u
    slack_bound: float = INF  # valid upper bound on G x - h at any feasible point


@dataclass
class LpForm:
    """Fixed-pattern clearing LP of one block in canonical form."""

    t: int
    pattern: Pattern
    names: list[str]
    cost: np.ndarray
    nonneg: np.ndarray
    var_bound: np.ndarray  # valid upper bound of each nonneg column (INF if unknown)
    eq: list[Row]
    ge: list[Row]
    cols: dict[str, int]

    @property
    def n(self) -> int:
        return len(self.names)

    def rhs(self, row: Row, u: Sequence[float]) -> float:
        return row.const + sum(c * float(u[s]) for s, c in row.u_coef.items())


def _check_pattern(system: PowerSystem, z_star) -> Pattern:
    sw = system.switchable_lines
    z = tuple(z_star)
    if len(z) != len(sw):
        raise ValueError(f"pattern has {len(z)} entries, system has {len(sw)} switchable lines")
    if any(v not in (0, 1) for v in z):
        raise ValueError(f"switching pattern must be 0/1, got {z}")
    return tuple(int(v) for v in z)


def fixed_switch_form(system: PowerSystem, t: int, z_star) -> LpForm:
    """Canonical clearing LP of block ``t`` with switchable lines fixed to ``z_star``."""
    z = _check_pattern(system, z_star)
    status = {ln.id: 1 for ln in system.lines}
    status.update({ln.id: v for ln, v in zip(system.switchable_lines, z)})
    D = system.demand(t)
    k = system.wind_factor(t)
    th = system.theta_max

    names, cost, nonneg, vb = [], [], [], []

    def col(name, c, nn, bound=INF):
        names.append(name)
        cost.append(c)
        nonneg.append(nn)
        vb.append(bound)
        return len(names) - 1

    ge: list[Row] = []
    gm = {}
    for g in system.generators:
        for b, blk in enumerate(g.blocks):
            j = col(f"gm[{g.id},{b}]", blk.price, True, blk.capacity)
            gm[g.id, b] = j
            ge.append(Row(f"gen_cap[{g.id},{b}]", {j: -1.0}, -blk.capacity, slack_bound=blk.capacity))
    gw = []
    for s, site in enumerate(system.wind_sites):
        bound = k[s] * site.cap_max
        j = col(f"gw[{site.bus}]", 0.0, True, bound)
        gw.append(j)
        ge.append(Row(f"wind_cap[{site.bus}]", {j: -1.0}, 0.0, {s: -k[s]}, slack_bound=bound))
    total = float(D.sum())
    shed = {b.id: col(f"s[{b.id}]", b.shed_penalty, True, total) for b in system.buses}
    theta = {}
    for b in system.buses:
        if b.is_reference:
            continue
        j = col(f"theta[{b.id}]", 0.0, False)
        theta[b.id] = j
        ge.append(Row(f"theta_lo[{b.id}]", {j: 1.0}, -th, slack_bound=2 * th))
        ge.append(Row(f"theta_hi[{b.id}]", {j: -1.0}, -th, slack_bound=2 * th))
    flow = {}
    for ln in system.lines:
        if not status[ln.id]:
            continue
        j = col(f"f[{ln.id}]", 0.0, False)
        flow[ln.id] = j
        ge.append(Row(f"flow_lo[{ln.id}]", {j: 1.0}, -ln.capacity, slack_bound=2 * ln.capacity))
        ge.append(Row(f"flow_hi[{ln.id}]", {j: -1.0}, -ln.capacity, slack_bound=2 * ln.capacity))

    eq: list[Row] = []
    inj: dict[int, dict[int, float]] = {b.id: {} for b in system.buses}

    def add(bus, j, c):
        inj[bus][j] = inj[bus].get(j, 0.0) + c

    for g in system.generators:
        for b in range(len(g.blocks)):
            add(g.bus, gm[g.id, b], 1.0)
    for s, site in enumerate(system.wind_sites):
        add(site.bus, gw[s], 1.0)
    for lid, j in flow.items():
        ln = system.line_by_id[lid]
        add(ln.to_bus, j, 1.0)
        add(ln.from_bus, j, -1.0)
    for i, b in enumerate(system.buses):
        add(b.id, shed[b.id], 1.0)
        eq.append(Row(f"balance[{b.id}]", inj[b.id], float(D[i])))
    for lid, j in flow.items():
        ln = system.line_by_id[lid]
        coeffs = {j: 1.0}
        if ln.from_bus in theta:
            coeffs[theta[ln.from_bus]] = coeffs.get(theta[ln.from_bus], 0.0) - ln.susceptance
        if ln.to_bus in theta:
            coeffs[theta[ln.to_bus]] = coeffs.get(theta[ln.to_bus], 0.0) + ln.susceptance
        eq.append(Row(f"flowdef[{lid}]", coeffs, 0.0))

    return LpForm(t, z, names, np.array(cost), np.array(nonneg, dtype=bool), np.array(vb), eq, ge,
                  {nm: j for j, nm in enumerate(names)})


@dataclass
class FixedLp:
    form: LpForm
    model: MilpModel
    x: list[Variable]
    eq: list
    ge: list


def fixed_switch_lp(system: PowerSystem, t: int, z_star, u: Sequence[float]) -> FixedLp:
    """The canonical LP as a standalone model with numeric capacities ``u``."""
    form = fixed_switch_form(system, t, z_star)
    model = MilpModel(f"fixed-t{t}")
    x = [model.add_var(nm, 0.0 if nn else -INF, INF) for nm, nn in zip(form.names, form.nonneg)]
    eq = [model.add_constr(LinExpr({x[j]: c for j, c in r.coeffs.items()}), "==", r.const, r.name)
          for r in form.eq]
    ge = [model.add_constr(LinExpr({x[j]: c for j, c in r.coeffs.items()}), ">=", form.rhs(r, u), r.name)
          for r in form.ge]
    model.set_objective(LinExpr({x[j]: c for j, c in enumerate(form.cost) if c}), "min")
    return FixedLp(form, model.seal(), x, eq, ge)


# ---------------------------------------------------------------------------
# optimality block

@dataclass
class KktBlock:
    t: int
    pattern: Pattern
    form: LpForm
    x: list[Variable]  # primal copy
    pi: list[Variable]  # one per equality row (balance, then flow definition)
    eta: list[Variable]  # one per inequality row
    rc: list[LinExpr]  # reduced cost expression per column
    indicators: list[Variable]
    value: LinExpr  # clearing cost of the primal copy
    link: object | None
    constrs: list
    pairs: list

    @property
    def pi_balance(self) -> dict[str, Variable]:
        return {r.name: v for r, v in zip(self.form.eq, self.pi) if r.name.startswith("balance")}

    @property
    def lam(self) -> dict[str, Variable]:
        return {r.name: v for r, v in zip(self.form.eq, self.pi) if r.name.startswith("flowdef")}

    def point(self, x: np.ndarray, duals_eq: np.ndarray, duals_ge: np.ndarray, size: int,
              tol: float = 1e-9) -> np.ndarray:
        """Full assignment of this block's columns from an LP primal/dual pair.

        Indicators are chosen so that each complementarity pair holds
        whenever the pair itself is complementary.
        """
        vec = np.zeros(size)
        for v, val in zip(self.x, x):
            vec[v.index] = val
        for v, val in zip(self.pi, duals_eq):
            vec[v.index] = val
        for v, val in zip(self.eta, duals_ge):
            vec[v.index] = val
        for pair in self.pairs:
            vec[pair.indicator.index] = 1.0 if pair.var_expr.value(vec) > tol else 0.0
        return vec


def build_kkt_block(model: MilpModel, system: PowerSystem, t: int, z_star, u: Sequence, *,
                    link_to: LinExpr | None = None, name: str | None = None) -> KktBlock:
    """Append the optimality conditions of the fixed-pattern LP to ``model``.

    ``u`` holds numbers or model variables for the wind capacities.  With
    ``link_to`` given, adds ``link_to <= cost of the primal copy``.
    """
    form = fixed_switch_form(system, t, z_star)
    M = system.bigM_complementarity
    tag = name or f"kkt[t{t}," + "".join(map(str, form.pattern)) + "]"
    start = len(model.constrs)
    x = [model.add_var(f"{tag}.x[{nm}]", 0.0 if nn else -INF, INF) for nm, nn in zip(form.names, form.nonneg)]
    pi = [model.add_var(f"{tag}.pi[{r.name}]", -INF, INF) for r in form.eq]
    eta = [model.add_var(f"{tag}.eta[{r.name}]", 0.0, INF) for r in form.ge]
    u_expr = [LinExpr.of(v) for v in u]

    def h(row):
        out = LinExpr(const=row.const)
        for s, c in row.u_coef.items():
            out.iadd(u_expr[s], c)
        return out

    # primal feasibility
    for r in form.eq:
        model.add_constr(LinExpr({x[j]: c for j, c in r.coeffs.items()}), "==", r.const, f"{tag}.{r.name}")
    slacks = []
    for r in form.ge:
        slack = LinExpr({x[j]: c for j, c in r.coeffs.items()}) - h(r)
        model.add_constr(slack, ">=", 0.0, f"{tag}.{r.name}")
        slacks.append(slack)

    # stationarity: r_j = c_j - sum_i A_ij pi_i - sum_k G_kj eta_k
    rc = [LinExpr(const=float(c)) for c in form.cost]
    for r, p in zip(form.eq, pi):
        for j, c in r.coeffs.items():
            rc[j].add_term(p, -c)
    for r, e in zip(form.ge, eta):
        for j, c in r.coeffs.items():
            rc[j].add_term(e, -c)
    for j, expr in enumerate(rc):
        model.add_constr(expr, ">=" if form.nonneg[j] else "==", 0.0, f"{tag}.stat[{form.names[j]}]")

    # complementarity
    indicators, pairs = [], []
    n0 = len(model.complementarities)
    for j, expr in enumerate(rc):
        if form.nonneg[j]:
            indicators.append(add_complementarity(model, x[j], expr, M, var_bound=form.var_bound[j],
                                                  name=f"{tag}.cx[{form.names[j]}]"))
    for r, e, slack in zip(form.ge, eta, slacks):
        indicators.append(add_complementarity(model, e, slack, M, slack_bound=r.slack_bound,
                                              name=f"{tag}.ce[{r.name}]"))
    pairs = model.complementarities[n0:]

    value = LinExpr({x[j]: float(c) for j, c in enumerate(form.cost) if c})
    link = None
    if link_to is not None:
        link = model.add_constr(LinExpr.of(link_to) - value, "<=", 0.0, f"{tag}.link")
    constrs = model.constrs[start:]
    return KktBlock(t, form.pattern, form, x, pi, eta, rc, indicators, value, link, constrs, pairs)


def certify_pattern(system: PowerSystem, t: int, z_star, u: Sequence[float], backend=None,
                    ) -> tuple[float, float]:
    """Solve the optimality block alone (objective 0) and an independent LP.

    Returns ``(block value, LP optimum)``; the two agree when the derived
    conditions characterize LP optimality.
    """
    from .milp import solve_mip

    model = MilpModel(f"certify-t{t}")
    blk = build_kkt_block(model, system, t, z_star, [float(v) for v in u])
    model.set_objective(LinExpr(), "min")
    sol = solve_mip(model, backend, mip_gap=0.0)
    lp = fixed_switch_lp(system, t, z_star, u)
    ref = solve_lp(lp.model, backend)
    if not sol.has_solution or not ref.is_optimal:
        raise RuntimeError(f"certification solve failed: block {sol.status}, LP {ref.status}")
    return blk.value.value(sol.x), float(ref.objective)


# ---------------------------------------------------------------------------
# master problem

@dataclass
class MasterModel:
    system: PowerSystem
    model: MilpModel
    x: list[Variable]
    u: list[Variable]
    tilde: list[LowerBlock]
    kkt: dict[tuple[int, Pattern], KktBlock]
    objective: LinExpr

    def patterns(self, t: int) -> list[Pattern]:
        return [p for (tt, p) in self.kkt if tt == t]

    def add_pattern(self, t: int, z_star) -> bool:
        """Add the optimality block of ``z_star`` for block ``t``; False if present."""
        z = _check_pattern(self.system, z_star)
        if (t, z) in self.kkt:
            return False
        self.kkt[t, z] = build_kkt_block(self.model, self.system, t, z, self.u,
                                         link_to=self.tilde[t].cost)
        return True


def build_master(system: PowerSystem, Zhat: Sequence[Iterable] | None = None, *, cuts=None,
                 cardinality: int | None = None) -> MasterModel:
    """Upper level + optimistic lower copies + optimality blocks for ``Zhat``.

    ``Zhat[t]`` lists switching patterns of block ``t``; with every list
    empty this is the high-point relaxation.
    """
    T = system.num_blocks
    model = MilpModel("master")
    xs, us = [], []
    for w in system.wind_sites:
        xs.append(model.add_binary(f"x[{w.bus}]"))
        us.append(model.add_var(f"u[{w.bus}]", 0.0, w.cap_max))
    C = [w.invest_cost_per_mw for w in system.wind_sites]
    H = [w.fixed_cost for w in system.wind_sites]
    model.add_constr(lin_sum(C[s] * us[s] + H[s] * xs[s] for s in range(len(us))), "<=", system.budget,
                     "budget")
    for s, w in enumerate(system.wind_sites):
        model.add_constr(us[s] - w.cap_max * xs[s], "<=", 0.0, f"install[{w.bus}]")

    tilde = []
    for t in range(T):
        tilde.append(add_lower_level(model, system, t, us, prefix="opt.",
                                     cuts=None if cuts is None else cuts[t], cardinality=cardinality))
    c = system.annual_invest_cost
    hcost = system.annual_fixed_cost
    obj = lin_sum(blk.wind * (system.kappa * system.demand_blocks[blk.t].duration_h) for blk in tilde)
    obj = obj - lin_sum(c[s] * us[s] + hcost[s] * xs[s] for s in range(len(us)))
    model.set_objective(obj, "max")
    master = MasterModel(system, model, xs, us, tilde, {}, obj)
    if Zhat is not None:
        if len(Zhat) != T:
            raise ValueError("Zhat needs one pattern list per demand block")
        for t, pats in enumerate(Zhat):
            for z in pats:
                master.add_pattern(t, z)
    return master


def enumerate_patterns(system: PowerSystem, t: int, *, cuts=None, cardinality: int | None = None
                       ) -> list[Pattern]:
    """All switching patterns of block ``t`` allowed by cuts and cardinality."""
    sw = [ln.id for ln in system.switchable_lines]
    pos = {lid: k for k, lid in enumerate(sw)}
    out = []
    for z in itertools.product((1, 0), repeat=len(sw)):
        if cardinality is not None and len(z) - sum(z) > cardinality:
            continue
        if cuts is not None:
            if any(z[pos[lid]] == 0 for lid in cuts.fixed):
                continue
            if any(all(z[pos[lid]] == 0 for lid in group) for group in cuts.inequalities):
                continue
        out.append(z)
    return out


def master_solution_values(master: MasterModel, sol: Solution) -> tuple[list[float], list[int]]:
    u = [max(0.0, float(sol.x[v.index])) for v in master.u]
    x = [int(round(sol.x[v.index])) for v in master.x]
    return u, x
