"""Acceptance criteria 1-10; each test prints one ``criterion N: PASS|FAIL`` line."""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from oracles import affordable_cap, brute_mip, brute_sp1
from test_milp import model_arrays, random_model
from windtc.ccg import CONVERGED, cardinality_sweep, compare_tc, solve_ccg, solve_exact_enumeration
from windtc.cuts import generate_cuts
from windtc.grid_data import BUNDLED, generate_instance, load_bundled
from windtc.kkt import build_kkt_block, fixed_switch_lp
from windtc.market import solve_sp1
from windtc.milp import LinExpr, MilpModel, add_product, solve_lp, solve_mip

REL = 1e-6


@contextmanager
def criterion(n, capsys, what):
    ok = False
    try:
        yield
        ok = True
    finally:
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} ({what})")


def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1.0)


def test_criterion_01_ccg_equals_enumeration(capsys):
    systems = [load_bundled("six_bus")] + [generate_instance(seed, "3bus") for seed in range(5)]
    with criterion(1, capsys, "CCG equals full enumeration"):
        for system in systems:
            t0 = time.perf_counter()
            plan = solve_ccg(system, REL)
            t1 = time.perf_counter()
            exact = solve_exact_enumeration(system)
            t2 = time.perf_counter()
            assert plan.status == CONVERGED and exact.status == CONVERGED
            assert _rel(plan.objective, exact.objective) <= REL, (system.name, plan.objective, exact.objective)
            assert t1 - t0 < 60 and t2 - t1 < 60


def test_criterion_02_sp1_equals_brute_force(capsys, six_bus):
    assert len(six_bus.switchable_lines) == 7
    with criterion(2, capsys, "clearing cost equals 2^7 brute force"):
        for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
            u = [frac * affordable_cap(six_bus)]
            for t in range(six_bus.num_blocks):
                t0 = time.perf_counter()
                cost, _ = solve_sp1(six_bus, u, t)
                assert time.perf_counter() - t0 < 10
                ref = brute_sp1(six_bus, u, t)
                assert _rel(cost, ref) <= REL, (frac, cost, ref)


def _link_max(system, t, z, u):
    """Largest value-link right-hand side the optimality block admits."""
    model = MilpModel("link-max")
    lhs = model.add_var("rhs", -1e12, 1e12)
    build_kkt_block(model, system, t, z, u, link_to=lhs)
    model.set_objective(LinExpr.of(lhs), "max")
    sol = solve_mip(model.seal(), mip_gap=0.0)
    assert sol.is_optimal
    return sol.objective


def test_criterion_03_kkt_certification(capsys):
    rng = np.random.default_rng(2024)
    with criterion(3, capsys, "optimality block admits exactly the LP optimum"):
        for _ in range(20):
            system = generate_instance(int(rng.integers(1000)), "3bus")
            t = int(rng.integers(system.num_blocks))
            z = tuple(int(v) for v in rng.integers(0, 2, size=len(system.switchable_lines)))
            u = [float(rng.uniform(0, affordable_cap(system)))]
            ref = solve_lp(fixed_switch_lp(system, t, z, u).model, "highs")
            assert ref.is_optimal
            got = _link_max(system, t, z, u)
            assert _rel(got, ref.objective) <= REL, (z, u, got, ref.objective)


def test_criterion_04_cut_safety(capsys):
    six = load_bundled("six_bus")
    with criterion(4, capsys, "cuts keep the optimum; exact 6-bus cut set"):
        (cs,) = generate_cuts(six)
        assert cs.fixed == {"1-5", "2-4"}
        assert set(cs.inequalities) == {("2-6", "3-6"), ("1-2", "3-6")}
        enumerable = [six, load_bundled("three_bus")] + [generate_instance(seed, "3bus") for seed in range(5)]
        for system in enumerable:
            a = solve_exact_enumeration(system)
            b = solve_exact_enumeration(system, cuts=generate_cuts(system))
            assert _rel(a.objective, b.objective) <= REL, (system.name, a.objective, b.objective)
        congested = load_bundled("six_bus_congested")
        a = solve_ccg(congested, REL)
        b = solve_ccg(congested, REL, cuts=generate_cuts(congested))
        assert _rel(a.objective, b.objective) <= REL


def test_criterion_05_monotone_bounds(capsys):
    with criterion(5, capsys, "UB non-increasing, LB non-decreasing, final gap <= 1e-3"):
        for name in BUNDLED:
            plan = solve_ccg(load_bundled(name), 1e-3)
            ub = [r.UB for r in plan.iterations]
            lb = [r.LB for r in plan.iterations]
            assert all(b <= a for a, b in zip(ub, ub[1:])), name
            assert all(b >= a for a, b in zip(lb, lb[1:])), name
            assert plan.status == CONVERGED and plan.gap <= 1e-3, name


def test_criterion_06_tc_dominance(capsys):
    systems = [generate_instance(seed, "3bus") for seed in range(100, 105)]
    systems += [generate_instance(seed, "6bus") for seed in range(100, 105)]
    with criterion(6, capsys, "switching never lowers the objective; congested case gains wind"):
        for system in systems:
            cmp = compare_tc(system, REL)
            assert cmp.with_tc.objective >= cmp.without_tc.objective - REL * max(1.0, abs(cmp.without_tc.objective))
        cmp = compare_tc(load_bundled("six_bus_congested"), 1e-3)
        assert cmp.wind_improvement > 0


def test_criterion_07_cardinality_sweep(capsys, congested):
    with criterion(7, capsys, "wind term rises then saturates over K = 0..7"):
        rows = cardinality_sweep(congested, 7, REL)
        wind = [r.wind_term for r in rows]
        assert all(r.status == CONVERGED for r in rows)
        assert all(b >= a - REL * abs(a) for a, b in zip(wind, wind[1:]))
        k_sat = next(k for k in range(len(wind)) if all(_rel(w, wind[k]) <= REL for w in wind[k:]))
        assert 0 < k_sat < 7
        notc = compare_tc(congested, REL).without_tc
        assert rows[0].objective == notc.objective and rows[0].wind_term == notc.wind_term


def test_criterion_08_product_gadget(capsys):
    rng = np.random.default_rng(7)
    samples = 0
    with criterion(8, capsys, "1000 integral solutions satisfy aux = theta * z"):
        while samples < 1000:
            B = float(rng.uniform(0.1, 3.2))
            m = MilpModel("gadget")
            triples = []
            for i in range(10):
                z = m.add_binary(f"z{i}")
                th = m.add_var(f"th{i}", -B, B)
                triples.append((z, th, add_product(m, z, th, B, f"p{i}")))
            obj = LinExpr()
            for z, th, p in triples:
                obj.add_term(z, float(rng.normal()))
                obj.add_term(th, float(rng.normal()))
                obj.add_term(p, float(rng.normal()) * 10)
            m.set_objective(obj, "max")
            sol = solve_mip(m.seal(), mip_gap=0.0)
            assert sol.is_optimal
            for z, th, p in triples:
                zv = round(sol.x[z.index])
                assert abs(sol.x[p.index] - zv * sol.x[th.index]) <= 1e-9
                samples += 1


@pytest.mark.parametrize("backend", ["builtin", "highs"])
def test_criterion_09_mip_backend(capsys, backend):
    rng = np.random.default_rng(99)
    with criterion(9, capsys, f"{backend} MIP equals binary enumeration on 50 models"):
        for _ in range(50):
            model = random_model(rng, int(rng.integers(0, 5)), int(rng.integers(1, 11)), int(rng.integers(1, 7)),
                                 bool(rng.integers(2)))
            c, A, lo, hi, lb, ub, mx, bins = model_arrays(model)
            assert len(bins) <= 10
            ref = brute_mip(c, A, lo, hi, lb, ub, bins, mx)
            sol = solve_mip(model, backend, mip_gap=0.0)
            if ref is None:
                assert not sol.has_solution
            else:
                assert sol.is_optimal
                assert abs(sol.objective - ref) <= 1e-9 * max(1.0, abs(ref)), (sol.objective, ref)


def test_criterion_10_rts24_convergence(capsys):
    with criterion(10, capsys, "24-bus instance converges in <= 6 iterations"):
        t0 = time.perf_counter()
        plan = solve_ccg(load_bundled("rts24"), 1e-3)
        assert plan.status == CONVERGED
        assert len(plan.iterations) <= 6
        assert time.perf_counter() - t0 < 1800
