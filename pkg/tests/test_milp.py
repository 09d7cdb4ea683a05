import math
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_mip, lp_value
from windtc.milp import (INF, LinExpr, MilpModel, ModelError, add_complementarity, add_product, audit_bigm,
                         complementarity_violations, get_backend, lin_sum, read_lp, read_solution, solve_lp,
                         solve_mip, write_lp, write_solution)
from windtc.milp import simplex


def random_model(rng: np.random.Generator, n_cont: int, n_bin: int, m: int, maximize: bool = False,
                 free_vars: bool = False) -> MilpModel:
    """Bounded random MILP with integer data."""
    model = MilpModel("rand")
    xs = []
    for j in range(n_cont):
        lo = -float(rng.integers(0, 5)) if free_vars and rng.random() < 0.5 else 0.0
        xs.append(model.add_var(f"x{j}", lo, float(rng.integers(1, 10))))
    for j in range(n_bin):
        xs.append(model.add_binary(f"b{j}"))
    for i in range(m):
        coef = rng.integers(-5, 6, size=len(xs)).astype(float)
        expr = LinExpr({v: c for v, c in zip(xs, coef) if c})
        sense = rng.choice(["<=", ">=", "=="], p=[0.6, 0.3, 0.1])
        rhs = float(rng.integers(-5, 15))
        if sense == "==":
            # keep equalities satisfiable by anchoring them at a random point
            pt = np.array([rng.uniform(v.lb, v.ub) if not v.is_binary else rng.integers(0, 2) for v in xs])
            rhs = float(coef @ pt)
        model.add_constr(expr, sense, rhs, f"r{i}")
    c = rng.integers(-10, 11, size=len(xs)).astype(float)
    model.set_objective(LinExpr({v: k for v, k in zip(xs, c) if k}), "max" if maximize else "min")
    return model.seal()


def model_arrays(model: MilpModel):
    f = model.to_matrix()
    return f.c, f.A.toarray(), f.row_lo, f.row_hi, f.lb.copy(), f.ub.copy(), f.maximize, np.flatnonzero(f.integer)


# -- modeling layer ------------------------------------------------------------

def test_linexpr_arithmetic():
    m = MilpModel()
    x, y = m.add_var("x"), m.add_var("y")
    e = 2 * (x + y) - y + 3
    assert e.value(np.array([1.0, 2.0])) == pytest.approx(2 * 3 - 2 + 3)
    assert lin_sum([x, y, 1.0]).value(np.array([1.0, 1.0])) == 3.0


def test_sealed_model_rejects_changes():
    m = MilpModel()
    m.add_var("x")
    m.seal()
    with pytest.raises(ModelError):
        m.add_var("y")


def test_duplicate_names_rejected():
    m = MilpModel()
    m.add_var("x")
    with pytest.raises(ModelError):
        m.add_var("x")


# -- LP -------------------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6), m=st.integers(1, 6), maximize=st.booleans())
def test_builtin_lp_matches_linprog(seed, n, m, maximize):
    model = random_model(np.random.default_rng(seed), n, 0, m, maximize, free_vars=True)
    c, A, lo, hi, lb, ub, mx, _ = model_arrays(model)
    ref = lp_value(c, A, lo, hi, lb, ub, mx)
    sol = solve_lp(model, "builtin")
    if ref is None:
        assert not sol.is_optimal
    else:
        assert sol.is_optimal
        assert sol.objective == pytest.approx(ref, rel=1e-7, abs=1e-7)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6), m=st.integers(1, 6),
       backend=st.sampled_from(["builtin", "highs"]))
def test_lp_strong_duality(seed, n, m, backend):
    model = random_model(np.random.default_rng(seed), n, 0, m, free_vars=True)
    sol = solve_lp(model, backend)
    if not sol.is_optimal:
        return
    f = model.to_matrix()
    A = f.A.toarray()
    y, r = sol.duals, sol.reduced_costs
    # stationarity in the d objective / d rhs convention
    assert np.allclose(f.c - A.T @ y - r, 0.0, atol=1e-7)
    # dual objective: each multiplier times the bound it is attached to
    dual_obj = f.obj_const
    for i in range(len(y)):
        if abs(y[i]) > 1e-9:
            dual_obj += y[i] * (f.row_lo[i] if y[i] > 0 else f.row_hi[i])
    for j in range(len(r)):
        if abs(r[j]) > 1e-9:
            dual_obj += r[j] * (f.lb[j] if r[j] > 0 else f.ub[j])
    assert dual_obj == pytest.approx(sol.objective, rel=1e-8, abs=1e-7)


def test_simplex_reports_infeasible_and_unbounded():
    A = np.array([[1.0, 1.0]])
    res = simplex.solve(np.array([1.0, 1.0]), A, np.array([5.0]), np.array([5.0]), np.zeros(2), np.array([1.0, 1.0]))
    assert res.status == "infeasible"
    res = simplex.solve(np.array([-1.0, 0.0]), A, np.array([-INF]), np.array([INF]), np.zeros(2), np.full(2, INF))
    assert res.status == "unbounded"


def test_simplex_degenerate_cycling_example():
    # classic Beale example: cycles under textbook Dantzig pricing without anti-cycling
    c = np.array([-0.75, 150.0, -0.02, 6.0])
    A = np.array([[0.25, -60.0, -0.04, 9.0], [0.5, -90.0, -0.02, 3.0], [0.0, 0.0, 1.0, 0.0]])
    res = simplex.solve(c, A, np.full(3, -INF), np.array([0.0, 0.0, 1.0]), np.zeros(4), np.full(4, INF))
    assert res.status == "optimal"
    assert res.objective == pytest.approx(-0.05)


# -- MIP -----------------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_cont=st.integers(0, 4), n_bin=st.integers(1, 7),
       m=st.integers(1, 5), maximize=st.booleans())
def test_builtin_mip_matches_enumeration(seed, n_cont, n_bin, m, maximize):
    model = random_model(np.random.default_rng(seed), n_cont, n_bin, m, maximize)
    c, A, lo, hi, lb, ub, mx, bins = model_arrays(model)
    ref = brute_mip(c, A, lo, hi, lb, ub, bins, mx)
    sol = solve_mip(model, "builtin", mip_gap=0.0)
    if ref is None:
        assert not sol.has_solution
    else:
        assert sol.objective == pytest.approx(ref, rel=1e-9, abs=1e-7)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_backends_agree_on_mip(seed):
    model = random_model(np.random.default_rng(seed), 3, 6, 4)
    a, b = solve_mip(model, "builtin", mip_gap=0.0), solve_mip(model, "highs", mip_gap=0.0)
    assert a.has_solution == b.has_solution
    if a.has_solution:
        assert a.objective == pytest.approx(b.objective, rel=1e-6, abs=1e-6)


def test_node_limit_returns_limit_status():
    model = random_model(np.random.default_rng(5), 2, 10, 6)
    sol = solve_mip(model, "builtin", mip_gap=0.0, node_limit=1)
    assert sol.status in ("limit", "optimal", "infeasible")


# -- gadgets -------------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), B=st.floats(0.1, 50))
def test_product_gadget_exact_at_integral_points(seed, B):
    rng = np.random.default_rng(seed)
    m = MilpModel()
    z = m.add_binary("z")
    x = m.add_var("x", -B, B)
    p = add_product(m, z, x, B, "p")
    target = float(rng.uniform(-1, 1))
    m.set_objective(p, "max" if target > 0 else "min")
    zv = int(rng.integers(0, 2))
    z.lb = z.ub = zv
    xv = float(rng.uniform(-B, B))
    x.lb = x.ub = xv
    sol = solve_mip(m.seal(), "highs", mip_gap=0.0)
    assert sol.x[p.index] == pytest.approx(zv * xv, abs=1e-9)


def test_complementarity_gadget_forbids_both_positive():
    m = MilpModel()
    a = m.add_var("a", 0, 10)
    b = m.add_var("b", 0, 10)
    add_complementarity(m, a, b, 100.0, name="ab")
    m.set_objective(a + b, "max")
    sol = solve_mip(m.seal(), "builtin", mip_gap=0.0)
    assert sol.objective == pytest.approx(10.0)
    assert not complementarity_violations(m, sol.x)


def test_bigm_audit_flags_values_near_m():
    m = MilpModel()
    a = m.add_var("a", 0, 1000)
    b = m.add_var("b", 0, 1)
    add_complementarity(m, a, b, 100.0, slack_bound=1.0, name="ab")
    m.set_objective(a, "max")
    sol = solve_mip(m.seal(), "builtin", mip_gap=0.0)
    assert sol.objective == pytest.approx(100.0)
    flags = audit_bigm(m, sol)
    assert flags and flags[0][0] == "ab"


# -- LP-file bridge ------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_lp_file_round_trip(seed):
    model = random_model(np.random.default_rng(seed), 3, 3, 4, bool(seed % 2), free_vars=True)
    again = read_lp(write_lp(model)).seal()
    a, b = solve_mip(model, "highs", mip_gap=0.0), solve_mip(again, "highs", mip_gap=0.0)
    assert a.has_solution == b.has_solution
    if a.has_solution:
        assert a.objective == pytest.approx(b.objective, rel=1e-9, abs=1e-9)


def test_solution_round_trip():
    model = random_model(np.random.default_rng(1), 3, 2, 3)
    x = np.arange(model.num_vars, dtype=float) / 3
    status, y = read_solution(model, write_solution(model, x))
    assert status == "optimal" and np.allclose(x, y)
    status, y = read_solution(model, write_solution(model, None, status="infeasible"))
    assert status == "infeasible" and y is None


def test_external_backend_via_stub_solver():
    model = random_model(np.random.default_rng(3), 3, 4, 4)
    ext = f"external:{sys.executable} -m windtc.milp.stub_solver"
    a, b = solve_mip(model, ext, mip_gap=0.0), solve_mip(model, "highs", mip_gap=0.0)
    assert a.has_solution == b.has_solution
    if a.has_solution:
        assert a.objective == pytest.approx(b.objective, rel=1e-6)


def test_unknown_backend():
    with pytest.raises(ValueError):
        get_backend("cplex")


def test_objective_constant_kept():
    m = MilpModel()
    x = m.add_var("x", 0, 1)
    m.set_objective(x + 5.0, "max")
    assert math.isclose(solve_lp(m.seal(), "builtin").objective, 6.0)
