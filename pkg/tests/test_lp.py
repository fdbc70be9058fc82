import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evacmeter.lp import (LpProblem, NotOptimal, Relation, Sense, SolverOptions,
                          Status, solve)
from evacmeter.lp.lpfile import format_lp, parse_lp, read_lp, write_lp
from evacmeter.lp.ranging import range_objective_coefficient, range_rhs
from evacmeter.lp.simplex import reoptimize

from oracles import highs, random_lp, scan_range, vertex_oracle


def textbook():
    lp = LpProblem(Sense.MAX, "textbook")
    lp.add_variable("x", 3.0)
    lp.add_variable("y", 5.0)
    lp.add_row("c1", {"x": 1.0}, "<=", 4.0)
    lp.add_row("c2", {"y": 2.0}, "<=", 12.0)
    lp.add_row("c3", {"x": 3.0, "y": 2.0}, "<=", 18.0)
    return lp


def build(sense, c, A, rels, b, upper):
    lp = LpProblem(Sense.MAX if sense == "max" else Sense.MIN)
    for j, cj in enumerate(c):
        lp.add_variable(f"x{j}", cj, 0.0, upper[j])
    for i, (row, r, v) in enumerate(zip(A, rels, b)):
        lp.add_row(f"r{i}", {j: a for j, a in enumerate(row)}, r, v)
    return lp


def test_textbook_optimum():
    sol = solve(textbook())
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(36.0, abs=1e-12)
    assert sol.value("x") == pytest.approx(2.0)
    assert sol.value("y") == pytest.approx(6.0)
    assert sol.dual("c1") == pytest.approx(0.0, abs=1e-12)
    assert sol.dual("c2") == pytest.approx(1.5)
    assert sol.dual("c3") == pytest.approx(1.0)
    assert sol.slack("c1") == pytest.approx(2.0)
    assert sol.duality_gap() <= 1e-12


def test_empty_feasible_set_is_infeasible():
    lp = LpProblem(Sense.MIN)
    lp.add_variable("x", 1.0)
    lp.add_row("neg", {"x": 1.0}, "<=", -1.0)
    sol = solve(lp)
    assert sol.status is Status.INFEASIBLE
    assert not sol.optimal
    with pytest.raises(NotOptimal):
        sol.value("x")


def test_ray_is_unbounded():
    lp = LpProblem(Sense.MAX)
    lp.add_variable("x", 1.0)
    assert solve(lp).status is Status.UNBOUNDED
    lp.add_row("loose", {"x": -1.0}, "<=", 3.0)
    assert solve(lp).status is Status.UNBOUNDED


def test_free_variables_and_equalities():
    lp = LpProblem(Sense.MIN)
    lp.add_variable("u", 1.0, -math.inf, math.inf)
    lp.add_variable("v", 0.0, -math.inf, math.inf)
    lp.add_row("e", {"u": 1.0, "v": 1.0}, "=", 2.0)
    lp.add_row("g", {"u": 1.0, "v": -1.0}, ">=", -4.0)
    sol = solve(lp)
    assert sol.objective == pytest.approx(-1.0)
    assert sol.value("v") == pytest.approx(3.0)


def test_duplicate_names_rejected():
    lp = textbook()
    with pytest.raises(ValueError):
        lp.add_variable("x")
    with pytest.raises(ValueError):
        lp.add_row("c1", {"x": 1.0}, "<=", 1.0)
    with pytest.raises(KeyError):
        lp.add_row("c9", {"nope": 1.0}, "<=", 1.0)
    with pytest.raises(ValueError):
        lp.add_row("c9", {"x": math.nan}, "<=", 1.0)


def test_relation_parsing():
    assert Relation.parse("<=") is Relation.LE
    assert Relation.parse(">=") is Relation.GE
    assert Relation.parse("=") is Relation.EQ


@pytest.mark.parametrize("seed", range(40))
def test_matches_vertex_enumeration(seed):
    data = random_lp(np.random.default_rng(1000 + seed))
    status, obj = vertex_oracle(*data)
    sol = solve(build(*data))
    assert sol.status.value == status
    if status == "Optimal":
        assert abs(sol.objective - obj) <= 1e-8
        assert sol.duality_gap() <= 1e-7 * (1 + abs(obj))


@st.composite
def lp_data(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_lp(np.random.default_rng(seed))


@settings(max_examples=60, deadline=None)
@given(lp_data())
def test_optimal_solutions_satisfy_kkt(data):
    sol = solve(build(*data))
    assert sol.status.value == vertex_oracle(*data)[0]
    if not sol.optimal:
        return
    p = sol.problem
    c, A, rel, b, lo, hi = p.arrays()
    ax = A @ sol.x
    scale = 1 + np.abs(b)
    for i, r in enumerate(rel):
        if r is Relation.LE:
            assert ax[i] <= b[i] + 1e-9 * scale[i]
        elif r is Relation.GE:
            assert ax[i] >= b[i] - 1e-9 * scale[i]
        else:
            assert abs(ax[i] - b[i]) <= 1e-9 * scale[i]
    assert np.all(sol.x >= lo - 1e-9) and np.all(sol.x <= hi + 1e-9)
    # complementary slackness on rows and on nonbasic columns
    assert np.all(np.abs(sol.duals * sol.slacks) <= 1e-7 * (1 + np.abs(sol.duals)))
    assert np.all(np.abs(sol.reduced_costs[sol.basic]) <= 1e-9)
    assert sol.duality_gap() <= 1e-7 * (1 + abs(sol.objective))


def test_solve_is_deterministic():
    seeds = (s for s in range(100) if vertex_oracle(*random_lp(np.random.default_rng(s)))[0] == "Optimal")
    data = random_lp(np.random.default_rng(next(seeds)))
    a, b = solve(build(*data)), solve(build(*data))
    assert a.objective == b.objective
    assert np.array_equal(a.x, b.x)
    assert np.array_equal(a.duals, b.duals)
    assert a.iterations == b.iterations


def test_bland_fallback_still_optimal():
    # stall threshold of 1 forces anti-cycling pricing from the first degenerate step
    opts = SolverOptions(stall_threshold=1)
    for seed in range(30):
        data = random_lp(np.random.default_rng(500 + seed))
        status, obj = vertex_oracle(*data)
        sol = solve(build(*data), opts)
        assert sol.status.value == status
        if obj is not None:
            assert sol.objective == pytest.approx(obj, abs=1e-8)


# -- ranging -------------------------------------------------------------------

def test_objective_range_on_textbook():
    rep = range_objective_coefficient(solve(textbook()), "x")
    assert rep.value == 3.0
    assert rep.decrease == pytest.approx(3.0)
    assert rep.increase == pytest.approx(4.5)
    assert not rep.degenerate


def test_objective_range_matches_resolve_grid():
    base = solve(textbook())

    def plan_at(cx):
        lp = textbook()
        lp.set_cost("x", cx)
        return solve(lp).x

    dec, inc = scan_range(plan_at, 3.0, 0.05, 10.0,
                          lambda x: np.allclose(x, base.x, atol=1e-9))
    rep = range_objective_coefficient(base, "x")
    # the grid brackets the true endpoint to within one step
    assert rep.decrease - 0.05 <= dec + 1e-9 <= rep.decrease + 1e-9
    assert rep.increase - 0.05 <= inc + 1e-9 <= rep.increase + 1e-9


def test_rhs_range_on_textbook():
    rep = range_rhs(solve(textbook()), "c2")
    assert rep.rate == pytest.approx(1.5)
    assert rep.lower == pytest.approx(6.0)
    assert rep.upper == pytest.approx(18.0)


def test_rhs_range_matches_resolve_grid():
    def obj_at(b2):
        lp = textbook()
        lp.set_rhs("c2", b2)
        return b2, solve(lp).objective

    def on_line(point):
        b2, obj = point
        return obj is not None and abs(obj - (36.0 + 1.5 * (b2 - 12.0))) <= 1e-9

    assert scan_range(obj_at, 12.0, 0.25, 20.0, on_line) == (6.0, 6.0)


def test_rhs_slope_inside_range():
    base = solve(textbook())
    rep = range_rhs(base, "c2")
    for delta in np.linspace(-rep.decrease * 0.99, rep.increase * 0.99, 9):
        lp = textbook()
        lp.set_rhs("c2", 12.0 + delta)
        assert solve(lp).objective == pytest.approx(36.0 + rep.rate * delta, abs=1e-6)


def test_nonbinding_row_range():
    base = solve(textbook())
    rep = range_rhs(base, "c1")
    assert rep.rate == 0.0
    assert rep.decrease == pytest.approx(base.slack("c1"))
    assert rep.increase == math.inf


def test_unused_variable_has_infinite_decrease():
    lp = LpProblem(Sense.MIN)
    lp.add_variable("a", 1.0)
    lp.add_variable("b", 3.0)
    lp.add_row("need", {"a": 1.0, "b": 1.0}, ">=", 2.0)
    sol = solve(lp)
    assert sol.value("b") == 0.0
    rep = range_objective_coefficient(sol, "b")
    assert rep.increase == math.inf
    assert rep.decrease == pytest.approx(2.0)   # reduced cost
    # for an unused variable, worsening (raising) the cost never matters
    lp.set_cost("b", 100.0)
    assert solve(lp).x.tolist() == sol.x.tolist()


def test_zero_perturbation_keeps_plan():
    base = solve(textbook())
    rep = range_objective_coefficient(base, "y")
    assert rep.contains(5.0)
    lp = textbook()
    lp.set_cost("y", 5.0 + 0.0)
    assert np.array_equal(solve(lp).x, base.x)


def test_degenerate_basis_is_flagged():
    lp = textbook()
    lp.add_row("c4", {"x": 1.0, "y": 1.0}, "<=", 8.0)   # also tight at (2, 6)
    sol = solve(lp)
    assert sol.objective == pytest.approx(36.0)
    assert range_rhs(sol, "c3").degenerate
    assert range_objective_coefficient(sol, "x").degenerate


def test_ranging_requires_optimal():
    lp = LpProblem(Sense.MAX)
    lp.add_variable("x", 1.0)
    with pytest.raises(NotOptimal):
        range_objective_coefficient(solve(lp), "x")


# -- lexicographic re-optimization ---------------------------------------------

def test_reoptimize_with_new_costs_matches_cold_solve():
    base = solve(textbook())
    lp = textbook()
    lp.set_cost("x", 1.0)
    lp.set_bounds("y", 0.0, 7.0)
    warm = reoptimize(base, lp)
    cold = solve(lp)
    assert warm.objective == pytest.approx(cold.objective)
    assert warm.iterations <= cold.iterations + 2


def test_reoptimize_rejects_bounds_cutting_off_the_start():
    base = solve(textbook())
    lp = textbook()
    lp.set_bounds("x", 3.0, 4.0)
    with pytest.raises(Exception):
        reoptimize(base, lp)


# -- LP file dump ---------------------------------------------------------------

def test_lp_file_sections_and_round_trip():
    lp = textbook()
    lp.add_variable("free", 0.0, -math.inf, math.inf)
    lp.add_variable("boxed", -1.5, -2.0, 7.0)
    lp.add_row("eq", {"free": 1.0, "boxed": -0.1}, "=", 0.3)
    lp.add_row("ge", {"x": 2.0, "boxed": 1.0}, ">=", -4.0)
    text = format_lp(lp)
    for header in ("Maximize", "Subject To", "Bounds", "End"):
        assert f"\n{header}\n" in text
    assert " free free" in text
    back = parse_lp(text)
    assert back.var_names == lp.var_names and back.row_names == lp.row_names
    assert back.costs == lp.costs and back.rhs == lp.rhs
    assert back.lower == lp.lower and back.upper == lp.upper
    assert (back.matrix() != lp.matrix()).nnz == 0
    assert format_lp(back) == text
    buf = io.StringIO()
    write_lp(lp, buf)
    buf.seek(0)
    assert solve(read_lp(buf)).objective == pytest.approx(solve(lp).objective)


def test_lp_file_matches_external_solver():
    rng = np.random.default_rng(3)
    for _ in range(10):
        data = random_lp(rng)
        back = parse_lp(format_lp(build(*data)))
        st_, obj = vertex_oracle(*data)
        sol = solve(back)
        assert sol.status.value == st_
        if st_ == "Optimal":
            assert obj == pytest.approx(highs(data[0], data[1], data[2], data[3], data[4],
                                              None, data[5])[1], abs=1e-7)
            assert sol.objective == pytest.approx(obj, abs=1e-8)
