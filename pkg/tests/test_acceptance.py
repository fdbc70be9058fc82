"""Acceptance criteria, one test per criterion.

Each test records a single PASS/FAIL line (printed in the terminal summary)
before asserting, so a red criterion still reports what was measured.
The robust grid is solved once per session and shared by criteria 7 and 8.
"""
from __future__ import annotations

import time

import numpy as np
import pytest

from evacmeter.demand import BetaShape, SamplingExhausted, sample_demand
from evacmeter.evaluation import compare, rollout
from evacmeter.lp import Status, solve
from evacmeter.model import DemandProfile, solve_mp3
from evacmeter.robust import realize_flows, solve_aarc
from evacmeter.scenarios import (ROBUST_DEMAND_CAPS, ordinary_demand, reference_freeway,
                                 robust_freeway, robust_set, s_curve_demand)
from evacmeter.sensitivity import (apply_priority_scheme, bottleneck_report,
                                   capacity_sweep, completion_intervals, storage_sweep)

from conftest import ACCEPTANCE, AUDIT, GAP_TOL
from oracles import random_lp, robust_low_demand_value, vertex_oracle
from test_demand import S_CURVE_TABLE
from test_lp import build

NOMINALS = (3.0, 3.2, 3.4, 3.6, 3.8, 4.0)
THETAS = (0.10, 0.14, 0.16, 0.18, 0.22, 0.26, 0.28, 0.30)
ANCHORS = {(3.0, 0.10): 540.0, (3.0, 0.30): 420.0, (4.0, 0.10): 654.0, (3.6, 0.10): 615.0}
REFERENCE_GRID = {
    0.10: (540, 570, 592.5, 615, 636, 654),
    0.14: (516, 550.4, 575.5, 597, 618.5, 638),
    0.16: (504, 537.6, 567, 588, 609, 630),
    0.18: (492, 524.8, 557.6, 579, 599.5, 620),
    0.22: (468, 499.2, 530.4, 561, 580.5, 600),
    0.26: (444, 473.6, 503.2, 532.8, 561.5, 580),
    0.28: (432, 460.8, 489.6, 518.4, 547.2, 570),
    0.30: (420, 448, 476, 504, 532, 560),
}
CELL_BUDGET_S = 15 * 60


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[n] = line
    print(line)


@pytest.fixture(scope="session")
def ordinary():
    return reference_freeway(), ordinary_demand()


@pytest.fixture(scope="session")
def robust_grid():
    inst = robust_freeway()
    cells = {}
    for nd in NOMINALS:
        for th in THETAS:
            uset = robust_set(nd, th)
            t0 = time.perf_counter()
            res = solve_aarc(inst, uset)
            cells[(nd, th)] = (res, uset, time.perf_counter() - t0)
    return inst, cells


def test_criterion_01_ordinary_scenario(ordinary):
    t0 = time.perf_counter()
    res = solve_mp3(*ordinary)
    dt = time.perf_counter() - t0
    ok = (res.status is Status.OPTIMAL and abs(res.objective - 2531) <= 1e-6 * 2531
          and res.clearance == 14 and dt < 5.0)
    record(1, ok, f"objective {res.objective:.10g}, clearance {res.clearance}, {dt:.2f}s")
    assert ok


def test_criterion_02_priority_scenario(ordinary):
    inst, d = ordinary
    base = solve_mp3(inst, d)
    pri = solve_mp3(apply_priority_scheme(inst, "custom", [1, 10, 1, 1, 1]), d)
    c0 = completion_intervals(base.plan.flows, d.totals)[1]
    c1 = completion_intervals(pri.plan.flows, d.totals)[1]
    ok = (abs(pri.objective - 6590) <= 1e-6 * 6590 and pri.clearance == 14 and c1 < c0)
    record(2, ok, f"objective {pri.objective:.10g}, clearance {pri.clearance}, "
                  f"ramp 2 completes at {c1} (was {c0})")
    assert ok


def test_criterion_03_segment_one_sweep(ordinary):
    expected = {-0.2: None, -0.1: 2523.2, 0.1: 2538.8, 0.5: 2570.0, 1.0: 2605.0}
    sweep = capacity_sweep(*ordinary, segment=1, deltas=list(expected))
    ok = True
    parts = []
    for delta, want in expected.items():
        p = sweep.at(delta)
        if want is None:
            good = p.status is Status.INFEASIBLE
            parts.append(f"{delta:+g}:{p.status.value}")
        else:
            good = (p.status is Status.OPTIMAL and abs(p.objective - want) <= 0.1
                    and p.clearance == 14)
            parts.append(f"{delta:+g}:{p.objective:.6g}/K{p.clearance}")
        ok &= good
    record(3, ok, ", ".join(parts))
    assert ok


def test_criterion_04_segment_three_and_bottlenecks(ordinary):
    sweep = capacity_sweep(*ordinary, segment=3, deltas=[16, 10, 8.6, 8.5], absolute=True)
    caps_ok = (all(abs(sweep.at(c).objective - 2531) <= 1e-6 * 2531 for c in (16, 10, 8.6))
               and sweep.at(8.5).status is Status.INFEASIBLE)
    rep = bottleneck_report(*ordinary)
    s = rep.min_slack
    slack_ok = (abs(s[0]) <= 1e-7 and abs(s[2] - 6) <= 1e-7 and abs(s[3] - 3) <= 1e-7
                and abs(s[4] - 7) <= 1e-7)
    ok = caps_ok and slack_ok
    record(4, ok, f"c3=8.5 {sweep.at(8.5).status.value}; min slacks "
                  f"{np.round(s, 6).tolist()}")
    assert ok


def test_criterion_05_storage_and_demand_perturbations(ordinary):
    inst, d = ordinary
    single = {r: storage_sweep(inst, d, [r], (9, 11), -0.1).at(-0.1) for r in (1, 2, 3, 4)}
    more = storage_sweep(inst, d, [1, 2, 3, 4, 5], (9, 10), 2.0).at(2.0)
    lower = solve_mp3(inst, ordinary_demand(rates=[4, 3, 4, 3, 3]))
    infeasible = [r for r, p in single.items() if p.status is Status.INFEASIBLE]
    ok = (len(infeasible) == 4 and abs(more.objective - 2531) <= 1e-6 * 2531
          and abs(lower.objective - 2449) <= 1e-6 * 2449)
    detail = ", ".join(f"ramp {r}: {p.status.value}"
                       + (f" {p.objective:.6g}" if p.objective is not None else "")
                       for r, p in single.items())
    record(5, ok, f"storage -0.1 on 9-11 -> {detail}; all +2 -> {more.objective:.6g}; "
                  f"ramp 4 rate 3 -> {lower.objective:.6g}")
    assert ok


def test_criterion_06_s_curve():
    d = s_curve_demand(0.5)
    err = float(np.abs(d.arrivals[:, :14] - S_CURVE_TABLE).max())
    inst = reference_freeway(arrival_limit=14)
    infeasible = all(solve_mp3(inst, s_curve_demand(lr)).status is Status.INFEASIBLE
                     for lr in (0.6, 0.7, 0.8))
    k03 = solve_mp3(inst, s_curve_demand(0.3)).clearance
    k05 = solve_mp3(inst, s_curve_demand(0.5)).clearance
    ok = err <= 0.01 and infeasible and k03 == 15 and k05 == 14
    record(6, ok, f"max cell error {err:.4f}; LR 0.6-0.8 infeasible: {infeasible}; "
                  f"clearance LR0.3={k03}, LR0.5={k05}")
    assert ok


def test_criterion_07_robust_grid(robust_grid):
    inst, cells = robust_grid
    value = {}
    for key, (res, _, _) in cells.items():
        value[key] = res.worst_case_objective if res is not None else np.nan
    anchors_ok = all(abs(value[k] - v) <= 0.5 for k, v in ANCHORS.items())
    mono = True
    for i, nd in enumerate(NOMINALS):
        for j, th in enumerate(THETAS):
            if j + 1 < len(THETAS):
                mono &= value[(nd, THETAS[j + 1])] <= value[(nd, th)] + 1e-6
            if i + 1 < len(NOMINALS):
                mono &= value[(NOMINALS[i + 1], th)] >= value[(nd, th)] - 1e-6
    oracle_ok = all(
        abs(value[(3.0, th)] - 200 * 3.0 * (1 - th)) <= 1e-6 and
        abs(value[(3.0, th)] - robust_low_demand_value(3.0, th, 10, 5, 5)) <= 1e-6
        for th in THETAS)
    slowest = max(t for _, _, t in cells.values())
    budget_ok = slowest <= CELL_BUDGET_S
    worst_dev = max(abs(value[(nd, th)] - REFERENCE_GRID[th][i])
                    for i, nd in enumerate(NOMINALS) for th in THETAS)
    ok = anchors_ok and mono and oracle_ok and budget_ok
    dims = {res.dimensions for res, _, _ in cells.values() if res is not None}
    record(7, ok, "anchors " + ", ".join(f"{k}->{value[k]:.6g}" for k in ANCHORS)
           + f"; monotone {mono}; ND=3 oracle {oracle_ok}; slowest cell {slowest:.0f}s; "
             f"max deviation from reference grid {worst_dev:.3g}; model size {sorted(dims)}")
    assert ok


def capped_draw(uset, shape, seed, horizon):
    """In-set draw for sets where whole-vector rejection cannot succeed.

    Cells are drawn as in ``sample_demand``; a ramp over its total cap has
    its excess above the lower bound scaled down so the total meets the cap.
    """
    rng = np.random.default_rng(seed)
    lo = uset.lower
    draw = lo + (uset.upper - lo) * rng.beta(shape.alpha, shape.beta, size=lo.shape)
    excess = draw - lo
    room = uset.caps - lo.sum(axis=1)
    over = draw.sum(axis=1) > uset.caps
    excess[over] *= (room[over] / excess[over].sum(axis=1))[:, None]
    arrivals = np.zeros((uset.n_ramps, horizon))
    arrivals[:, :uset.arrival_limit] = lo + excess
    profile = DemandProfile(arrivals)
    assert uset.contains(profile)
    return profile


def test_criterion_08_robust_feasibility(robust_grid):
    inst, cells = robust_grid
    n_samples = 1000
    worst = {"leftover": 0.0, "constraint": 0.0, "objective_gap": 0.0}
    fallback = []
    for idx, ((nd, th), (res, uset, _)) in enumerate(sorted(cells.items())):
        assert res is not None
        shapes = (BetaShape(1.0, 1.0), BetaShape(0.3, 0.3))
        capped = False
        for i in range(n_samples):
            seed = 70_000 * idx + i
            if not capped:
                try:
                    d = sample_demand(uset, shapes[i % 2], seed, inst.horizon)
                except SamplingExhausted:
                    # the caps leave (almost) no volume inside the box
                    capped = True
                    fallback.append((nd, th, i))
            if capped:
                d = capped_draw(uset, shapes[i % 2], seed, inst.horizon)
            raw = realize_flows(res.policy, d)
            out = rollout(res.policy, d, inst, -5.0)
            f = out.released
            viol = max(float(-raw.min()), out.max_storage_violation, out.max_capacity_clip,
                       float((f - inst.ramp_caps[:, None]).max()))
            for l in range(inst.n_ramps):
                viol = max(viol, float((f[l:].sum(axis=0) - inst.segment_caps[l]).max()))
            worst["leftover"] = max(worst["leftover"], float(out.leftover.sum()))
            worst["constraint"] = max(worst["constraint"], viol)
            worst["objective_gap"] = max(worst["objective_gap"],
                                         res.worst_case_objective - out.objective)
    ok = (worst["leftover"] <= 1e-6 and worst["constraint"] <= 1e-6
          and worst["objective_gap"] <= 1e-6)
    switched = ", ".join(f"({nd}, {th}) from sample {i}" for nd, th, i in fallback) or "none"
    record(8, ok, f"{len(cells)} configurations x {n_samples} samples; max leftover "
                  f"{worst['leftover']:.2e}, max violation {worst['constraint']:.2e}, "
                  f"max shortfall below worst case {worst['objective_gap']:.2e}; "
                  f"cap-scaled draws after rejection ran out: {switched}")
    assert ok


COMPARISONS = {
    "uniform": dict(nominal_rate=3.6, shape=BetaShape(1.0, 1.0), penalty=-5.0),
    "skewed": dict(nominal_rate=3.2, shape=BetaShape(2.0, 5.0), penalty=-20.0),
}
COMPARISON_THETAS = (0.1, 0.15, 0.2, 0.25, 0.3)
SEED = 2024


def test_criterion_09_sampling_vs_robust():
    inst = robust_freeway()
    lines, ok = [], True
    for name, cfg in COMPARISONS.items():
        rep = compare(inst, cfg["nominal_rate"], ROBUST_DEMAND_CAPS, cfg["shape"],
                      cfg["penalty"], COMPARISON_THETAS, SEED, n_train=50, n_eval=1000)
        sd_wins = worst_wins = obj_wins = 0
        for th in COMPARISON_THETAS:
            ssp, aarc = rep.get("SSP", th), rep.get("AARC", th)
            sd_wins += aarc.sd < ssp.sd
            worst_wins += aarc.worst > ssp.worst
            obj_wins += ssp.objective > aarc.objective
            print(f"{name} theta={th}: SSP {ssp.objective:.2f}/{ssp.average:.2f}/"
                  f"{ssp.sd:.2f}/{ssp.worst:.2f}  AARC {aarc.objective:.2f}/"
                  f"{aarc.average:.2f}/{aarc.sd:.2f}/{aarc.worst:.2f}")
        n = len(COMPARISON_THETAS)
        table_ok = sd_wins >= 4 and worst_wins == n and obj_wins == n
        ok &= table_ok
        lines.append(f"{name}: sd {sd_wins}/{n}, worst {worst_wins}/{n}, obj {obj_wins}/{n}")
    record(9, ok, "; ".join(lines) + f" (seed {SEED}, n_train 50, n_eval 1000)")
    assert ok


def test_criterion_10_solver_oracle_and_gap_audit():
    # runs last in this file so the audit covers every acceptance solve
    mismatches = 0
    rng = np.random.default_rng(20240601)
    for _ in range(200):
        data = random_lp(rng)
        want_status, want_obj = vertex_oracle(*data)
        sol = solve(build(*data))
        if sol.status.value != want_status:
            mismatches += 1
        elif want_obj is not None and abs(sol.objective - want_obj) > 1e-8:
            mismatches += 1
    gap_ok = not AUDIT.failures
    ok = mismatches == 0 and gap_ok
    record(10, ok, f"200 random LPs, {mismatches} mismatches; gap audit over "
                   f"{AUDIT.solves} optimal solves, worst relative gap "
                   f"{AUDIT.worst_gap:.2e}, worst dual sign error {AUDIT.worst_sign:.2e} "
                   f"(limit {GAP_TOL:g})")
    assert ok
