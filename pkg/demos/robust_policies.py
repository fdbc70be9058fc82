"""Affinely adjustable plans under box-plus-cap demand uncertainty.

Solves one robust counterpart, checks the guarantee on sampled demand and
compares it with the plan averaged over sampled deterministic solves.
Takes a few minutes on one core.

    python3 demos/robust_policies.py
"""
from evacmeter.demand import BetaShape, sample_many
from evacmeter.evaluation import compare, rollout
from evacmeter.model import solve_mp3
from evacmeter.robust import solve_aarc
from evacmeter.scenarios import ROBUST_DEMAND_CAPS, ordinary_demand, robust_freeway, robust_set

inst = robust_freeway()
print("deterministic value at rate 3:",
      solve_mp3(inst, ordinary_demand(10, 5, [3.0] * 5)).objective)

uset = robust_set(3.0, 0.1)
rob = solve_aarc(inst, uset)
n_vars, n_rows = rob.dimensions
print(f"robust counterpart: {n_vars} variables, {n_rows} rows, "
      f"guaranteed objective {rob.worst_case_objective:g}")

samples = sample_many(uset, BetaShape(1, 1), 200, 11, inst.horizon)
outcomes = [rollout(rob.policy, d, inst, -5.0) for d in samples]
print("lowest realized objective over 200 draws:", round(min(o.objective for o in outcomes), 3))
print("largest leftover queue:", max(o.leftover.sum() for o in outcomes))

report = compare(inst, 3.6, ROBUST_DEMAND_CAPS, BetaShape(1, 1), -5.0, [0.1], seed=7,
                 n_train=20, n_eval=200)
print(report.to_csv())
