"""Deterministic metering on the five-ramp reference freeway.

Solves the ordinary scenario, shows which segment is the bottleneck, then
walks through priority weights and a capacity sweep.

    python3 demos/deterministic_plans.py
"""
import numpy as np

from evacmeter.model import min_clearance_search, solve_mp3
from evacmeter.scenarios import ordinary_demand, reference_freeway, s_curve_demand
from evacmeter.sensitivity import (apply_priority_scheme, bottleneck_report, capacity_sweep,
                                   completion_intervals, segment_dual_sum)

inst, demand = reference_freeway(), ordinary_demand()
res = solve_mp3(inst, demand)
print(f"ordinary scenario: objective {res.objective:g}, everyone out by interval {res.clearance}")
print(np.round(res.plan.flows[:, :res.clearance], 2))

K_star, _ = min_clearance_search(inst, demand)
print(f"shortest feasible horizon: {K_star}")

rep = bottleneck_report(inst, demand)
print("spare mainline capacity per segment:", rep.min_slack.round(3).tolist())
print("an extra vehicle/interval on segment 1 is worth", segment_dual_sum(inst, demand, 1))

for delta in capacity_sweep(inst, demand, 1, [-0.2, -0.1, 0.1, 0.5, 1.0]):
    print(f"  segment 1 {delta.delta:+.1f}: {delta.status.value:<10} {delta.objective}")

pri = solve_mp3(apply_priority_scheme(inst, "custom", [1, 10, 1, 1, 1]), demand)
print("ramp 2 weighted 10x: objective", round(pri.objective, 6),
      "completion intervals", completion_intervals(pri.plan.flows, demand.totals).tolist(),
      "vs", completion_intervals(res.plan.flows, demand.totals).tolist())

for rate in (0.3, 0.5, 0.6):
    r = solve_mp3(reference_freeway(arrival_limit=14), s_curve_demand(rate))
    print(f"S-curve arrivals, response rate {rate}: {r.status.value}, clearance {r.clearance}")
