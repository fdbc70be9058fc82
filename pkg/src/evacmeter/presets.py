"""Ready-made scenario dictionaries for ``evacmeter generate-scenario``."""
from __future__ import annotations

from . import scenarios as ref


def _instance(horizon=20, arrival_limit=10, **extra) -> dict:
    inst = {"ramp_caps": list(ref.RAMP_CAPS), "segment_caps": list(ref.SEGMENT_CAPS),
            "storage": list(ref.STORAGE), "horizon": horizon,
            "arrival_limit": arrival_limit, "interval": 1.0,
            "weights": {"scheme": "uniform"}}
    inst.update(extra)
    return inst


def ordinary() -> dict:
    return {"name": "ordinary", "instance": _instance(),
            "demand": {"kind": "fixed_rate", "rates": list(ref.ARRIVAL_RATES)},
            "run": {"sensitivity": {"target": "segment", "segment": 1,
                                    "deltas": [-0.2, -0.1, 0.1, 0.5, 1.0]}}}


def priority() -> dict:
    sc = ordinary()
    sc["name"] = "priority"
    sc["instance"]["weights"] = {"scheme": "custom", "values": [1.0, 10.0, 1.0, 1.0, 1.0]}
    return sc


def innermost_first() -> dict:
    sc = ordinary()
    sc["name"] = "innermost-first"
    sc["instance"]["weights"] = {"scheme": "innermost_first"}
    return sc


def storage_tight() -> dict:
    """Ramp 3 storage cut by 0.1 vehicle in intervals 9-11."""
    sc = ordinary()
    sc["name"] = "storage-tight"
    storage = []
    for r, s in enumerate(ref.STORAGE):
        row = [s] * 20
        if r == 2:
            for k in range(8, 11):
                row[k] = s - 0.1
        storage.append(row)
    sc["instance"]["storage"] = storage
    return sc


def empty() -> dict:
    sc = ordinary()
    sc["name"] = "empty"
    sc["demand"] = {"kind": "fixed_rate", "rates": [0.0] * 5}
    sc.pop("run")
    return sc


def s_curve() -> dict:
    return {"name": "s-curve", "instance": _instance(arrival_limit=14),
            "demand": {"kind": "s_curve", "totals": list(ref.S_CURVE_TOTALS),
                       "rate": 0.5, "half_time": ref.S_CURVE_HALF_TIME}}


def robust_grid() -> dict:
    return {"name": "robust-grid", "instance": _instance(10, 5),
            "demand": {"kind": "uncertainty", "nominal": 3.0, "theta": 0.1,
                       "caps": list(ref.ROBUST_DEMAND_CAPS), "beta": [1.0, 1.0]},
            "run": {"robust": {"nominals": [3.0, 3.2, 3.4, 3.6, 3.8, 4.0],
                               "thetas": [0.1, 0.14, 0.16, 0.18, 0.22, 0.26, 0.28, 0.3]}}}


def _comparison(name, nominal, beta, penalty) -> dict:
    return {"name": name, "instance": _instance(10, 5),
            "demand": {"kind": "uncertainty", "nominal": nominal, "theta": 0.1,
                       "caps": list(ref.ROBUST_DEMAND_CAPS), "beta": beta},
            "run": {"seed": 2024, "penalty": penalty,
                    "simulate": {"thetas": [0.1, 0.15, 0.2, 0.25, 0.3],
                                 "n_train": 50, "n_eval": 1000,
                                 "ssp_plan": "mean_of_plans", "refine": True}}}


def uniform_comparison() -> dict:
    return _comparison("uniform-comparison", 3.6, [1.0, 1.0], -5.0)


def skewed_comparison() -> dict:
    return _comparison("skewed-comparison", 3.2, [2.0, 5.0], -20.0)


PRESETS = {
    "ordinary": ordinary, "priority": priority, "innermost-first": innermost_first,
    "storage-tight": storage_tight, "empty": empty, "s-curve": s_curve,
    "robust-grid": robust_grid, "uniform-comparison": uniform_comparison,
    "skewed-comparison": skewed_comparison,
}
