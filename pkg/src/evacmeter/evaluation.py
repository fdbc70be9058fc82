"""Rolling plans and affine policies out against realized demand, and the
sampling baseline they are compared with."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .demand import BetaShape, UncertaintySet, box_uncertainty, sample_demand
from .lp import solve
from .model import (DemandProfile, DischargePlan, FreewayInstance, build_mp3,
                    extract_plan)
from .robust import AffinePolicy, realize_flows, solve_aarc

EVAL_SEED_OFFSET = 1_000_000
MAX_REDRAWS = 1000


@dataclass(frozen=True, eq=False)
class RolloutResult:
    objective: float
    leftover: np.ndarray           # (n,) queued at the end of the horizon
    released: np.ndarray           # (n, K)
    max_storage_violation: float
    max_capacity_clip: float = 0.0


def _clip_to_capacity(flows: np.ndarray, instance: FreewayInstance, k: int) -> np.ndarray:
    out = np.minimum(flows, instance.ramp_caps)
    for l in range(instance.n_ramps):
        load = out[l:].sum()
        cap = instance.segment_caps[l, k]
        if load > cap:
            out[l:] *= cap / load
    return out


def rollout(strategy: DischargePlan | AffinePolicy, realized: DemandProfile,
            instance: FreewayInstance, penalty: float) -> RolloutResult:
    """Execute ``strategy`` against one demand realization.

    Vehicles the strategy does not release stay queued for the next interval.
    Releases never exceed the queue, the ramp cap or the mainline capacity
    (overloaded segments scale their upstream ramps down proportionally).
    The objective is ``sum (K+1-k) w released T + penalty * leftover``.
    """
    if penalty > 0:
        raise ValueError("penalty is a cost per leftover vehicle and must be <= 0")
    n, K = instance.n_ramps, instance.horizon
    d = realized.on_horizon(K).arrivals
    if d.shape[0] != n:
        raise ValueError("realized demand does not match the instance")
    if isinstance(strategy, AffinePolicy):
        target = realize_flows(strategy, realized.on_horizon(K), clip=True)
    else:
        target = np.maximum(strategy.flows, 0.0)
    if target.shape != (n, K):
        raise ValueError(f"strategy covers {target.shape}, instance is {(n, K)}")

    released = np.zeros((n, K))
    queue = np.zeros(n)
    worst_storage = 0.0
    worst_clip = 0.0
    for k in range(K):
        avail = queue + d[:, k]
        want = np.minimum(target[:, k], avail)
        rel = _clip_to_capacity(want, instance, k)
        worst_clip = max(worst_clip, float(np.max(want - rel)))
        released[:, k] = rel
        queue = avail - rel
        worst_storage = max(worst_storage, float(np.max(queue - instance.storage[:, k])))

    remaining = (K + 1 - np.arange(1, K + 1)) * instance.interval
    obj = float(np.sum(instance.weights * released * remaining)) + penalty * float(queue.sum())
    return RolloutResult(obj, queue, released, max(worst_storage, 0.0), worst_clip)


@dataclass(frozen=True)
class MethodStats:
    method: str
    theta: float
    objective: float
    average: float
    sd: float
    worst: float
    n_train: int
    n_eval: int
    seed: int
    dropped: int = 0

    @classmethod
    def from_values(cls, method, theta, objective, values, n_train, seed, dropped=0):
        v = np.asarray(values, float)
        sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
        return cls(method, float(theta), float(objective), float(v.mean()), sd,
                   float(v.min()), n_train, int(v.size), int(seed), dropped)


CSV_COLUMNS = ("method", "theta", "Obj", "Avg", "sd", "Worst", "n_train", "n_eval",
               "seed", "dropped")


@dataclass
class ComparisonReport:
    rows: list[MethodStats] = field(default_factory=list)

    def get(self, method: str, theta: float) -> MethodStats:
        for r in self.rows:
            if r.method == method and np.isclose(r.theta, theta):
                return r
        raise KeyError((method, theta))

    @property
    def thetas(self) -> list[float]:
        return sorted({r.theta for r in self.rows})

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r.method, f"{r.theta:.10g}", f"{r.objective:.10g}",
                        f"{r.average:.10g}", f"{r.sd:.10g}", f"{r.worst:.10g}",
                        r.n_train, r.n_eval, r.seed, r.dropped])
        return buf.getvalue()


def evaluation_samples(uset: UncertaintySet, shape: BetaShape, n_eval: int,
                       seed: int, horizon: int) -> list[DemandProfile]:
    """The shared evaluation draws: sample ``i`` uses ``seed + 1e6 + i``."""
    base = seed + EVAL_SEED_OFFSET
    return [sample_demand(uset, shape, base + i, horizon) for i in range(n_eval)]


def ssp_plan(instance: FreewayInstance, uset: UncertaintySet, shape: BetaShape,
             n_train: int, seed: int, mean_of_plans: bool = True):
    """Sampling baseline: solve MP3 for ``n_train`` sampled profiles.

    Returns ``(plan, objective, dropped)`` with the objective the mean of
    the per-sample optima. The plan is the element-wise mean of the optimal
    plans, or with ``mean_of_plans=False`` the optimal plan for the mean
    sampled demand. Infeasible samples are replaced by fresh draws.
    """
    if n_train < 1:
        raise ValueError("n_train must be at least 1")
    K = instance.horizon
    plans, objs, demands = [], [], []
    dropped, i = 0, 0
    while len(plans) < n_train:
        if dropped > MAX_REDRAWS:
            raise RuntimeError(f"{dropped} training samples infeasible; giving up")
        d = sample_demand(uset, shape, seed + i, K)
        i += 1
        sol = solve(build_mp3(instance, d))
        if not sol.optimal:
            dropped += 1
            continue
        plans.append(extract_plan(sol, instance).flows)
        objs.append(sol.objective)
        demands.append(d.arrivals)
    if mean_of_plans:
        plan = DischargePlan(np.mean(plans, axis=0))
    else:
        sol = solve(build_mp3(instance, DemandProfile(np.mean(demands, axis=0))))
        sol._require_optimal()
        plan = extract_plan(sol, instance)
    return plan, float(np.mean(objs)), dropped


def ssp_pipeline(instance: FreewayInstance, uset: UncertaintySet, shape: BetaShape,
                 n_train: int, n_eval: int, penalty: float, seed: int,
                 theta: float = float("nan"), mean_of_plans: bool = True,
                 samples: list[DemandProfile] | None = None):
    """Train the baseline plan and roll it out on ``n_eval`` fresh samples.

    Returns ``(plan, MethodStats)``.
    """
    if n_eval < 1:
        raise ValueError("n_eval must be at least 1")
    plan, obj, dropped = ssp_plan(instance, uset, shape, n_train, seed, mean_of_plans)
    if samples is None:
        samples = evaluation_samples(uset, shape, n_eval, seed, instance.horizon)
    values = [rollout(plan, d, instance, penalty).objective for d in samples]
    return plan, MethodStats.from_values("SSP", theta, obj, values, n_train, seed, dropped)


def compare(instance: FreewayInstance, nominal_rate: float, caps, shape: BetaShape,
            penalty: float, thetas, seed: int, n_train: int = 50, n_eval: int = 1000,
            mean_of_plans: bool = True, refine: bool = True) -> ComparisonReport:
    """Baseline against robust policy for each ``theta``.

    Both methods are scored on the same evaluation samples. ``refine``
    selects the robust policy with :func:`~evacmeter.robust.refine_nominal`.
    """
    thetas = list(thetas)
    if not thetas:
        raise ValueError("theta grid is empty")
    K, Ka = instance.horizon, instance.arrival_limit
    nominal = np.zeros((len(caps), K))
    nominal[:, :Ka] = nominal_rate
    report = ComparisonReport()
    for theta in thetas:
        uset = box_uncertainty(nominal, theta, caps, Ka)
        samples = evaluation_samples(uset, shape, n_eval, seed, K)
        _, ssp = ssp_pipeline(instance, uset, shape, n_train, n_eval, penalty, seed,
                              theta, mean_of_plans, samples)
        report.rows.append(ssp)
        robust = solve_aarc(instance, uset, refine=refine)
        if robust is None:
            raise RuntimeError(f"robust counterpart infeasible at theta={theta}")
        values = [rollout(robust.policy, d, instance, penalty).objective for d in samples]
        report.rows.append(MethodStats.from_values(
            "AARC", theta, robust.worst_case_objective, values, 0, seed))
    return report
