"""Freeway evacuation instances and their LP formulations.

Ramps are numbered from the exit: ramp 1 is the most downstream on-ramp and
the index grows going upstream. Mainline segment ``l`` carries every ramp
``r >= l``, so segment 1 (just before the exit) carries all traffic. Arrays
in this module are 0-based, with ``[r, k]`` meaning ramp ``r+1`` during
interval ``k+1``.

Variable names in the generated LPs are ``f[r,k]`` with 1-based indices;
row names start with their constraint family (``mainline``, ``ramp``,
``demand``, ``causality``, ``storage``).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

import numpy as np

from .lp import LpProblem, LpSolution, Sense, Status, solve

ROUNDOFF = 1e-9
SERVE_TOL = 1e-6

FAMILIES = ("mainline", "ramp", "demand", "causality", "storage")


class WrongProblemShape(ValueError):
    """The LP's variables do not match the instance dimensions."""


class IncompletePlan(ValueError):
    """Some ramp never discharges its total demand."""


class InfeasibleAtFullHorizon(RuntimeError):
    """MP3 has no feasible plan even at the instance's horizon."""


def _per_interval(value, n: int, K: int, what: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full((n, K), float(arr))
    elif arr.ndim == 1:
        if arr.size != n:
            raise ValueError(f"{what}: expected {n} per-ramp values, got {arr.size}")
        arr = np.repeat(arr[:, None], K, axis=1)
    elif arr.shape != (n, K):
        raise ValueError(f"{what}: expected shape {(n, K)}, got {arr.shape}")
    return np.array(arr, dtype=float)


@dataclass(frozen=True, eq=False)
class FreewayInstance:
    """Static description of a controlled evacuation freeway.

    Use :meth:`create` to build one from scalars, per-ramp vectors or full
    ``(n, K)`` schedules.
    """

    ramp_caps: np.ndarray       # (n,) vehicles per interval
    segment_caps: np.ndarray    # (n, K)
    storage: np.ndarray         # (n, K) vehicles
    weights: np.ndarray         # (n, K)
    horizon: int
    arrival_limit: int
    interval: float = 1.0

    @classmethod
    def create(cls, ramp_caps, segment_caps, storage, horizon: int,
               arrival_limit: int | None = None, weights=1.0,
               interval: float = 1.0) -> "FreewayInstance":
        ramp_caps = np.asarray(ramp_caps, dtype=float).ravel()
        n = ramp_caps.size
        K = int(horizon)
        inst = cls(ramp_caps=ramp_caps,
                   segment_caps=_per_interval(segment_caps, n, K, "segment_caps"),
                   storage=_per_interval(storage, n, K, "storage"),
                   weights=_per_interval(weights, n, K, "weights"),
                   horizon=K,
                   arrival_limit=int(K if arrival_limit is None else arrival_limit),
                   interval=float(interval))
        inst.validate()
        return inst

    def validate(self) -> None:
        n, K = self.n_ramps, self.horizon
        if n < 1:
            raise ValueError("need at least one ramp")
        if not 1 <= self.arrival_limit <= K:
            raise ValueError("need 1 <= arrival_limit <= horizon")
        for name in ("segment_caps", "storage", "weights"):
            if getattr(self, name).shape != (n, K):
                raise ValueError(f"{name} must have shape {(n, K)}")
        if np.any(self.ramp_caps < 0) or np.any(self.segment_caps < 0) \
                or np.any(self.storage < 0):
            raise ValueError("capacities must be nonnegative")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        if self.interval <= 0:
            raise ValueError("interval length must be positive")

    @property
    def n_ramps(self) -> int:
        return self.ramp_caps.size

    def upstream(self, segment: int) -> range:
        """0-based ramps feeding 0-based ``segment``."""
        return range(segment, self.n_ramps)

    def with_horizon(self, K: int) -> "FreewayInstance":
        """Same freeway over the first ``K`` intervals (or extended by
        repeating the last interval's data)."""
        def fit(a):
            if K <= a.shape[1]:
                return a[:, :K].copy()
            return np.concatenate([a, np.repeat(a[:, -1:], K - a.shape[1], 1)], 1)
        return replace(self, segment_caps=fit(self.segment_caps),
                       storage=fit(self.storage), weights=fit(self.weights),
                       horizon=K, arrival_limit=min(self.arrival_limit, K))

    def with_weights(self, weights) -> "FreewayInstance":
        inst = replace(self, weights=_per_interval(weights, self.n_ramps,
                                                   self.horizon, "weights"))
        inst.validate()
        return inst

    def with_segment_caps(self, caps) -> "FreewayInstance":
        return replace(self, segment_caps=_per_interval(
            caps, self.n_ramps, self.horizon, "segment_caps"))

    def with_storage(self, storage) -> "FreewayInstance":
        return replace(self, storage=_per_interval(
            storage, self.n_ramps, self.horizon, "storage"))


@dataclass(frozen=True, eq=False)
class DemandProfile:
    """Arrivals ``d[r, k]`` (vehicles) over the instance horizon."""

    arrivals: np.ndarray

    def __post_init__(self):
        a = np.array(self.arrivals, dtype=float)
        if a.ndim != 2:
            raise ValueError("arrivals must be a 2-D (ramps x intervals) array")
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise ValueError("arrivals must be finite and nonnegative")
        object.__setattr__(self, "arrivals", a)

    @property
    def totals(self) -> np.ndarray:
        return self.arrivals.sum(axis=1)

    @property
    def n_ramps(self) -> int:
        return self.arrivals.shape[0]

    @property
    def horizon(self) -> int:
        return self.arrivals.shape[1]

    @property
    def last_arrival(self) -> int:
        """1-based index of the last interval with any arrival (0 if none)."""
        nz = np.flatnonzero(self.arrivals.sum(axis=0) > 0)
        return int(nz[-1]) + 1 if nz.size else 0

    def on_horizon(self, K: int) -> "DemandProfile":
        """Pad with zeros or truncate to ``K`` intervals.

        Truncation may only drop intervals without arrivals.
        """
        a = self.arrivals
        if K >= a.shape[1]:
            return DemandProfile(np.pad(a, ((0, 0), (0, K - a.shape[1]))))
        if np.any(a[:, K:] > 0):
            raise ValueError(f"cannot truncate demand to {K} intervals: arrivals after it")
        return DemandProfile(a[:, :K])

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.arrivals, axis=1)


@dataclass(frozen=True, eq=False)
class DischargePlan:
    """Metered discharge ``f[r, k]`` (vehicles per interval)."""

    flows: np.ndarray

    def __post_init__(self):
        f = np.array(self.flows, dtype=float)
        if f.ndim != 2 or not np.all(np.isfinite(f)):
            raise ValueError("flows must be a finite 2-D array")
        if np.any(f < 0):
            raise ValueError("flows must be nonnegative")
        object.__setattr__(self, "flows", f)

    @property
    def totals(self) -> np.ndarray:
        return self.flows.sum(axis=1)

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.flows, axis=1)

    def exit_flow(self) -> np.ndarray:
        """Vehicles reaching the exit per interval (all ramps)."""
        return self.flows.sum(axis=0)


def var_name(r: int, k: int) -> str:
    """LP name of the flow from 0-based ramp ``r`` in 0-based interval ``k``."""
    return f"f[{r + 1},{k + 1}]"


def _flow_variables(lp: LpProblem, instance: FreewayInstance, costs) -> np.ndarray:
    n, K = instance.n_ramps, instance.horizon
    names = [var_name(r, k) for r in range(n) for k in range(K)]
    return lp.add_variables(names, costs.ravel()).reshape(n, K)


def _capacity_rows(lp: LpProblem, instance: FreewayInstance, f: np.ndarray,
                   segment_caps: np.ndarray) -> None:
    n, K = instance.n_ramps, instance.horizon
    for l in range(n):
        for k in range(K):
            idx = f[l:, k]
            lp.add_row(f"mainline[{l + 1},{k + 1}]", (idx, np.ones(idx.size)),
                       "<=", segment_caps[l, k])
    for r in range(n):
        for k in range(K):
            lp.add_row(f"ramp[{r + 1},{k + 1}]", ((f[r, k],), (1.0,)), "<=",
                       instance.ramp_caps[r])


def build_mp1(instance: FreewayInstance, totals) -> LpProblem:
    """Minimum total exit-time LP with all demand present at the start.

    Uses the first interval's segment capacities for every interval when the
    instance carries a time-varying schedule (the base model has constant
    capacities only if the schedule is constant).
    """
    totals = np.asarray(totals, dtype=float)
    if totals.shape != (instance.n_ramps,):
        raise ValueError("need one total per ramp")
    if np.any(totals < 0):
        raise ValueError("totals must be nonnegative")
    n, K, T = instance.n_ramps, instance.horizon, instance.interval
    lp = LpProblem(Sense.MIN, "MP1")
    k_idx = np.arange(1, K + 1, dtype=float)
    f = _flow_variables(lp, instance, np.tile(k_idx * T, (n, 1)))
    _capacity_rows(lp, instance, f, instance.segment_caps)
    for r in range(n):
        lp.add_row(f"demand[{r + 1}]", (f[r], np.ones(K)), "=", totals[r])
    return lp


def build_mp3(instance: FreewayInstance, demand: DemandProfile) -> LpProblem:
    """Weighted discharge-timing LP with arrivals, queues and storage limits.

    Maximizes ``sum (K+1-k) w[r,k] f[r,k] T`` subject to time-varying
    mainline capacities, ramp discharge caps, full service of every ramp's
    demand, discharge never ahead of arrivals, and queues within storage.
    """
    n, K, T = instance.n_ramps, instance.horizon, instance.interval
    if demand.arrivals.shape != (n, K):
        demand = demand.on_horizon(K)
        if demand.arrivals.shape != (n, K):
            raise ValueError("demand does not match the instance dimensions")
    d_cum = demand.cumulative()
    lp = LpProblem(Sense.MAX, "MP3")
    remaining = (K + 1 - np.arange(1, K + 1, dtype=float)) * T
    f = _flow_variables(lp, instance, instance.weights * remaining)
    _capacity_rows(lp, instance, f, instance.segment_caps)
    for r in range(n):
        lp.add_row(f"demand[{r + 1}]", (f[r], np.ones(K)), ">=",
                   demand.totals[r])
    for r in range(n):
        for k in range(K):
            idx = f[r, :k + 1]
            lp.add_row(f"causality[{r + 1},{k + 1}]", (idx, np.ones(k + 1)),
                       "<=", d_cum[r, k])
            lp.add_row(f"storage[{r + 1},{k + 1}]", (idx, -np.ones(k + 1)),
                       "<=", instance.storage[r, k] - d_cum[r, k])
    return lp


_VAR_RE = re.compile(r"f\[(\d+),(\d+)\]$")


def extract_plan(solution: LpSolution, instance: FreewayInstance) -> DischargePlan:
    """Read the flow matrix out of an optimal MP1/MP3 solution."""
    solution._require_optimal()
    n, K = instance.n_ramps, instance.horizon
    flows = np.full((n, K), np.nan)
    for j, name in enumerate(solution.problem.var_names):
        m = _VAR_RE.match(name)
        if m is None:
            continue
        r, k = int(m.group(1)) - 1, int(m.group(2)) - 1
        if not (0 <= r < n and 0 <= k < K):
            raise WrongProblemShape(f"variable {name} outside a {n}x{K} instance")
        flows[r, k] = solution.x[j]
    if np.isnan(flows).any():
        raise WrongProblemShape(f"LP does not define all {n}x{K} flow variables")
    flows[(flows < 0) & (flows >= -ROUNDOFF)] = 0.0
    return DischargePlan(flows + 0.0)  # drops negative zeros


def clearance_time(plan: DischargePlan, totals) -> int:
    """First (1-based) interval by which every ramp has discharged its total."""
    totals = np.asarray(totals, dtype=float)
    cum = plan.cumulative()
    done = cum >= totals[:, None] - SERVE_TOL
    if not np.all(done[:, -1]):
        bad = np.flatnonzero(~done[:, -1]) + 1
        raise IncompletePlan(f"ramps {bad.tolist()} never reach their totals")
    # ramps with zero demand are done before interval 1
    first = np.where(totals <= SERVE_TOL, 0, np.argmax(done, axis=1) + 1)
    return int(first.max()) if first.size else 0


def discharge_objective(plan: DischargePlan, instance: FreewayInstance) -> float:
    """MAX-form objective ``sum (K+1-k) w f T`` of a plan."""
    K = instance.horizon
    remaining = (K + 1 - np.arange(1, K + 1)) * instance.interval
    return float(np.sum(instance.weights * plan.flows * remaining))


def waiting_objective(plan: DischargePlan, instance: FreewayInstance,
                      demand: DemandProfile) -> float:
    """MIN-form objective: weighted queue summed over intervals."""
    wq = np.cumsum(instance.weights * (demand.arrivals - plan.flows), axis=1)
    return float(wq.sum() * instance.interval)


@dataclass(frozen=True)
class Mp3Result:
    solution: LpSolution
    plan: DischargePlan | None
    clearance: int | None

    @property
    def status(self) -> Status:
        return self.solution.status

    @property
    def objective(self) -> float | None:
        return self.solution.objective if self.solution.optimal else None


def solve_mp3(instance: FreewayInstance, demand: DemandProfile) -> Mp3Result:
    """Build, solve and post-process MP3 in one call."""
    sol = solve(build_mp3(instance, demand))
    if not sol.optimal:
        return Mp3Result(sol, None, None)
    plan = extract_plan(sol, instance)
    return Mp3Result(sol, plan, clearance_time(plan, demand.on_horizon(
        instance.horizon).totals))


def min_clearance_search(instance: FreewayInstance, demand: DemandProfile):
    """Smallest horizon at which MP3 is feasible, by bisection.

    Returns ``(K_star, plan)`` where the plan (over ``K_star`` intervals)
    clears every ramp exactly by ``K_star``.
    """
    K = instance.horizon
    demand = demand.on_horizon(K)

    def attempt(k):
        return solve_mp3(instance.with_horizon(k), demand.on_horizon(k))

    full = attempt(K)
    if not full.solution.optimal:
        raise InfeasibleAtFullHorizon(f"MP3 is {full.status.value} at horizon {K}")
    lo = max(demand.last_arrival, 1)  # every horizon below lo drops arrivals
    hi, best = K, full
    if full.clearance is not None:
        hi = min(hi, max(full.clearance, lo))
        if hi != K:
            best = attempt(hi)
    while lo < hi:
        mid = (lo + hi) // 2
        res = attempt(mid)
        if res.solution.optimal:
            hi, best = mid, res
        else:
            lo = mid + 1
    if best.solution.problem.num_variables != instance.n_ramps * hi:
        best = attempt(hi)
    return hi, best.plan


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    families: tuple[str, ...] = field(default_factory=tuple)
    rows: tuple[str, ...] = field(default_factory=tuple)


def feasibility_check(instance: FreewayInstance, demand: DemandProfile) -> FeasibilityReport:
    """Decide whether MP3 admits a plan; on failure name the constraint
    families whose rows keep positive phase-one artificials."""
    sol = solve(build_mp3(instance, demand))
    if sol.status is not Status.INFEASIBLE:
        return FeasibilityReport(True)
    rows = [sol.problem.row_names[i] for i in np.flatnonzero(sol.infeasibility > 1e-9)]
    fams = []
    for name in rows:
        fam = name.split("[", 1)[0]
        if fam not in fams:
            fams.append(fam)
    return FeasibilityReport(False, tuple(fams), tuple(rows))
