"""Priority weights, bottlenecks, capacity/storage sweeps and buffer sizing."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .lp import RangeReport, Status, solve
from .lp.ranging import range_objective_coefficient
from .model import (DemandProfile, FreewayInstance, build_mp3, clearance_time,
                    extract_plan, var_name)

BINDING_TOL = 1e-7


class NonpositiveWeight(ValueError):
    pass


class NegativeDelta(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BottleneckReport:
    """Per-segment minimum slack over the horizon and per-cell storage slack.

    Segment and ramp numbers in ``argmin`` are 1-based intervals.
    """

    min_slack: np.ndarray          # (n,)
    argmin: tuple[tuple[int, ...], ...]
    storage_slack: np.ndarray      # (n, K)
    objective: float

    @property
    def binding(self) -> np.ndarray:
        return self.min_slack <= BINDING_TOL

    @property
    def bottlenecks(self) -> list[int]:
        return (np.flatnonzero(self.binding) + 1).tolist()


def bottleneck_report(instance: FreewayInstance, demand: DemandProfile) -> BottleneckReport:
    sol = solve(build_mp3(instance, demand))
    if not sol.optimal:
        raise RuntimeError(f"MP3 is {sol.status.value}; no bottleneck report")
    n, K = instance.n_ramps, instance.horizon
    slack = sol.slacks[:n * K].reshape(n, K)
    storage = np.empty((n, K))
    p = sol.problem
    for r in range(n):
        for k in range(K):
            storage[r, k] = sol.slack(f"storage[{r + 1},{k + 1}]")
    mins = slack.min(axis=1)
    argmin = tuple(tuple((np.flatnonzero(slack[l] <= mins[l] + BINDING_TOL) + 1).tolist())
                   for l in range(n))
    assert p.row_names[0] == "mainline[1,1]"
    return BottleneckReport(mins, argmin, storage, sol.objective)


@dataclass(frozen=True)
class SweepPoint:
    delta: float
    status: Status
    objective: float | None
    clearance: int | None


@dataclass(frozen=True)
class SweepResult:
    target: str
    points: tuple[SweepPoint, ...]

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def at(self, delta: float) -> SweepPoint:
        for p in self.points:
            if np.isclose(p.delta, delta):
                return p
        raise KeyError(delta)

    def rows(self):
        for p in self.points:
            yield (p.delta, p.status.value,
                   p.objective if p.objective is not None else "",
                   p.clearance if p.clearance is not None else "")


def _evaluate(instance, demand, delta) -> SweepPoint:
    sol = solve(build_mp3(instance, demand))
    if not sol.optimal:
        return SweepPoint(float(delta), sol.status, None, None)
    plan = extract_plan(sol, instance)
    return SweepPoint(float(delta), sol.status, sol.objective,
                      clearance_time(plan, demand.on_horizon(instance.horizon).totals))


def _window(K: int, intervals) -> np.ndarray:
    mask = np.zeros(K, bool)
    if intervals is None:
        mask[:] = True
    else:
        lo, hi = intervals
        if not 1 <= lo <= hi <= K:
            raise ValueError(f"interval window {intervals} outside 1..{K}")
        mask[lo - 1:hi] = True
    return mask


def capacity_sweep(instance: FreewayInstance, demand: DemandProfile, segment: int,
                   deltas: Iterable[float], apply_to_all_k: bool = True,
                   intervals: tuple[int, int] | None = None,
                   absolute: bool = False) -> SweepResult:
    """Re-solve MP3 with segment ``segment`` (1-based) capacity shifted by
    each delta; with ``absolute`` the deltas are new capacity values.

    ``apply_to_all_k=False`` restricts the change to ``intervals``
    (inclusive, 1-based).
    """
    if not 1 <= segment <= instance.n_ramps:
        raise ValueError(f"no segment {segment}")
    mask = _window(instance.horizon, None if apply_to_all_k else intervals)
    points = []
    for delta in sorted(float(d) for d in deltas):
        caps = instance.segment_caps.copy()
        if absolute:
            caps[segment - 1, mask] = delta
        else:
            caps[segment - 1, mask] += delta
        if np.any(caps < 0):
            points.append(SweepPoint(delta, Status.INFEASIBLE, None, None))
            continue
        points.append(_evaluate(instance.with_segment_caps(caps), demand, delta))
    return SweepResult(f"segment {segment}", tuple(points))


def storage_sweep(instance: FreewayInstance, demand: DemandProfile,
                  ramps: Sequence[int], window: tuple[int, int],
                  deltas: float | Iterable[float]) -> SweepResult:
    """Same as :func:`capacity_sweep` for ramp storage ``s[r, k]`` of the
    given 1-based ramps over an inclusive interval window."""
    if np.isscalar(deltas):
        deltas = [deltas]
    mask = _window(instance.horizon, window)
    rows = np.asarray(list(ramps), int) - 1
    if rows.size == 0 or rows.min() < 0 or rows.max() >= instance.n_ramps:
        raise ValueError(f"bad ramp list {list(ramps)}")
    points = []
    for delta in sorted(float(d) for d in deltas):
        st = instance.storage.copy()
        st[np.ix_(rows, mask)] += delta
        if np.any(st < 0):
            points.append(SweepPoint(delta, Status.INFEASIBLE, None, None))
            continue
        points.append(_evaluate(instance.with_storage(st), demand, delta))
    return SweepResult(f"storage {list(ramps)} {window}", tuple(points))


PRIORITY_SCHEMES = ("uniform", "innermost_first", "outermost_first", "custom")


def priority_weights(n: int, scheme: str, custom=None) -> np.ndarray:
    """Per-ramp weights for a named scheme (ramp 1 nearest the exit).

    ``innermost_first`` favours upstream ramps with ``r**3``;
    ``outermost_first`` favours downstream ramps with ``(n+4-r)**3``.
    """
    r = np.arange(1, n + 1, dtype=float)
    if scheme == "uniform":
        return np.ones(n)
    if scheme == "innermost_first":
        return r ** 3
    if scheme == "outermost_first":
        return (n + 4 - r) ** 3
    if scheme == "custom":
        if custom is None:
            raise ValueError("custom scheme needs weights")
        w = np.asarray(custom, float)
        if np.any(w <= 0):
            raise NonpositiveWeight("weights must be positive")
        return w
    raise ValueError(f"unknown priority scheme {scheme!r}; choose from {PRIORITY_SCHEMES}")


def apply_priority_scheme(instance: FreewayInstance, scheme: str,
                          custom=None) -> FreewayInstance:
    return instance.with_weights(priority_weights(instance.n_ramps, scheme, custom))


def weight_range(instance: FreewayInstance, demand: DemandProfile, ramp: int,
                 interval: int) -> RangeReport:
    """Range of the weight ``w[ramp, interval]`` (1-based) keeping the MP3
    optimal basis, in weight units.

    The LP coefficient of ``f[r,k]`` is ``(K+1-k) * T * w[r,k]``; the
    coefficient range is divided by that factor.
    """
    sol = solve(build_mp3(instance, demand))
    sol._require_optimal()
    rep = range_objective_coefficient(sol, var_name(ramp - 1, interval - 1))
    factor = (instance.horizon + 1 - interval) * instance.interval
    return RangeReport(f"w[{ramp},{interval}]", "weight",
                       float(instance.weights[ramp - 1, interval - 1]),
                       rep.decrease / factor, rep.increase / factor,
                       rep.rate * factor, rep.degenerate)


def segment_dual_sum(instance: FreewayInstance, demand: DemandProfile,
                     segment: int) -> float:
    """Objective gain per unit capacity added to a segment in every interval."""
    sol = solve(build_mp3(instance, demand))
    sol._require_optimal()
    return float(sum(sol.dual(f"mainline[{segment},{k + 1}]")
                     for k in range(instance.horizon)))


def buffer_estimate(density_a: float, density_b: float, length: float,
                    lanes: float) -> float:
    """Vehicles that can be held on a segment by raising its density from
    ``density_a`` to ``density_b`` (veh/km/lane) over ``length`` km and
    ``lanes`` lanes."""
    if density_b < density_a:
        raise NegativeDelta("target density below current density")
    if density_a < 0 or length < 0 or lanes < 0:
        raise ValueError("densities, length and lanes must be nonnegative")
    return (density_b - density_a) * length * lanes


def completion_intervals(flows: np.ndarray, totals, tol: float = 1e-6) -> np.ndarray:
    """1-based interval at which each ramp finishes discharging."""
    cum = np.cumsum(flows, axis=1)
    done = cum >= np.asarray(totals)[:, None] - tol
    return np.where(np.asarray(totals) <= tol, 0, np.argmax(done, axis=1) + 1)
