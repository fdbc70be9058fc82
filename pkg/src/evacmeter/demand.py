"""Arrival profiles, demand uncertainty sets and demand sampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DemandProfile

MAX_REJECTIONS = 10_000


class EmptySet(ValueError):
    """The box lower bounds already exceed a ramp's cumulative cap."""


class SamplingExhausted(RuntimeError):
    """Rejection sampling hit its attempt cap (cumulative caps too tight)."""


@dataclass(frozen=True)
class MobilizationCurve:
    """Logistic share of evacuees arrived by time ``t``:
    ``1 / (1 + exp(-rate * (t - half_time)))``."""

    rate: float          # response rate LR, 1/interval
    half_time: float     # HF, intervals

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("response rate must be positive")

    def __call__(self, t):
        return 1.0 / (1.0 + np.exp(-self.rate * (np.asarray(t, float) - self.half_time)))


def s_curve_profile(totals, curve: MobilizationCurve, arrival_limit: int,
                    horizon: int | None = None) -> DemandProfile:
    """Per-interval arrivals from a mobilization curve.

    Interval 1 receives everything arrived by time 0, interval ``k`` the
    increase between times ``k-2`` and ``k-1``, and the last arrival interval
    the remainder, so every ramp's row sums to its total.
    """
    Ka = int(arrival_limit)
    if Ka < 3:
        raise ValueError("arrival_limit must be at least 3")
    totals = np.asarray(totals, dtype=float).ravel()
    K = Ka if horizon is None else int(horizon)
    if K < Ka:
        raise ValueError("horizon shorter than arrival_limit")
    g = curve(np.arange(0, Ka - 1))          # gamma(0) .. gamma(Ka-2)
    share = np.empty(Ka)
    share[0] = g[0]
    share[1:Ka - 1] = np.diff(g)
    # remainder form keeps the row sum exact
    share[Ka - 1] = 1.0 - g[-1]
    arrivals = np.zeros((totals.size, K))
    arrivals[:, :Ka] = totals[:, None] * share[None, :]
    arrivals[:, Ka - 1] = totals - arrivals[:, :Ka - 1].sum(axis=1)
    return DemandProfile(np.maximum(arrivals, 0.0))


def fixed_rate_profile(rates, arrival_limit: int, horizon: int | None = None) -> DemandProfile:
    """Constant arrivals ``rates[r]`` in intervals ``1..arrival_limit``."""
    rates = np.asarray(rates, dtype=float).ravel()
    if np.any(rates < 0):
        raise ValueError("rates must be nonnegative")
    Ka = int(arrival_limit)
    K = Ka if horizon is None else int(horizon)
    if Ka < 1 or K < Ka:
        raise ValueError("need 1 <= arrival_limit <= horizon")
    arrivals = np.zeros((rates.size, K))
    arrivals[:, :Ka] = rates[:, None]
    return DemandProfile(arrivals)


@dataclass(frozen=True, eq=False)
class UncertaintySet:
    """Per-cell boxes plus per-ramp caps on total arrivals.

    ``lower``/``upper`` have shape ``(n, Ka)`` and cover the arrival
    intervals only; demand after ``Ka`` is zero.
    """

    lower: np.ndarray
    upper: np.ndarray
    caps: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float)
        up = np.array(self.upper, dtype=float)
        caps = np.array(self.caps, dtype=float).ravel()
        if lo.shape != up.shape or lo.ndim != 2 or caps.size != lo.shape[0]:
            raise ValueError("inconsistent uncertainty set dimensions")
        if np.any(lo < 0) or np.any(up < lo):
            raise ValueError("need 0 <= lower <= upper")
        short = lo.sum(axis=1) > caps + 1e-12
        if np.any(short):
            bad = (np.flatnonzero(short) + 1).tolist()
            raise EmptySet(f"lower bounds exceed the cumulative cap on ramps {bad}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        object.__setattr__(self, "caps", caps)

    @property
    def n_ramps(self) -> int:
        return self.lower.shape[0]

    @property
    def arrival_limit(self) -> int:
        return self.lower.shape[1]

    @property
    def nominal(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, demand: DemandProfile, tol: float = 1e-9) -> bool:
        a = demand.arrivals
        Ka = self.arrival_limit
        if a.shape[0] != self.n_ramps or a.shape[1] < Ka:
            return False
        box = a[:, :Ka]
        return bool(np.all(box >= self.lower - tol) and np.all(box <= self.upper + tol)
                    and np.all(a[:, Ka:] <= tol)
                    and np.all(a.sum(axis=1) <= self.caps + tol))


def box_uncertainty(nominal: DemandProfile | np.ndarray, theta: float, caps,
                    arrival_limit: int | None = None) -> UncertaintySet:
    """Boxes ``nominal * (1 -/+ theta)`` joined with per-ramp total caps."""
    if not 0 <= theta < 1:
        raise ValueError("theta must lie in [0, 1)")
    arr = nominal.arrivals if isinstance(nominal, DemandProfile) else np.asarray(nominal, float)
    if arrival_limit is None:
        nz = np.flatnonzero(arr.sum(axis=0) > 0)
        arrival_limit = int(nz[-1]) + 1 if nz.size else arr.shape[1]
    arr = arr[:, :arrival_limit]
    return UncertaintySet(arr * (1 - theta), arr * (1 + theta), caps)


@dataclass(frozen=True)
class BetaShape:
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("beta shape parameters must be positive")


def sample_demand(uset: UncertaintySet, shape: BetaShape, seed,
                  horizon: int | None = None) -> DemandProfile:
    """Draw one realization: each cell ``lower + (upper-lower) * Beta``.

    Realizations breaking any ramp's cumulative cap are discarded whole and
    redrawn. ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    rng = np.random.default_rng(seed)
    lo, span = uset.lower, uset.upper - uset.lower
    K = uset.arrival_limit if horizon is None else int(horizon)
    for _ in range(MAX_REJECTIONS):
        draw = lo + span * rng.beta(shape.alpha, shape.beta, size=lo.shape)
        if np.all(draw.sum(axis=1) <= uset.caps):
            arrivals = np.zeros((uset.n_ramps, K))
            arrivals[:, :uset.arrival_limit] = draw
            profile = DemandProfile(arrivals)
            assert uset.contains(profile)
            return profile
    raise SamplingExhausted(
        f"no realization within the caps after {MAX_REJECTIONS} draws")


def sample_many(uset: UncertaintySet, shape: BetaShape, n: int, base_seed: int,
                horizon: int | None = None) -> list[DemandProfile]:
    """``n`` independent draws, draw ``i`` seeded with ``base_seed + i``."""
    return [sample_demand(uset, shape, base_seed + i, horizon) for i in range(n)]


def max_interval_demand(profile: DemandProfile) -> float:
    return float(profile.arrivals.max()) if profile.arrivals.size else 0.0


__all__ = [
    "BetaShape", "EmptySet", "MobilizationCurve", "SamplingExhausted",
    "UncertaintySet", "box_uncertainty", "fixed_rate_profile",
    "max_interval_demand", "s_curve_profile", "sample_demand", "sample_many",
]
