"""Reference freeway: five ramps, fixed capacities and storage.

These are the settings used throughout the demos and the acceptance suite.
"""
from __future__ import annotations

import numpy as np

from .demand import (MobilizationCurve, UncertaintySet, box_uncertainty,
                     fixed_rate_profile, s_curve_profile)
from .model import DemandProfile, FreewayInstance

RAMP_CAPS = (4.0, 5.0, 3.0, 4.0, 3.0)
SEGMENT_CAPS = (14.0, 14.0, 16.0, 10.0, 10.0)
STORAGE = (9.0, 8.0, 10.0, 8.0, 6.0)
ARRIVAL_RATES = (4.0, 3.0, 4.0, 4.0, 3.0)

S_CURVE_TOTALS = (30.0, 35.0, 40.0, 35.0, 30.0)
S_CURVE_HALF_TIME = 5.0

ROBUST_DEMAND_CAPS = (19.0, 18.5, 18.0, 21.0, 20.0)


def reference_freeway(horizon: int = 20, arrival_limit: int = 10,
                      weights=1.0) -> FreewayInstance:
    return FreewayInstance.create(RAMP_CAPS, SEGMENT_CAPS, STORAGE, horizon,
                                  arrival_limit, weights=weights)


def ordinary_demand(horizon: int = 20, arrival_limit: int = 10,
                    rates=ARRIVAL_RATES) -> DemandProfile:
    return fixed_rate_profile(rates, arrival_limit, horizon)


def s_curve_demand(rate: float, horizon: int = 20, arrival_limit: int = 14,
                   totals=S_CURVE_TOTALS,
                   half_time: float = S_CURVE_HALF_TIME) -> DemandProfile:
    return s_curve_profile(totals, MobilizationCurve(rate, half_time),
                           arrival_limit, horizon)


def robust_freeway(horizon: int = 10, arrival_limit: int = 5) -> FreewayInstance:
    return reference_freeway(horizon, arrival_limit)


def robust_set(nominal_rate: float, theta: float, horizon: int = 10,
               arrival_limit: int = 5, caps=ROBUST_DEMAND_CAPS) -> UncertaintySet:
    """Boxes ``nominal_rate * (1 -/+ theta)`` on every ramp and arrival
    interval, with per-ramp totals capped by ``caps``."""
    nominal = fixed_rate_profile(np.full(len(caps), nominal_rate), arrival_limit, horizon)
    return box_uncertainty(nominal, theta, caps, arrival_limit)
