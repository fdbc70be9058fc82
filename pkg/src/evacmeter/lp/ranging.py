"""Basis-preserving sensitivity ranges for objective coefficients and RHS."""
from __future__ import annotations

import math

import numpy as np

from .problem import LpSolution, RangeReport
from .simplex import TOL_FEAS, TOL_OPT, _Factor


def _factor(solution: LpSolution) -> _Factor:
    st = solution._state
    fac = st.get("factor")
    if fac is None:
        fac = _Factor(st["A"], st["basis"])
        st["factor"] = fac
    return fac


def _is_degenerate(st) -> bool:
    basis = st["basis"]
    xb, lo, hi = st["x"][basis], st["lo"][basis], st["hi"][basis]
    primal = np.any(np.isclose(xb, lo, atol=TOL_FEAS, rtol=0)
                    | np.isclose(xb, hi, atol=TOL_FEAS, rtol=0))
    nonbasic = np.ones(st["x"].size, bool)
    nonbasic[basis] = False
    movable = st["lo"] < st["hi"]
    dual = np.any(nonbasic & movable & (np.abs(st["d"]) <= TOL_OPT))
    return bool(primal or dual)


def _step_limits(rate: np.ndarray, room_up: np.ndarray, room_down: np.ndarray):
    """Largest t>=0 with -room_down <= t*rate <= room_up (and for -t)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.where(rate > 0, room_up / rate,
                      np.where(rate < 0, room_down / -rate, np.inf))
        down = np.where(rate > 0, room_down / rate,
                        np.where(rate < 0, room_up / -rate, np.inf))
    up = np.where(np.isnan(up), np.inf, up)
    down = np.where(np.isnan(down), np.inf, down)
    return (float(up.min()) if up.size else math.inf,
            float(down.min()) if down.size else math.inf)


def range_objective_coefficient(solution: LpSolution, variable) -> RangeReport:
    """Interval of the cost of ``variable`` over which the basis stays optimal."""
    solution._require_optimal()
    problem = solution.problem
    j = problem.variable_index(variable)
    st = solution._state
    std = st["std"]
    sign = std.sense_sign
    d = st["d"]
    x, lo, hi = st["x"], st["lo"], st["hi"]
    basis = st["basis"]
    nonbasic = np.ones(x.size, bool)
    nonbasic[basis] = False
    movable = lo < hi
    if nonbasic[j]:
        # only the variable's own reduced cost moves: d_j + delta
        dec_int = up_int = math.inf
        if not movable[j]:
            pass
        elif x[j] <= lo[j]:
            dec_int = max(d[j], 0.0)
        elif x[j] >= hi[j]:
            up_int = max(-d[j], 0.0)
        else:  # free at zero
            dec_int = up_int = 0.0
    else:
        p = int(np.flatnonzero(basis == j)[0])
        e = np.zeros(std.m)
        e[p] = 1.0
        rho = _factor(solution).btran(e)
        alpha = st["AT"] @ rho
        # d_k(delta) = d_k - delta * alpha_k for nonbasic k
        nb = nonbasic & movable
        at_lo = nb & (x <= lo)
        at_hi = nb & (x >= hi)
        free = nb & ~at_lo & ~at_hi
        up_int = dec_int = math.inf
        # at lower: need d_k - delta*alpha_k >= 0
        a, dk = alpha[at_lo], np.maximum(d[at_lo], 0.0)
        pos, neg = a > TOL_FEAS, a < -TOL_FEAS
        if pos.any():
            up_int = min(up_int, float((dk[pos] / a[pos]).min()))
        if neg.any():
            dec_int = min(dec_int, float((dk[neg] / -a[neg]).min()))
        # at upper: need d_k - delta*alpha_k <= 0
        a, dk = alpha[at_hi], np.minimum(d[at_hi], 0.0)
        pos, neg = a > TOL_FEAS, a < -TOL_FEAS
        if neg.any():
            up_int = min(up_int, float((dk[neg] / a[neg]).min()))
        if pos.any():
            dec_int = min(dec_int, float((-dk[pos] / a[pos]).min()))
        if np.any(np.abs(alpha[free]) > TOL_FEAS):
            up_int = dec_int = 0.0
    if sign > 0:
        dec, inc = dec_int, up_int
    else:
        dec, inc = up_int, dec_int
    value = problem.costs[j]
    return RangeReport(problem.var_names[j], "cost", value, dec, inc,
                       float(solution.x[j]), _is_degenerate(st))


def range_rhs(solution: LpSolution, row) -> RangeReport:
    """Interval of the RHS of ``row`` over which the basis stays feasible.

    Inside the interval the optimal objective is affine in the RHS with
    slope equal to the row's dual value.
    """
    solution._require_optimal()
    problem = solution.problem
    i = problem.row_index(row)
    st = solution._state
    std = st["std"]
    basis = st["basis"]
    e = np.zeros(std.m)
    e[i] = 1.0
    beta = _factor(solution).ftran(e)
    xb, lo, hi = st["x"][basis], st["lo"][basis], st["hi"][basis]
    room_up = np.maximum(hi - xb, 0.0)
    room_down = np.maximum(xb - lo, 0.0)
    # internal rhs += t  ->  x_B += t * beta
    t_up, t_down = _step_limits(beta, room_up, room_down)
    factor = std.row_scale[i] * std.row_sign[i]
    if factor > 0:
        inc, dec = t_up * factor, t_down * factor
    else:
        inc, dec = t_down * -factor, t_up * -factor
    return RangeReport(problem.row_names[i], "rhs", problem.rhs[i], dec, inc,
                       float(solution.duals[i]), _is_degenerate(st))
