"""Two-phase bounded revised simplex.

The problem is brought to the internal form

    min c'x   s.t.  A x = b,   lo <= x <= hi

by negating ``>=`` rows, scaling every row to unit max-norm, appending one
slack column per inequality row and one artificial column per row whose
starting residual cannot be carried by a slack. Free variables are kept as
such (nonbasic at zero). The basis is held as a sparse LU factorization plus
a product-form eta file, rebuilt every ``refactor_every`` pivots.

Pricing is Dantzig's largest reduced cost; after ``stall_threshold``
consecutive degenerate pivots the solver switches to Bland's smallest-index
rule until the objective strictly improves again.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .problem import (LpError, LpProblem, LpSolution, NumericalBreakdown, Relation,
                      Sense, Status)

TOL_FEAS = 1e-9
TOL_OPT = 1e-9
TOL_GAP = 1e-7
PIVOT_TOL = 1e-9


@dataclass
class SolverOptions:
    tol_feas: float = TOL_FEAS
    tol_opt: float = TOL_OPT
    pivot_tol: float = PIVOT_TOL
    refactor_every: int = 80
    stall_threshold: int = 60
    max_iter: int = 10_000_000
    crash: bool = True


class _Factor:
    """LU of the basis matrix with a product-form update file."""

    def __init__(self, A: sp.csc_matrix, basis: np.ndarray):
        B = A[:, basis].tocsc()
        try:
            self.lu = splu(B, permc_spec="COLAMD")
        except RuntimeError as exc:  # exactly singular
            raise NumericalBreakdown(f"singular basis: {exc}") from exc
        self.etas: list[tuple[int, np.ndarray, np.ndarray, float]] = []

    def ftran(self, v: np.ndarray) -> np.ndarray:
        w = self.lu.solve(v)
        for p, idx, vals, piv in self.etas:
            wp = w[p] / piv
            if wp != 0.0:
                w[idx] -= vals * wp
            w[p] = wp
        return w

    def btran(self, v: np.ndarray) -> np.ndarray:
        w = v.copy()
        for p, idx, vals, piv in reversed(self.etas):
            w[p] = (w[p] - np.dot(vals, w[idx])) / piv
        return self.lu.solve(w, trans="T")

    def update(self, p: int, alpha: np.ndarray) -> None:
        idx = np.flatnonzero(alpha)
        idx = idx[idx != p]
        self.etas.append((p, idx, alpha[idx].copy(), float(alpha[p])))


class StandardForm:
    """Internal equality form of an :class:`LpProblem`; kept for ranging."""

    def __init__(self, problem: LpProblem):
        c, A, relations, b, lo, hi = problem.arrays()
        m, n = A.shape
        self.m, self.n = m, n
        self.sense_sign = -1.0 if problem.sense is Sense.MAX else 1.0
        row_sign = np.array([-1.0 if r is Relation.GE else 1.0
                             for r in relations])
        absmax = (abs(A).max(axis=1).toarray().ravel() if n and m
                  else np.zeros(m))
        scale = np.where(absmax > 0, absmax, 1.0)
        self.row_sign = row_sign
        self.row_scale = scale
        factor = row_sign / scale
        A = sp.diags(factor) @ A
        b = b * factor
        self.is_eq = np.array([r is Relation.EQ for r in relations], bool)
        # zero rows: nothing to scale, keep as-is
        ineq = np.flatnonzero(~self.is_eq)
        slack = sp.csr_matrix((np.ones(ineq.size), (ineq, np.arange(ineq.size))),
                              shape=(m, ineq.size))
        self.slack_of_row = np.full(m, -1, dtype=np.int64)
        self.slack_of_row[ineq] = n + np.arange(ineq.size)
        self.A_core = sp.hstack([A, slack], format="csc")
        self.c_core = np.concatenate([self.sense_sign * c, np.zeros(ineq.size)])
        self.lo_core = np.concatenate([lo, np.zeros(ineq.size)])
        self.hi_core = np.concatenate([hi, np.full(ineq.size, np.inf)])
        self.b = b
        self.n_core = n + ineq.size


def _start_point(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
    return x


def _crash(std: StandardForm, x: np.ndarray, resid: np.ndarray,
           basis: np.ndarray) -> None:
    """Give rows without a feasible slack a structural basic column.

    Columns are accepted in an order that keeps the basis lower triangular:
    a column may not touch a row crashed earlier. The chosen value must lie
    within the column's bounds. Slack rows pushed negative by the move lose
    their slack (they get an artificial). Modifies ``x``, ``resid`` and
    ``basis`` in place; ``basis[i] == -1`` marks rows left to artificials.
    """
    A = std.A_core
    Ar = A.tocsr()
    lo, hi = std.lo_core, std.hi_core
    slack_row = std.slack_of_row
    col_nnz = np.diff(A.indptr)
    used = np.zeros(A.shape[1], bool)
    used[basis[basis >= 0]] = True
    crashed = np.zeros(std.m, bool)
    tol = 1e-12
    for sweep in range(2):
        progress = False
        for i in np.flatnonzero(basis < 0):
            start, end = Ar.indptr[i], Ar.indptr[i + 1]
            cols, vals = Ar.indices[start:end], Ar.data[start:end]
            order = np.argsort(col_nnz[cols], kind="stable")
            for j, a in zip(cols[order], vals[order]):
                if used[j] or lo[j] >= hi[j] or j >= std.n:
                    continue
                t = resid[i] / a
                new = x[j] + t
                if new < lo[j] - tol or new > hi[j] + tol:
                    continue
                rows = A.indices[A.indptr[j]:A.indptr[j + 1]]
                if np.any(crashed[rows]):
                    continue
                colv = A.data[A.indptr[j]:A.indptr[j + 1]]
                after = resid[rows] - colv * t
                lost = (basis[rows] >= 0) & (basis[rows] == slack_row[rows]) \
                    & (after < -tol) & (rows != i)
                if lost.sum() > (1 if sweep == 0 else 0):
                    continue
                resid[rows] = after
                resid[i] = 0.0
                x[j] = new
                used[j] = True
                for r in rows[lost]:
                    x[basis[r]] = 0.0
                    used[basis[r]] = False
                    basis[r] = -1
                basis[i] = j
                crashed[i] = True
                progress = True
                break
        if not progress:
            break
    # slack values follow the final residuals
    ok = (basis >= 0) & (basis == slack_row)
    x[slack_row[ok]] = resid[ok]


class _Simplex:
    def __init__(self, std: StandardForm, opts: SolverOptions):
        self.std = std
        self.opts = opts
        m = std.m
        x0 = _start_point(std.lo_core, std.hi_core)
        resid = std.b - std.A_core @ x0
        basis = np.full(m, -1, dtype=np.int64)
        s_rows = np.flatnonzero(std.slack_of_row >= 0)
        # a slack can start basic when it absorbs the residual at its bound
        ok = resid[s_rows] >= 0
        basis[s_rows[ok]] = std.slack_of_row[s_rows[ok]]
        x0[std.slack_of_row[s_rows[ok]]] = resid[s_rows[ok]]
        if opts.crash:
            _crash(std, x0, resid, basis)
        art_rows = np.flatnonzero(basis < 0)
        signs = np.where(resid[art_rows] >= 0, 1.0, -1.0)
        art = sp.csr_matrix((signs, (art_rows, np.arange(art_rows.size))),
                            shape=(m, art_rows.size))
        self.n_art = art_rows.size
        self.art_rows = art_rows
        self.A = sp.hstack([std.A_core, art], format="csc")
        self.AT = self.A.T.tocsr()
        self.N = self.A.shape[1]
        self.lo = np.concatenate([std.lo_core, np.zeros(self.n_art)])
        self.hi = np.concatenate([std.hi_core, np.full(self.n_art, np.inf)])
        self.x = np.concatenate([x0, np.abs(resid[art_rows])])
        basis[art_rows] = std.n_core + np.arange(self.n_art)
        self.basis = basis
        self.is_basic = np.zeros(self.N, bool)
        self.is_basic[basis] = True
        self.iterations = 0
        self._refactor()

    # -- linear algebra ---------------------------------------------------
    def _refactor(self) -> None:
        self.factor = _Factor(self.A, self.basis)
        xn = np.where(self.is_basic, 0.0, self.x)
        self.x[self.basis] = self.factor.ftran(self.std.b - self.A @ xn)
        self.since_refactor = 0

    def _column(self, j: int) -> np.ndarray:
        col = np.zeros(self.std.m)
        start, end = self.A.indptr[j], self.A.indptr[j + 1]
        col[self.A.indices[start:end]] = self.A.data[start:end]
        return col

    # -- main loop --------------------------------------------------------
    def run(self, c: np.ndarray) -> str:
        """Optimize ``c'x`` from the current basis; returns a status word."""
        opts = self.opts
        movable = self.lo < self.hi
        bland = False
        degenerate_run = 0
        while True:
            if self.iterations >= opts.max_iter:
                raise NumericalBreakdown("iteration limit reached")
            y = self.factor.btran(c[self.basis])
            d = c - self.AT @ y
            at_lo = self.x <= self.lo
            at_hi = self.x >= self.hi
            can_up = movable & ~self.is_basic & ~at_hi
            can_down = movable & ~self.is_basic & ~at_lo
            score = np.where(can_up & (d < -opts.tol_opt), -d, 0.0)
            score = np.where(can_down & (d > opts.tol_opt),
                             np.maximum(score, d), score)
            if bland:
                cand = np.flatnonzero(score > 0)
                if cand.size == 0:
                    return "optimal"
                q = int(cand[0])
            else:
                q = int(np.argmax(score))
                if score[q] <= 0:
                    return "optimal"
            direction = 1.0 if (d[q] < 0 and can_up[q]) else -1.0
            alpha = self.factor.ftran(self._column(q))
            step, p, bound_hit = self._ratio(alpha, direction, q, bland)
            if p == -2:
                return "unbounded"
            self.iterations += 1
            if step <= opts.tol_feas:
                degenerate_run += 1
                if degenerate_run >= opts.stall_threshold:
                    bland = True
            else:
                degenerate_run = 0
                bland = False
            delta = direction * step
            if p == -1:  # entering variable moves to its opposite bound
                self.x[self.basis] -= delta * alpha
                self.x[q] = self.hi[q] if direction > 0 else self.lo[q]
                continue
            self._pivot(q, p, alpha, delta, bound_hit)

    def _ratio(self, alpha, direction, q, bland):
        """Return (step, leaving position or -1 for a bound flip / -2, bound)."""
        opts = self.opts
        rate = -direction * alpha
        xb = self.x[self.basis]
        lob = self.lo[self.basis]
        hib = self.hi[self.basis]
        dec = rate < -opts.pivot_tol
        inc = rate > opts.pivot_tol
        ratio = np.full(alpha.size, np.inf)
        with np.errstate(invalid="ignore", divide="ignore"):
            r1 = (xb - lob) / -rate
            r2 = (hib - xb) / rate
        lim_dec = dec & np.isfinite(lob)
        lim_inc = inc & np.isfinite(hib)
        ratio[lim_dec] = r1[lim_dec]
        ratio[lim_inc] = r2[lim_inc]
        np.maximum(ratio, 0.0, out=ratio)
        flip = self.hi[q] - self.lo[q]
        tmin = ratio.min() if ratio.size else np.inf
        if not np.isfinite(tmin) and not np.isfinite(flip):
            return 0.0, -2, None
        if flip <= tmin:
            return float(flip), -1, None
        if bland:
            ties = np.flatnonzero(ratio <= tmin + 1e-12 * max(1.0, tmin))
            p = int(ties[np.argmin(self.basis[ties])])
        else:
            # Harris pass: allow a tolerance, then take the largest pivot
            with np.errstate(invalid="ignore", divide="ignore"):
                relaxed = np.full(alpha.size, np.inf)
                relaxed[lim_dec] = (xb[lim_dec] - lob[lim_dec] + opts.tol_feas) / -rate[lim_dec]
                relaxed[lim_inc] = (hib[lim_inc] - xb[lim_inc] + opts.tol_feas) / rate[lim_inc]
            tmax = relaxed.min()
            ties = np.flatnonzero(ratio <= tmax)
            p = int(ties[np.argmax(np.abs(alpha[ties]))])
        step = float(ratio[p])
        bound_hit = "lo" if rate[p] < 0 else "hi"
        return step, p, bound_hit

    def _pivot(self, q, p, alpha, delta, bound_hit):
        opts = self.opts
        if abs(alpha[p]) < opts.pivot_tol:
            raise NumericalBreakdown(f"pivot {alpha[p]:.3e} below tolerance")
        leaving = int(self.basis[p])
        self.x[self.basis] -= delta * alpha
        self.x[q] += delta
        self.x[leaving] = self.lo[leaving] if bound_hit == "lo" else self.hi[leaving]
        self.basis[p] = q
        self.is_basic[leaving] = False
        self.is_basic[q] = True
        self.factor.update(p, alpha)
        self.since_refactor += 1
        if self.since_refactor >= opts.refactor_every:
            self._refactor_checked(q, p)

    def _refactor_checked(self, q, p):
        self._refactor()
        # a tiny diagonal after refactoring means the basis is near singular
        alpha = self.factor.ftran(self._column(q))
        if abs(alpha[p]) < self.opts.pivot_tol:
            raise NumericalBreakdown("ill-conditioned basis after refactorization")

    def clamp(self) -> None:
        """Snap basic values within tolerance of a bound onto it."""
        tol = self.opts.tol_feas
        xb = self.x[self.basis]
        lob, hib = self.lo[self.basis], self.hi[self.basis]
        xb = np.where((xb < lob) & (xb > lob - tol), lob, xb)
        xb = np.where((xb > hib) & (xb < hib + tol), hib, xb)
        self.x[self.basis] = xb


# callables invoked with every finished LpSolution (audit hooks for tests)
SOLVE_LISTENERS: list = []


def _notify(solution: LpSolution) -> LpSolution:
    for fn in SOLVE_LISTENERS:
        fn(solution)
    return solution


def solve(problem: LpProblem, options: SolverOptions | None = None) -> LpSolution:
    """Solve ``problem`` with the two-phase bounded revised simplex.

    Returns an :class:`LpSolution` whose status is Optimal, Infeasible or
    Unbounded. Raises :class:`NumericalBreakdown` when the basis becomes too
    ill-conditioned to trust.
    """
    return _notify(_solve(problem, options))


def _solve(problem: LpProblem, options: SolverOptions | None) -> LpSolution:
    opts = options or SolverOptions()
    std = StandardForm(problem)
    if std.m == 0:
        return _solve_unconstrained(problem, std)
    sx = _Simplex(std, opts)
    if sx.n_art:
        c1 = np.zeros(sx.N)
        c1[std.n_core:] = 1.0
        sx.run(c1)
        sx.phase1_iterations = sx.iterations
        sx._refactor()
        sx.clamp()
        art = sx.x[std.n_core:]
        if art.sum() > opts.tol_feas * max(1.0, np.abs(std.b).max()):
            infeas = np.zeros(std.m)
            infeas[sx.art_rows] = art
            return LpSolution(problem, Status.INFEASIBLE, iterations=sx.iterations,
                              infeasibility=infeas)
        sx.hi[std.n_core:] = 0.0
        sx.x[std.n_core:] = np.minimum(sx.x[std.n_core:], 0.0)
    c2 = np.concatenate([std.c_core, np.zeros(sx.n_art)])
    word = sx.run(c2)
    if word == "unbounded":
        return LpSolution(problem, Status.UNBOUNDED, iterations=sx.iterations)
    sx._refactor()
    sx.clamp()
    return _package(problem, std, sx, c2)


def reoptimize(solution: LpSolution, problem: LpProblem,
               options: SolverOptions | None = None) -> LpSolution:
    """Phase two for ``problem`` starting from the optimal basis of ``solution``.

    ``problem`` must have the rows of ``solution.problem``; costs and bounds
    may differ as long as the previous optimum stays within the new bounds.
    Used for lexicographic refinements, where re-solving from scratch would
    repeat the whole feasibility search.
    """
    solution._require_optimal()
    old = solution.problem
    if (problem.num_rows != old.num_rows or problem.num_variables != old.num_variables
            or problem.relations != old.relations or problem.rhs != old.rhs):
        raise LpError("reoptimize needs the same constraint rows")
    st = solution._state
    std = StandardForm(problem)
    n = std.n
    x = st["x"].copy()
    lo = st["lo"].copy()
    hi = st["hi"].copy()
    lo[:n], hi[:n] = std.lo_core[:n], std.hi_core[:n]
    tol = (options or SolverOptions()).tol_feas
    if np.any(x[:n] < lo[:n] - tol) or np.any(x[:n] > hi[:n] + tol):
        raise LpError("previous optimum violates the new bounds")
    sx = _Simplex.__new__(_Simplex)
    sx.std, sx.opts = std, options or SolverOptions()
    sx.A, sx.AT = st["A"], st["AT"]
    sx.N = sx.A.shape[1]
    sx.n_art = sx.N - std.n_core
    sx.art_rows = np.zeros(0, np.int64)
    sx.lo, sx.hi, sx.x = lo, hi, np.clip(x, lo, hi)
    sx.basis = st["basis"].copy()
    sx.is_basic = np.zeros(sx.N, bool)
    sx.is_basic[sx.basis] = True
    sx.iterations = 0
    sx._refactor()
    c2 = np.concatenate([std.c_core, np.zeros(sx.n_art)])
    if sx.run(c2) == "unbounded":
        return LpSolution(problem, Status.UNBOUNDED, iterations=sx.iterations)
    sx._refactor()
    sx.clamp()
    return _notify(_package(problem, std, sx, c2))


def _solve_unconstrained(problem, std):
    c = std.c_core
    lo, hi = std.lo_core, std.hi_core
    if np.any((c < 0) & ~np.isfinite(hi)) or np.any((c > 0) & ~np.isfinite(lo)):
        return LpSolution(problem, Status.UNBOUNDED)
    x = np.where(c > 0, lo, np.where(c < 0, hi, _start_point(lo, hi)))
    rc = std.sense_sign * c
    return LpSolution(problem, Status.OPTIMAL, float(np.dot(problem.costs, x)),
                      x, np.zeros(0), rc, np.zeros(0), np.zeros(x.size, bool))


def _package(problem, std, sx, c):
    n = std.n
    y_int = sx.factor.btran(c[sx.basis])
    d_int = c - sx.AT @ y_int
    x = sx.x[:n].copy()
    duals = std.sense_sign * std.row_sign * y_int / std.row_scale
    rc = std.sense_sign * d_int[:n]
    rc[sx.is_basic[:n]] = 0.0
    A = problem.matrix()
    ax = A @ x
    b = np.asarray(problem.rhs, float)
    slacks = np.where(std.row_sign < 0, ax - b, b - ax)
    slacks[std.is_eq] = 0.0
    obj = float(np.dot(problem.costs, x))
    state = {"std": std, "basis": sx.basis.copy(), "x": sx.x.copy(),
             "A": sx.A, "AT": sx.AT, "lo": sx.lo.copy(), "hi": sx.hi.copy(),
             "d": d_int, "y": y_int}
    return LpSolution(problem, Status.OPTIMAL, obj, x, duals, rc, slacks,
                      sx.is_basic[:n].copy(), sx.iterations, None, state)
