"""Affinely adjustable robust counterpart of the MP3 metering model.

Each discharge is an affine function of the demand revealed so far,

    f[r,k] = eta0[r,k] + sum_{s, tau <= k} eta[r,k,s,tau] * d[s,tau],

and every MP3 constraint must hold for all demands in a polyhedral set
(per-cell boxes plus per-ramp caps on total demand). Each such semi-infinite
constraint ``a(eta) . d <= b(eta)  for all d`` is replaced by its LP dual:
nonnegative multipliers ``lam1`` (upper box rows), ``lam2`` (lower box rows)
and ``lam3`` (cap rows) with

    sum upper*lam1 - sum lower*lam2 + sum caps*lam3 <= b(eta)
    lam1[c] - lam2[c] + lam3[ramp(c)] = a_c(eta)          for every cell c

The seven constraint blocks are numbered as follows: 1 objective bound,
2 mainline capacity, 3 ramp capacity, 4 total service, 5 causality,
6 storage, 7 nonnegativity.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .demand import UncertaintySet
from .lp import LpProblem, LpSolution, Sense, solve
from .lp.simplex import reoptimize
from .model import DemandProfile, DischargePlan, FreewayInstance, WrongProblemShape

BLOCKS = {1: "objective", 2: "mainline", 3: "ramp", 4: "service",
          5: "causality", 6: "storage", 7: "nonnegativity"}


@dataclass(frozen=True, eq=False)
class AffinePolicy:
    """Intercepts ``(n, K)`` and sensitivities ``(n, K, n, Ka)``.

    ``sensitivities[r, k, s, tau]`` is only meaningful for ``tau <= k``;
    entries outside :attr:`support` are zero.
    """

    intercepts: np.ndarray
    sensitivities: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.intercepts, float)
        e = np.asarray(self.sensitivities, float)
        n, K = b.shape
        if e.shape[:2] != (n, K) or e.shape[2] != n:
            raise ValueError("sensitivities must have shape (n, K, n, Ka)")
        e = np.where(self.support_mask(n, K, e.shape[3]), e, 0.0)
        object.__setattr__(self, "intercepts", b)
        object.__setattr__(self, "sensitivities", e)

    @staticmethod
    def support_mask(n: int, K: int, Ka: int) -> np.ndarray:
        k = np.arange(K)[:, None]
        tau = np.arange(Ka)[None, :]
        return np.broadcast_to((tau <= k)[None, :, None, :], (n, K, n, Ka))

    @property
    def support(self) -> np.ndarray:
        n, K, _, Ka = self.sensitivities.shape
        return self.support_mask(n, K, Ka)

    @property
    def arrival_limit(self) -> int:
        return self.sensitivities.shape[3]

    @classmethod
    def constant(cls, flows: np.ndarray, arrival_limit: int) -> "AffinePolicy":
        flows = np.asarray(flows, float)
        n, K = flows.shape
        return cls(flows, np.zeros((n, K, n, arrival_limit)))


def realize_flows(policy: AffinePolicy, realized: DemandProfile,
                  clip: bool = False) -> np.ndarray:
    """Discharges produced by ``policy`` for a realized demand profile.

    Returns the raw ``(n, K)`` array; with ``clip`` negatives are set to 0.
    Only demand up to each interval enters that interval's decision.
    """
    Ka = policy.arrival_limit
    n, K = policy.intercepts.shape
    d = realized.arrivals
    if d.shape[0] != n or d.shape[1] < Ka:
        raise ValueError("realized demand does not match the policy dimensions")
    flows = policy.intercepts + np.einsum("rkst,st->rk", policy.sensitivities, d[:, :Ka])
    return np.maximum(flows, 0.0) if clip else flows


@dataclass(frozen=True)
class AarcModel:
    """A built robust counterpart plus the index maps needed to read it."""

    problem: LpProblem
    instance: FreewayInstance
    uset: UncertaintySet
    z: int
    eta0: np.ndarray        # (n, K) variable indices
    eta: np.ndarray         # (n, K, n, Ka) variable indices, -1 where absent
    block_rows: dict = field(default_factory=dict)

    @property
    def dimensions(self) -> tuple[int, int]:
        return self.problem.num_variables, self.problem.num_rows


@dataclass(frozen=True)
class RobustSolution:
    policy: AffinePolicy
    worst_case_objective: float
    solution: LpSolution
    dimensions: tuple[int, int]

    @property
    def z(self) -> float:
        return -self.worst_case_objective


class _Builder:
    def __init__(self, instance: FreewayInstance, uset: UncertaintySet,
                 diagonal: bool):
        self.inst = instance
        self.uset = uset
        n, K, Ka = instance.n_ramps, instance.horizon, uset.arrival_limit
        if uset.n_ramps != n:
            raise ValueError("uncertainty set and instance disagree on ramp count")
        if Ka > K:
            raise ValueError("uncertain arrivals extend past the horizon")
        self.n, self.K, self.Ka = n, K, Ka
        self.lp = LpProblem(Sense.MIN, "M-AARC1")
        self.z = self.lp.add_variable("z", 1.0, -np.inf, np.inf)
        self.eta0 = self.lp.add_variables(
            [f"eta0[{r + 1},{k + 1}]" for r in range(n) for k in range(K)],
            0.0, -np.inf, np.inf).reshape(n, K)
        self.eta = np.full((n, K, n, Ka), -1, dtype=np.int64)
        mask = AffinePolicy.support_mask(n, K, Ka).copy()
        if diagonal:
            mask &= np.eye(n, dtype=bool)[:, None, :, None]
        r_, k_, s_, t_ = np.nonzero(mask)
        names = [f"eta[{r + 1},{k + 1}|{s + 1},{t + 1}]"
                 for r, k, s, t in zip(r_, k_, s_, t_)]
        self.eta[r_, k_, s_, t_] = self.lp.add_variables(names, 0.0, -np.inf, np.inf)
        self.cell_ramp = np.repeat(np.arange(n), Ka)
        self.upper = uset.upper.ravel()
        self.lower = uset.lower.ravel()
        self.block_rows: dict[str, int] = {}

    def block(self, blk: int, label: str, mu: np.ndarray, g: np.ndarray,
              rhs: float, extra: tuple = ((), ())) -> None:
        """Add the dual of ``sum mu*f(d) + g.d <= rhs + extra  for all d``."""
        lp, n, Ka = self.lp, self.n, self.Ka
        nC = n * Ka
        tag = f"{blk}[{label}]"
        l1 = lp.add_variables([f"lam{blk}1[{label}|{c // Ka + 1},{c % Ka + 1}]"
                               for c in range(nC)])
        l2 = lp.add_variables([f"lam{blk}2[{label}|{c // Ka + 1},{c % Ka + 1}]"
                               for c in range(nC)])
        l3 = lp.add_variables([f"lam{blk}3[{label}|{s + 1}]" for s in range(n)])
        rk = np.nonzero(mu)
        idx = [l1, l2, l3, self.eta0[rk]]
        val = [self.upper, -self.lower, self.uset.caps, mu[rk]]
        if len(extra[0]):
            idx.append(np.asarray(extra[0]))
            val.append(-np.asarray(extra[1], float))
        row = lp.add_row(f"aarc{tag}", (np.concatenate(idx), np.concatenate(val)),
                         "<=", rhs)
        self.block_rows[tag] = row
        # coefficient of d_c in the constraint, as a function of eta
        sub = self.eta[rk]                       # (m, n, Ka)
        weights = mu[rk]
        for c in range(nC):
            s, t = divmod(c, Ka)
            ids = sub[:, s, t]
            keep = ids >= 0
            lp.add_row(f"aarc{tag}.cell[{s + 1},{t + 1}]",
                       (np.concatenate([[l1[c], l2[c], l3[s]], ids[keep]]),
                        np.concatenate([[1.0, -1.0, 1.0], -weights[keep]])),
                       "=", g[c])

    def build(self) -> AarcModel:
        inst, n, K, Ka = self.inst, self.n, self.K, self.Ka
        T = inst.interval
        nC = n * Ka
        zero_g = np.zeros(nC)
        remaining = (K + 1 - np.arange(1, K + 1)) * T
        # 1: weighted discharge objective bounded by -z
        self.block(1, "obj", -inst.weights * remaining, zero_g, 0.0,
                   ((self.z,), (1.0,)))
        for l in range(n):
            for k in range(K):
                mu = np.zeros((n, K))
                mu[l:, k] = 1.0
                self.block(2, f"{l + 1},{k + 1}", mu, zero_g, inst.segment_caps[l, k])
        for r in range(n):
            for k in range(K):
                mu = np.zeros((n, K))
                mu[r, k] = 1.0
                self.block(3, f"{r + 1},{k + 1}", mu, zero_g, inst.ramp_caps[r])
        for r in range(n):
            mu = np.zeros((n, K))
            mu[r, :] = -1.0
            g = (self.cell_ramp == r).astype(float)
            self.block(4, f"{r + 1}", mu, g, 0.0)
        taus = np.tile(np.arange(Ka), n)
        for r in range(n):
            for k in range(K):
                mu = np.zeros((n, K))
                mu[r, :k + 1] = 1.0
                seen = ((self.cell_ramp == r) & (taus <= k)).astype(float)
                self.block(5, f"{r + 1},{k + 1}", mu, -seen, 0.0)
                self.block(6, f"{r + 1},{k + 1}", -mu, seen, inst.storage[r, k])
        for r in range(n):
            for k in range(K):
                mu = np.zeros((n, K))
                mu[r, k] = -1.0
                self.block(7, f"{r + 1},{k + 1}", mu, zero_g, 0.0)
        return AarcModel(self.lp, inst, self.uset, self.z, self.eta0, self.eta,
                         self.block_rows)


def build_aarc(instance: FreewayInstance, uset: UncertaintySet,
               diagonal: bool = False) -> AarcModel:
    """Tractable robust counterpart of MP3 over ``uset``.

    With ``diagonal`` the policy only reacts to demand at its own ramp.
    """
    return _Builder(instance, uset, diagonal).build()


def extract_policy(solution: LpSolution, model: AarcModel) -> RobustSolution:
    """Read the affine policy and worst-case objective off a solved model."""
    solution._require_optimal()
    if solution.problem is not model.problem:
        n, K = model.eta0.shape
        if solution.problem.num_variables != model.problem.num_variables:
            raise WrongProblemShape("solution does not belong to this AARC model")
    x = solution.x
    intercepts = x[model.eta0]
    sens = np.where(model.eta >= 0, x[np.maximum(model.eta, 0)], 0.0)
    policy = AffinePolicy(intercepts, sens)
    return RobustSolution(policy, -float(x[model.z]), solution, model.dimensions)


REFINE_TOL = 1e-7


def refine_nominal(model: AarcModel, solution: LpSolution,
                   nominal: np.ndarray | None = None) -> RobustSolution:
    """Among policies with the optimal worst case, pick one that does best
    on the nominal demand.

    The robust LP usually has many optimal policies; the one simplex lands
    on only protects the worst case. This second stage keeps ``z`` within
    ``REFINE_TOL`` (relative) of its optimum and maximizes the weighted
    discharge objective at ``nominal`` (default: the box centres), starting
    from the first-stage basis.
    """
    solution._require_optimal()
    inst = model.instance
    K = inst.horizon
    dbar = model.uset.nominal if nominal is None else np.asarray(nominal, float)
    W = inst.weights * (K + 1 - np.arange(1, K + 1)) * inst.interval
    costs = np.zeros(model.problem.num_variables)
    costs[model.eta0] -= W
    valid = model.eta >= 0
    contrib = W[:, :, None, None] * dbar[None, None, :, :]
    np.subtract.at(costs, model.eta[valid], contrib[valid])
    z_star = float(solution.x[model.z])
    stage2 = model.problem.copy()
    stage2.costs = costs.tolist()
    stage2.set_bounds(model.z, -np.inf, z_star + REFINE_TOL * (1.0 + abs(z_star)))
    sol2 = reoptimize(solution, stage2)
    sol2._require_optimal()
    return extract_policy(sol2, replace(model, problem=stage2))


def solve_aarc(instance: FreewayInstance, uset: UncertaintySet,
               diagonal: bool = False, refine: bool = False) -> RobustSolution | None:
    """Build, solve and extract; ``None`` when the counterpart is infeasible.

    With ``refine`` the policy is chosen by :func:`refine_nominal`.
    """
    model = build_aarc(instance, uset, diagonal)
    sol = solve(model.problem)
    if not sol.optimal:
        return None
    if refine:
        return refine_nominal(model, sol)
    return extract_policy(sol, model)


def policy_plan(policy: AffinePolicy, realized: DemandProfile) -> DischargePlan:
    return DischargePlan(realize_flows(policy, realized, clip=True))
