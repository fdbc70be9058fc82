"""Linear program container and solution records."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
import scipy.sparse as sp


class Sense(enum.Enum):
    MIN = "min"
    MAX = "max"


class Relation(enum.Enum):
    LE = "<="
    EQ = "="
    GE = ">="

    @classmethod
    def parse(cls, value: "Relation | str") -> "Relation":
        if isinstance(value, Relation):
            return value
        aliases = {"<=": cls.LE, "=<": cls.LE, "=": cls.EQ, "==": cls.EQ,
                   ">=": cls.GE, "=>": cls.GE}
        try:
            return aliases[value]
        except KeyError:
            raise ValueError(f"unknown relation {value!r}") from None


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


class LpError(Exception):
    """Base class for solver errors."""


class NumericalBreakdown(LpError):
    """A pivot became too small even after refactorizing the basis."""


class NotOptimal(LpError):
    """Raised when an operation needs an optimal solution."""


class LpProblem:
    """An LP in row form, built incrementally.

    Variables and rows carry unique names. Rows take coefficients either as a
    mapping ``{variable name or index: value}`` or as a pair of parallel
    ``(indices, values)`` sequences, which is much faster for large models.

    Examples
    --------
    >>> lp = LpProblem(Sense.MAX)
    >>> x = lp.add_variable("x", cost=3.0)
    >>> y = lp.add_variable("y", cost=5.0)
    >>> lp.add_row("c1", {"x": 1.0}, "<=", 4.0)
    0
    """

    def __init__(self, sense: Sense | str = Sense.MIN, name: str = "lp"):
        self.sense = Sense(sense) if not isinstance(sense, Sense) else sense
        self.name = name
        self.var_names: list[str] = []
        self.costs: list[float] = []
        self.lower: list[float] = []
        self.upper: list[float] = []
        self._var_index: dict[str, int] = {}
        self.row_names: list[str] = []
        self.relations: list[Relation] = []
        self.rhs: list[float] = []
        self._row_index: dict[str, int] = {}
        self._rows_i: list[np.ndarray] = []
        self._rows_v: list[np.ndarray] = []

    # -- construction -----------------------------------------------------
    @property
    def num_variables(self) -> int:
        return len(self.var_names)

    @property
    def num_rows(self) -> int:
        return len(self.row_names)

    def add_variable(self, name: str, cost: float = 0.0, lower: float = 0.0,
                     upper: float = math.inf) -> int:
        if name in self._var_index:
            raise ValueError(f"duplicate variable name {name!r}")
        cost, lower, upper = float(cost), float(lower), float(upper)
        if not math.isfinite(cost):
            raise ValueError(f"cost of {name!r} must be finite")
        if lower > upper or lower == math.inf or upper == -math.inf:
            raise ValueError(f"bad bounds [{lower}, {upper}] for {name!r}")
        idx = len(self.var_names)
        self._var_index[name] = idx
        self.var_names.append(name)
        self.costs.append(cost)
        self.lower.append(lower)
        self.upper.append(upper)
        return idx

    def add_variables(self, names: Sequence[str], costs=0.0, lower=0.0,
                      upper=math.inf) -> np.ndarray:
        """Vectorized :meth:`add_variable`; returns the new indices."""
        k = len(names)
        costs = np.broadcast_to(np.asarray(costs, float), (k,))
        lower = np.broadcast_to(np.asarray(lower, float), (k,))
        upper = np.broadcast_to(np.asarray(upper, float), (k,))
        return np.array([self.add_variable(n, c, lo, up)
                         for n, c, lo, up in zip(names, costs, lower, upper)],
                        dtype=np.int64)

    def variable_index(self, name: str | int) -> int:
        if isinstance(name, (int, np.integer)):
            if not 0 <= name < self.num_variables:
                raise KeyError(f"variable index {name} out of range")
            return int(name)
        try:
            return self._var_index[name]
        except KeyError:
            raise KeyError(f"unknown variable {name!r}") from None

    def row_index(self, name: str | int) -> int:
        if isinstance(name, (int, np.integer)):
            if not 0 <= name < self.num_rows:
                raise KeyError(f"row index {name} out of range")
            return int(name)
        try:
            return self._row_index[name]
        except KeyError:
            raise KeyError(f"unknown row {name!r}") from None

    def add_row(self, name: str, coeffs: Mapping[Any, float] | tuple,
                relation: Relation | str, rhs: float) -> int:
        if name in self._row_index:
            raise ValueError(f"duplicate row name {name!r}")
        rhs = float(rhs)
        if not math.isfinite(rhs):
            raise ValueError(f"rhs of row {name!r} must be finite")
        if isinstance(coeffs, tuple):
            idx = np.asarray(coeffs[0], dtype=np.int64)
            val = np.asarray(coeffs[1], dtype=float)
            if idx.size and (idx.min() < 0 or idx.max() >= self.num_variables):
                raise KeyError(f"row {name!r} references an undeclared variable")
        else:
            idx = np.fromiter((self.variable_index(k) for k in coeffs),
                              dtype=np.int64, count=len(coeffs))
            val = np.fromiter(coeffs.values(), dtype=float, count=len(coeffs))
        if not np.all(np.isfinite(val)):
            raise ValueError(f"row {name!r} has non-finite coefficients")
        if idx.size != np.unique(idx).size:
            # merge repeated references
            uniq, inv = np.unique(idx, return_inverse=True)
            val = np.bincount(inv, weights=val, minlength=uniq.size)
            idx = uniq
        keep = val != 0.0
        r = len(self.row_names)
        self._row_index[name] = r
        self.row_names.append(name)
        self.relations.append(Relation.parse(relation))
        self.rhs.append(rhs)
        self._rows_i.append(idx[keep])
        self._rows_v.append(val[keep])
        return r

    def set_cost(self, var: str | int, cost: float) -> None:
        self.costs[self.variable_index(var)] = float(cost)

    def set_bounds(self, var: str | int, lower: float, upper: float) -> None:
        lower, upper = float(lower), float(upper)
        if lower > upper or lower == math.inf or upper == -math.inf:
            raise ValueError(f"bad bounds [{lower}, {upper}]")
        j = self.variable_index(var)
        self.lower[j], self.upper[j] = lower, upper

    def set_rhs(self, row: str | int, rhs: float) -> None:
        self.rhs[self.row_index(row)] = float(rhs)

    def row(self, name: str | int) -> dict[str, float]:
        r = self.row_index(name)
        return {self.var_names[i]: float(v)
                for i, v in zip(self._rows_i[r], self._rows_v[r])}

    def copy(self) -> "LpProblem":
        new = LpProblem(self.sense, self.name)
        for attr in ("var_names", "costs", "lower", "upper", "row_names",
                     "relations", "rhs", "_rows_i", "_rows_v"):
            setattr(new, attr, list(getattr(self, attr)))
        new._var_index = dict(self._var_index)
        new._row_index = dict(self._row_index)
        return new

    # -- array views ------------------------------------------------------
    def matrix(self) -> sp.csr_matrix:
        """Constraint matrix as CSR (rows x variables)."""
        m, n = self.num_rows, self.num_variables
        if m == 0:
            return sp.csr_matrix((0, n))
        lengths = np.array([a.size for a in self._rows_i], dtype=np.int64)
        indptr = np.concatenate([[0], np.cumsum(lengths)])
        indices = (np.concatenate(self._rows_i) if lengths.sum()
                   else np.zeros(0, dtype=np.int64))
        data = (np.concatenate(self._rows_v) if lengths.sum()
                else np.zeros(0))
        A = sp.csr_matrix((data, indices, indptr), shape=(m, n))
        A.sort_indices()
        return A

    def arrays(self):
        """Return ``(c, A, relations, b, lower, upper)`` as numpy objects."""
        return (np.array(self.costs, float), self.matrix(), list(self.relations),
                np.array(self.rhs, float), np.array(self.lower, float),
                np.array(self.upper, float))

    def objective_value(self, x: np.ndarray) -> float:
        return float(np.dot(self.costs, x))

    def __repr__(self) -> str:
        return (f"LpProblem({self.name!r}, {self.sense.value}, "
                f"{self.num_variables} vars, {self.num_rows} rows)")


@dataclass(frozen=True)
class LpSolution:
    """Result of :func:`evacmeter.lp.solve`.

    ``duals`` are rates of change of the optimal objective per unit increase
    of each row's right-hand side, in the problem's own sense.
    ``reduced_costs`` are the rates per unit increase of each variable away
    from its current (nonbasic) value; zero for basic variables.
    """

    problem: LpProblem
    status: Status
    objective: float = math.nan
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    slacks: np.ndarray | None = None
    basic: np.ndarray | None = None
    iterations: int = 0
    infeasibility: np.ndarray | None = None
    _state: Any = field(default=None, repr=False, compare=False)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    def value(self, var: str | int) -> float:
        self._require_optimal()
        return float(self.x[self.problem.variable_index(var)])

    def dual(self, row: str | int) -> float:
        self._require_optimal()
        return float(self.duals[self.problem.row_index(row)])

    def slack(self, row: str | int) -> float:
        self._require_optimal()
        return float(self.slacks[self.problem.row_index(row)])

    def dual_objective(self) -> float:
        """Dual bound ``b'y + sum_j d_j x_j`` over variables held at a bound."""
        self._require_optimal()
        b = np.asarray(self.problem.rhs, float)
        rc = np.where(self.basic, 0.0, self.reduced_costs)
        return float(b @ self.duals + rc @ self.x)

    def duality_gap(self) -> float:
        return abs(self.objective - self.dual_objective())

    def _require_optimal(self) -> None:
        if self.status is not Status.OPTIMAL:
            raise NotOptimal(f"solution status is {self.status.value}")


@dataclass(frozen=True)
class RangeReport:
    """Basis-preserving range for one objective coefficient or one RHS."""

    target: str
    kind: str  # "cost" or "rhs"
    value: float
    decrease: float
    increase: float
    rate: float
    degenerate: bool = False

    @property
    def lower(self) -> float:
        return self.value - self.decrease

    @property
    def upper(self) -> float:
        return self.value + self.increase

    def contains(self, v: float) -> bool:
        return self.lower <= v <= self.upper
