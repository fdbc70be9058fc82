"""Self-contained LP engine: problem container, revised simplex, ranging."""
from .problem import (LpError, LpProblem, LpSolution, NotOptimal,
                      NumericalBreakdown, RangeReport, Relation, Sense, Status)
from .simplex import SolverOptions, solve

__all__ = [
    "LpError", "LpProblem", "LpSolution", "NotOptimal", "NumericalBreakdown",
    "RangeReport", "Relation", "Sense", "SolverOptions", "Status", "solve",
]
