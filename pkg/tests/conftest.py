"""Shared fixtures and the duality-gap audit.

Every optimal solve made in this process is re-checked from the problem
data alone: duals are taken from the solver, but reduced costs, the dual
bound and the sign conditions are recomputed here.
"""
from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from evacmeter.lp import Relation, Sense  # noqa: E402
from evacmeter.lp.simplex import SOLVE_LISTENERS  # noqa: E402

GAP_TOL = 1e-7


@dataclass
class GapAudit:
    solves: int = 0
    worst_gap: float = 0.0
    worst_sign: float = 0.0
    failures: list = field(default_factory=list)

    def __call__(self, sol):
        if not sol.optimal:
            return
        p = sol.problem
        c, A, rel, b, lo, hi = p.arrays()
        y = np.asarray(sol.duals, float)
        x = np.asarray(sol.x, float)
        d = c - A.T @ y
        sgn = 1.0 if p.sense is Sense.MAX else -1.0
        # sign conditions of a maximization, flipped for minimization
        le = np.array([r is Relation.LE for r in rel], bool)
        ge = np.array([r is Relation.GE for r in rel], bool)
        sign = 0.0
        if le.any():
            sign = max(sign, float(np.max(-sgn * y[le], initial=0.0)))
        if ge.any():
            sign = max(sign, float(np.max(sgn * y[ge], initial=0.0)))
        tol = 1e-9 * (1.0 + np.abs(x))
        at_lo = x <= lo + tol
        at_hi = x >= hi - tol
        between = ~(at_lo | at_hi)
        sign = max(sign, float(np.max(np.abs(d[between]), initial=0.0)))
        only_lo = at_lo & ~at_hi
        only_hi = at_hi & ~at_lo
        sign = max(sign, float(np.max(sgn * d[only_lo], initial=0.0)))
        sign = max(sign, float(np.max(-sgn * d[only_hi], initial=0.0)))
        primal = float(c @ x)
        bound = float(b @ y + d @ x)
        scale = 1.0 + abs(primal)
        gap = abs(primal - bound) / scale
        self.solves += 1
        self.worst_gap = max(self.worst_gap, gap)
        self.worst_sign = max(self.worst_sign, sign / scale)
        if gap > GAP_TOL or sign / scale > GAP_TOL:
            self.failures.append((p.name, gap, sign / scale))


AUDIT = GapAudit()
# criterion number -> one-line verdict, filled by test_acceptance
ACCEPTANCE: dict[int, str] = {}


@pytest.fixture(scope="session", autouse=True)
def gap_audit():
    SOLVE_LISTENERS.append(AUDIT)
    yield AUDIT
    SOLVE_LISTENERS.remove(AUDIT)


def pytest_terminal_summary(terminalreporter):
    tr = terminalreporter
    if ACCEPTANCE:
        tr.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            tr.write_line(ACCEPTANCE[n])
    tr.section("duality-gap audit")
    tr.write_line(f"optimal solves checked: {AUDIT.solves}")
    tr.write_line(f"worst relative gap: {AUDIT.worst_gap:.3g}; "
                  f"worst dual sign violation: {AUDIT.worst_sign:.3g}")
    tr.write_line(f"solves over {GAP_TOL:g}: {len(AUDIT.failures)}")
