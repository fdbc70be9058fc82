"""Plain-text dump of an :class:`LpProblem` in the CPLEX LP layout
(``Maximize``/``Minimize``, ``Subject To``, ``Bounds``, ``End``).

Meant for eyeballing and for feeding the same model to another solver.
Numbers are written with 17 significant digits so :func:`read_lp`
reproduces the problem exactly.
"""
from __future__ import annotations

import math
from typing import TextIO

import numpy as np

from .problem import LpError, LpProblem, Relation, Sense

TERMS_PER_LINE = 6
_REL = {Relation.LE: "<=", Relation.EQ: "=", Relation.GE: ">="}


def _num(v: float) -> str:
    return f"{v:.17g}"


def _terms(pairs) -> list[str]:
    out = []
    for name, v in pairs:
        sign = "-" if v < 0 else "+"
        out.append(f"{sign} {_num(abs(v))} {name}")
    return out


def _wrap(head: str, terms: list[str], tail: str = "") -> list[str]:
    if not terms:
        terms = ["0"]
    lines = []
    for i in range(0, len(terms), TERMS_PER_LINE):
        chunk = " ".join(terms[i:i + TERMS_PER_LINE])
        lines.append((f" {head} " if i == 0 else "   ") + chunk)
    lines[-1] += tail
    return lines


def _bound(name: str, lo: float, hi: float) -> str:
    if lo == -math.inf and hi == math.inf:
        return f" {name} free"
    if hi == math.inf:
        return f" {name} >= {_num(lo)}"
    lo_s = "-inf" if lo == -math.inf else _num(lo)
    return f" {lo_s} <= {name} <= {_num(hi)}"


def format_lp(problem: LpProblem) -> str:
    names = problem.var_names
    lines = [f"\\ {problem.name}",
             "Maximize" if problem.sense is Sense.MAX else "Minimize"]
    obj = [(names[j], c) for j, c in enumerate(problem.costs) if c != 0]
    lines += _wrap("obj:", _terms(obj))
    lines.append("Subject To")
    A = problem.matrix()
    for i, rname in enumerate(problem.row_names):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        pairs = [(names[j], v) for j, v in zip(A.indices[lo:hi], A.data[lo:hi])]
        rel = _REL[problem.relations[i]]
        lines += _wrap(f"{rname}:", _terms(pairs), f" {rel} {_num(problem.rhs[i])}")
    lines.append("Bounds")
    for j, name in enumerate(names):
        lines.append(_bound(name, problem.lower[j], problem.upper[j]))
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_lp(problem: LpProblem, stream: TextIO) -> None:
    stream.write(format_lp(problem))


def _parse_terms(tokens: list[str]):
    """Consume ``[+|-] coef name`` triples; returns (pairs, rest)."""
    pairs = []
    i = 0
    while i < len(tokens) and tokens[i] not in ("<=", ">=", "="):
        sign = 1.0
        if tokens[i] in "+-":
            sign = -1.0 if tokens[i] == "-" else 1.0
            i += 1
        tok = tokens[i]
        try:
            coef = float(tok)
            i += 1
            name = tokens[i] if i < len(tokens) and tokens[i] not in ("<=", ">=", "=") else None
        except ValueError:
            coef, name = 1.0, tok
        if name is None:
            if coef != 0:
                raise LpError("constant terms are not supported")
        else:
            pairs.append((name, sign * coef))
            i += 1
    return pairs, tokens[i:]


def parse_lp(text: str) -> LpProblem:
    sections: dict[str, list[str]] = {}
    current = None
    sense = None
    name = "lp"
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("\\"):
            if sense is None:
                name = line[1:].strip() or name
            continue
        key = line.lower()
        if key in ("maximize", "minimize"):
            sense = Sense.MAX if key == "maximize" else Sense.MIN
            current = "obj"
        elif key in ("subject to", "st", "s.t."):
            current = "rows"
        elif key == "bounds":
            current = "bounds"
        elif key == "end":
            break
        elif current is None:
            raise LpError(f"text before the objective section: {line!r}")
        else:
            sections.setdefault(current, []).append(line)
    if sense is None:
        raise LpError("missing Maximize/Minimize section")

    def statements(lines):
        out = []
        for line in lines:
            tok = line.split()
            if tok[0].endswith(":") or not out:
                out.append(tok)
            else:
                out[-1].extend(tok)
        return out

    # variables are declared in the bounds section, in order
    bounds = []
    for line in sections.get("bounds", []):
        tok = line.split()
        if len(tok) == 2 and tok[1] == "free":
            bounds.append((tok[0], -math.inf, math.inf))
        elif len(tok) == 3 and tok[1] == ">=":
            bounds.append((tok[0], float(tok[2]), math.inf))
        elif len(tok) == 5 and tok[1] == tok[3] == "<=":
            bounds.append((tok[2], float(tok[0]), float(tok[4])))
        else:
            raise LpError(f"unreadable bound line {line!r}")

    lp = LpProblem(sense, name)
    costs = {}
    for st in statements(sections.get("obj", [])):
        pairs, rest = _parse_terms(st[1:] if st[0].endswith(":") else st)
        if rest:
            raise LpError("objective may not carry a relation")
        for v, c in pairs:
            costs[v] = costs.get(v, 0.0) + c
    declared = {b[0] for b in bounds}
    for v in costs:
        if v not in declared:
            bounds.append((v, 0.0, math.inf))
    if bounds:
        lp.add_variables([b[0] for b in bounds], np.array([costs.get(b[0], 0.0) for b in bounds]),
                         np.array([b[1] for b in bounds]), np.array([b[2] for b in bounds]))
    for st in statements(sections.get("rows", [])):
        if not st[0].endswith(":"):
            raise LpError(f"unnamed row {' '.join(st)!r}")
        pairs, rest = _parse_terms(st[1:])
        if len(rest) != 2:
            raise LpError(f"row {st[0][:-1]} lacks 'relation rhs'")
        coeffs: dict = {}
        for v, c in pairs:
            if v not in lp._var_index:
                lp.add_variable(v, 0.0)
            coeffs[v] = coeffs.get(v, 0.0) + c
        lp.add_row(st[0][:-1], coeffs, rest[0], float(rest[1]))
    return lp


def read_lp(stream: TextIO) -> LpProblem:
    return parse_lp(stream.read())
