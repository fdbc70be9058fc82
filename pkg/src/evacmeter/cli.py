"""Command-line front end.

    evacmeter solve --scenario ordinary.yaml --out results/
    evacmeter sensitivity --scenario ordinary.yaml --target segment --index 1 \\
        --deltas -0.2,-0.1,0.1,0.5,1
    evacmeter sensitivity buffer 20 40 2 3
    evacmeter robust --scenario robust.yaml
    evacmeter simulate --scenario table8.yaml --seed 7
    evacmeter generate-scenario ordinary scenario.yaml

Exit codes: 0 optimal, 1 usage or input error, 2 infeasible, 3 unbounded.
``EVACMETER_SEED`` and ``EVACMETER_THREADS`` override the scenario's seed and
the worker count; explicit flags override both.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import presets
from .demand import EmptySet, SamplingExhausted
from .evaluation import compare
from .lp import Status
from .model import clearance_time, solve_mp3
from .robust import solve_aarc
from .scenario import Scenario, ScenarioError
from .sensitivity import (NegativeDelta, bottleneck_report, buffer_estimate,
                          capacity_sweep, storage_sweep, weight_range)

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_UNBOUNDED = 0, 1, 2, 3
STATUS_EXIT = {Status.OPTIMAL: EXIT_OK, Status.INFEASIBLE: EXIT_INFEASIBLE,
               Status.UNBOUNDED: EXIT_UNBOUNDED}
DEFAULT_SEED = 2024


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _seed(args, sc: Scenario | None) -> int:
    if args.seed is not None:
        return args.seed
    if os.environ.get("EVACMETER_SEED"):
        return int(os.environ["EVACMETER_SEED"])
    if sc is not None and "seed" in sc.run:
        return int(sc.run["seed"])
    return DEFAULT_SEED


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    return max(1, int(os.environ.get("EVACMETER_THREADS", "1")))


def _scenario(args) -> Scenario:
    if not args.scenario:
        raise UsageError("--scenario is required for this command")
    return Scenario.load(args.scenario)


def _out(args, sc: Scenario, key: str, default: str) -> Path:
    name = sc.run.get("outputs", {}).get(key, default)
    return Path(args.out or ".") / name


# -- commands -------------------------------------------------------------------

def cmd_solve(args) -> int:
    sc = _scenario(args)
    inst, demand = sc.instance(), sc.demand()
    res = solve_mp3(inst, demand)
    print(f"status {res.status.value}")
    if not res.solution.optimal:
        return STATUS_EXIT[res.status]
    n, K = inst.n_ramps, inst.horizon
    flows = res.plan.flows
    print(f"objective {res.objective:.10g}")
    print(f"clearance {res.clearance}")
    print("\ndischarge plan (rows: interval, columns: ramp)")
    print("k    " + " ".join(f"{'r' + str(r + 1):>7}" for r in range(n)))
    for k in range(res.clearance or K):
        print(f"{k + 1:<4} " + " ".join(f"{flows[r, k]:7.3f}" for r in range(n)))
    rep = bottleneck_report(inst, demand)
    print("\nsegment  min slack  at intervals")
    for l in range(n):
        mark = "  bottleneck" if rep.binding[l] else ""
        ks = ",".join(str(k) for k in rep.argmin[l][:6])
        print(f"{l + 1:<8} {rep.min_slack[l]:9.4g}  {ks}{mark}")

    plan_path = _out(args, sc, "plan", "plan.csv")
    write_csv(plan_path, ["interval"] + [f"ramp_{r + 1}" for r in range(n)],
              ([k + 1] + [float(flows[r, k]) for r in range(n)] for k in range(K)))
    cum = res.plan.cumulative()
    cum_path = _out(args, sc, "cumulative", "cumulative.csv")
    write_csv(cum_path, ["interval"] + [f"ramp_{r + 1}" for r in range(n)] + ["total"],
              ([k + 1] + [float(cum[r, k]) for r in range(n)] + [float(cum[:, k].sum())]
               for k in range(K)))
    print(f"\nwrote {plan_path} and {cum_path}")
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    if args.action == "buffer":
        if len(args.values) != 4:
            raise UsageError("buffer needs DENSITY_A DENSITY_B LENGTH LANES")
        a, b, length, lanes = args.values
        print(f"{buffer_estimate(a, b, length, lanes):.10g}")
        return EXIT_OK
    if args.action is not None:
        raise UsageError(f"unknown sensitivity action {args.action!r}")
    sc = _scenario(args)
    spec = dict(sc.run.get("sensitivity", {}))
    for key in ("target", "index", "deltas", "intervals", "absolute"):
        v = getattr(args, key)
        if v not in (None, False):
            spec[key] = v
    target = spec.get("target")
    if target is None:
        raise UsageError("no sensitivity target (use --target or run.sensitivity)")
    inst, demand = sc.instance(), sc.demand()
    deltas = spec.get("deltas", [0.0])
    window = tuple(spec["intervals"]) if spec.get("intervals") else None
    if target == "segment":
        seg = spec.get("index", spec.get("segment"))
        if seg is None:
            raise UsageError("segment sweep needs --index")
        result = capacity_sweep(inst, demand, int(seg), deltas,
                                apply_to_all_k=window is None, intervals=window,
                                absolute=bool(spec.get("absolute")))
    elif target == "storage":
        ramps = spec.get("ramps") or ([int(spec["index"])] if spec.get("index") else None)
        if not ramps or window is None:
            raise UsageError("storage sweep needs ramps and an interval window")
        result = storage_sweep(inst, demand, ramps, window, deltas)
    elif target == "weight":
        ramp = int(spec.get("index", spec.get("ramp", 0)))
        k = int(spec.get("interval", 1))
        rep = weight_range(inst, demand, ramp, k)
        print(f"weight w[{ramp},{k}] = {rep.value:.10g}: allowable decrease "
              f"{rep.decrease:.10g}, increase {rep.increase:.10g}"
              + (" (degenerate basis, range is conservative)" if rep.degenerate else ""))
        return EXIT_OK
    else:
        raise UsageError(f"unknown sensitivity target {target!r}")
    print(f"sweep on {result.target}")
    print("delta      status      objective   clearance")
    for d, st, obj, clr in result.rows():
        print(f"{d:<10.4g} {st:<11} {fmt(obj):<11} {clr}")
    path = _out(args, sc, "sweep", "sweep.csv")
    write_csv(path, ["delta", "status", "objective", "clearance"], result.rows())
    print(f"wrote {path}")
    return EXIT_OK


def _robust_cell(payload):
    sc_data, nominal, theta, diagonal = payload
    sc = Scenario.from_dict(sc_data)
    inst = sc.instance()
    t0 = time.perf_counter()
    try:
        uset = sc.uncertainty(nominal, theta)
    except EmptySet:
        return [nominal, theta, "EmptySet", "", "", "", "", 0.0]
    res = solve_aarc(inst, uset, diagonal=diagonal)
    dt = time.perf_counter() - t0
    if res is None:
        return [nominal, theta, "Infeasible", "", "", "", "", dt]
    nv, nr = res.dimensions
    return [nominal, theta, "Optimal", res.worst_case_objective, nv, nr,
            res.solution.iterations, dt]


def cmd_robust(args) -> int:
    sc = _scenario(args)
    spec = sc.run.get("robust", {})
    dem = sc.data["demand"]
    nominals = args.nominals or spec.get("nominals") or [dem.get("nominal")]
    thetas = args.thetas or spec.get("thetas") or [dem.get("theta", 0.0)]
    if any(np.ndim(v) for v in nominals):
        raise UsageError("robust grids take scalar nominal rates")
    sc.uncertainty()  # validates the demand block up front
    cells = [(sc.data, float(nd), float(th), bool(spec.get("diagonal", False)))
             for nd in nominals for th in thetas]
    threads = _threads(args)
    if threads > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_robust_cell, cells))
    else:
        rows = [_robust_cell(c) for c in cells]
    header = ["nominal", "theta", "status", "worst_case_objective", "variables",
              "rows", "iterations", "seconds"]
    print("nominal \\ theta " + " ".join(f"{t:>8.3g}" for t in thetas))
    by = {(r[0], r[1]): r for r in rows}
    for nd in nominals:
        cells_txt = []
        for th in thetas:
            r = by[(float(nd), float(th))]
            cells_txt.append(f"{r[3]:8.2f}" if r[2] == "Optimal" else f"{r[2][:8]:>8}")
        print(f"{float(nd):<15.4g} " + " ".join(cells_txt))
    sizes = {(r[4], r[5]) for r in rows if r[2] == "Optimal"}
    for nv, nr in sorted(sizes):
        print(f"model size: {nv} variables, {nr} constraints")
    path = _out(args, sc, "grid", "robust_grid.csv")
    write_csv(path, header, rows)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    spec = sc.run.get("simulate", {})
    seed = _seed(args, sc)
    dem = sc.data["demand"]
    if dem["kind"] != "uncertainty" or np.ndim(dem["nominal"]):
        raise UsageError("simulate needs an uncertainty demand block with a scalar nominal")
    penalty = float(sc.run.get("penalty", 0.0))
    thetas = args.thetas or spec.get("thetas") or [dem.get("theta", 0.0)]
    n_eval = args.n_eval or spec.get("n_eval", 1000)
    n_train = args.n_train or spec.get("n_train", 50)
    report = compare(sc.instance(), float(dem["nominal"]), dem["caps"], sc.beta(),
                     penalty, thetas, seed, n_train=n_train, n_eval=n_eval,
                     mean_of_plans=spec.get("ssp_plan", "mean_of_plans") == "mean_of_plans",
                     refine=spec.get("refine", True))
    print(f"seed {seed}")
    print("theta   method       Obj       Avg        sd     Worst")
    for r in report.rows:
        print(f"{r.theta:<7.3g} {r.method:<6} {r.objective:9.2f} {r.average:9.2f} "
              f"{r.sd:9.3f} {r.worst:9.2f}")
    path = _out(args, sc, "comparison", "comparison.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.to_csv(), encoding="utf-8")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_generate(args) -> int:
    try:
        data = presets.PRESETS[args.preset]()
    except KeyError:
        raise UsageError(f"unknown preset {args.preset!r}; choose from "
                         f"{', '.join(sorted(presets.PRESETS))}") from None
    sc = Scenario.from_dict(data)
    text = sc.dump()
    if args.path in (None, "-"):
        sys.stdout.write(text)
    else:
        path = Path(args.out or ".") / args.path if args.out else Path(args.path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--scenario", metavar="PATH")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)

    p = _Parser(prog="evacmeter", description="Evacuation ramp-metering planner.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    s = sub.add_parser("solve", parents=[common], help="solve the deterministic model")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("sensitivity", parents=[common],
                       help="capacity/storage sweeps, weight ranges, buffer sizing")
    s.add_argument("action", nargs="?", choices=["buffer"])
    s.add_argument("values", nargs="*", type=float)
    s.add_argument("--target", choices=["segment", "storage", "weight"])
    s.add_argument("--index", type=int, help="segment or ramp number (1-based)")
    s.add_argument("--deltas", type=_floats)
    s.add_argument("--intervals", type=lambda t: [int(v) for v in _floats(t)])
    s.add_argument("--absolute", action="store_true",
                   help="treat deltas as new capacity values")
    s.set_defaults(func=cmd_sensitivity)

    s = sub.add_parser("robust", parents=[common], help="robust counterpart grid")
    s.add_argument("--nominals", type=_floats)
    s.add_argument("--thetas", type=_floats)
    s.set_defaults(func=cmd_robust)

    s = sub.add_parser("simulate", parents=[common], help="robust vs sampling baseline")
    s.add_argument("--thetas", type=_floats)
    s.add_argument("--n-train", type=int)
    s.add_argument("--n-eval", type=int)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("generate-scenario", parents=[common], help="write a preset scenario")
    s.add_argument("preset", help=", ".join(sorted(presets.PRESETS)))
    s.add_argument("path", nargs="?")
    s.set_defaults(func=cmd_generate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ScenarioError, NegativeDelta, OSError) as exc:
        print(f"evacmeter: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EmptySet, SamplingExhausted) as exc:
        print(f"evacmeter: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
