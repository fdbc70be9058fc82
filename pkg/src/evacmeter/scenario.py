"""YAML scenario files: one freeway, one demand description, run options.

A scenario looks like::

    instance:
      ramp_caps: [4, 5, 3, 4, 3]
      segment_caps: [14, 14, 16, 10, 10]   # per segment, or one row per segment
      storage: [9, 8, 10, 8, 6]
      horizon: 20
      arrival_limit: 10
      weights: {scheme: uniform}
    demand:
      kind: fixed_rate
      rates: [4, 3, 4, 4, 3]
    run:
      seed: 2024

``demand.kind`` is ``fixed_rate``, ``s_curve`` (``totals``, ``rate``,
``half_time``) or ``uncertainty`` (``nominal``, ``theta``, ``caps``,
``beta``). Unknown keys are errors.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any

import jsonschema
import numpy as np
import yaml

from .demand import (BetaShape, MobilizationCurve, UncertaintySet, box_uncertainty,
                     fixed_rate_profile, s_curve_profile)
from .model import DemandProfile, FreewayInstance
from .sensitivity import PRIORITY_SCHEMES, priority_weights


class ScenarioError(ValueError):
    """Malformed scenario; the message names the key path and line."""


_num = {"type": "number"}
_vec = {"type": "array", "items": _num, "minItems": 1}
_vec_or_grid = {"oneOf": [_num, _vec, {"type": "array", "items": _vec, "minItems": 1}]}
_grid = {"type": "array", "items": _num, "minItems": 1}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SCHEMA = _obj({
    "name": {"type": "string"},
    "instance": _obj({
        "ramp_caps": _vec,
        "segment_caps": _vec_or_grid,
        "storage": _vec_or_grid,
        "horizon": {"type": "integer", "minimum": 1},
        "arrival_limit": {"type": "integer", "minimum": 1},
        "interval": {"type": "number", "exclusiveMinimum": 0},
        "weights": _obj({
            "scheme": {"enum": list(PRIORITY_SCHEMES)},
            "values": _vec_or_grid,
        }, ["scheme"]),
    }, ["ramp_caps", "segment_caps", "storage", "horizon"]),
    "demand": {"oneOf": [
        _obj({"kind": {"const": "fixed_rate"}, "rates": _vec}, ["kind", "rates"]),
        _obj({"kind": {"const": "s_curve"}, "totals": _vec,
              "rate": {"type": "number", "exclusiveMinimum": 0},
              "half_time": _num}, ["kind", "totals", "rate", "half_time"]),
        _obj({"kind": {"const": "uncertainty"},
              "nominal": {"oneOf": [_num, _vec]},
              "theta": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
              "caps": _vec,
              "beta": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
             ["kind", "nominal", "caps"]),
        _obj({"kind": {"const": "arrivals"}, "arrivals": {"type": "array", "items": _vec}},
             ["kind", "arrivals"]),
    ]},
    "run": _obj({
        "seed": {"type": "integer"},
        "penalty": {"type": "number", "maximum": 0},
        "sensitivity": _obj({
            "target": {"enum": ["segment", "storage", "weight", "rhs"]},
            "segment": {"type": "integer", "minimum": 1},
            "ramps": {"type": "array", "items": {"type": "integer", "minimum": 1}},
            "ramp": {"type": "integer", "minimum": 1},
            "interval": {"type": "integer", "minimum": 1},
            "intervals": {"type": "array", "items": {"type": "integer"},
                          "minItems": 2, "maxItems": 2},
            "deltas": _grid,
            "absolute": {"type": "boolean"},
        }, ["target"]),
        "robust": _obj({
            "nominals": _grid,
            "thetas": _grid,
            "diagonal": {"type": "boolean"},
        }),
        "simulate": _obj({
            "thetas": _grid,
            "n_train": {"type": "integer", "minimum": 1},
            "n_eval": {"type": "integer", "minimum": 1},
            "ssp_plan": {"enum": ["mean_of_plans", "plan_of_mean_demand"]},
            "refine": {"type": "boolean"},
        }),
        "outputs": _obj({k: {"type": "string"} for k in
                         ("plan", "cumulative", "sweep", "grid", "comparison")}),
    }),
}, ["instance", "demand"])


def _plain(node: yaml.Node, path: tuple, marks: dict) -> Any:
    """Convert a composed YAML node to Python, recording each path's line."""
    marks[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = yaml.safe_load(yaml.serialize(k)) if not isinstance(k, yaml.ScalarNode) \
                else k.value
            if key in out:
                raise ScenarioError(f"line {k.start_mark.line + 1}: duplicate key {key!r}")
            out[key] = _plain(v, path + (key,), marks)
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_plain(v, path + (i,), marks) for i, v in enumerate(node.value)]
    return yaml.safe_load(yaml.serialize(node))


def _locate(path, marks) -> str:
    path = tuple(path)
    dotted = ".".join(str(p) for p in path) or "<top>"
    while path and path not in marks:
        path = path[:-1]
    return f"{dotted} (line {marks.get(path, 1)})"


def _best_error(err: jsonschema.ValidationError) -> jsonschema.ValidationError:
    # for oneOf failures on demand, report against the branch the kind selects
    if err.context:
        deepest = max(err.context, key=lambda e: (len(e.absolute_path), e.validator != "const"))
        if deepest.validator != "const":
            return _best_error(deepest)
    return err


@dataclass(eq=False)
class Scenario:
    data: dict
    source: str = "<memory>"
    marks: dict = field(default_factory=dict, repr=False)

    def __eq__(self, other):
        return isinstance(other, Scenario) and self.data == other.data

    # -- construction ---------------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict, source="<memory>", marks=None) -> "Scenario":
        marks = marks or {}
        validator = jsonschema.Draft202012Validator(SCHEMA)
        errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
        if errors:
            e = _best_error(errors[0])
            path = list(e.absolute_path)
            if e.validator == "additionalProperties":
                # point at the first offending key rather than its parent
                known = e.schema.get("properties", {})
                path += [next(k for k in e.instance if k not in known)]
            raise ScenarioError(f"{source}: {_locate(path, marks)}: {e.message}")
        sc = cls(copy.deepcopy(data), source, marks)
        sc._check_lengths()
        return sc

    @classmethod
    def parse(cls, text: str, source: str = "<string>") -> "Scenario":
        try:
            node = yaml.compose(text, Loader=yaml.SafeLoader)
        except yaml.YAMLError as exc:
            raise ScenarioError(f"{source}: {exc}") from None
        if node is None:
            raise ScenarioError(f"{source}: empty scenario")
        marks: dict = {}
        return cls.from_dict(_plain(node, (), marks), source, marks)

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh.read(), str(path))

    def dump(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=False, default_flow_style=None)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dump())

    def _fail(self, path, msg):
        raise ScenarioError(f"{self.source}: {_locate(path, self.marks)}: {msg}")

    def _check_lengths(self):
        inst = self.data["instance"]
        n = len(inst["ramp_caps"])
        K = inst["horizon"]
        for key in ("segment_caps", "storage"):
            v = inst[key]
            if isinstance(v, list):
                if len(v) != n:
                    self._fail(("instance", key), f"expected {n} entries, got {len(v)}")
                for i, row in enumerate(v):
                    if isinstance(row, list) and len(row) != K:
                        self._fail(("instance", key, i), f"expected {K} intervals")
        Ka = inst.get("arrival_limit", K)
        if Ka > K:
            self._fail(("instance", "arrival_limit"), "exceeds horizon")
        dem = self.data["demand"]
        for key in ("rates", "totals", "caps", "arrivals"):
            if key in dem and len(dem[key]) != n:
                self._fail(("demand", key), f"expected {n} ramps, got {len(dem[key])}")
        if isinstance(dem.get("nominal"), list) and len(dem["nominal"]) != n:
            self._fail(("demand", "nominal"), f"expected {n} ramps")
        w = inst.get("weights")
        if w and w["scheme"] == "custom" and "values" not in w:
            self._fail(("instance", "weights"), "custom scheme needs values")

    # -- domain objects -------------------------------------------------------
    @property
    def run(self) -> dict:
        return self.data.get("run", {})

    def instance(self) -> FreewayInstance:
        inst = self.data["instance"]
        n = len(inst["ramp_caps"])
        w = inst.get("weights", {"scheme": "uniform"})
        if w["scheme"] == "custom" and np.ndim(w["values"]) == 2:
            weights = w["values"]
        else:
            weights = priority_weights(n, w["scheme"], w.get("values"))
        try:
            return FreewayInstance.create(inst["ramp_caps"], inst["segment_caps"],
                                          inst["storage"], inst["horizon"],
                                          inst.get("arrival_limit"), weights,
                                          inst.get("interval", 1.0))
        except ValueError as exc:
            self._fail(("instance",), str(exc))

    @property
    def demand_kind(self) -> str:
        return self.data["demand"]["kind"]

    def demand(self) -> DemandProfile:
        """The deterministic demand (the nominal profile for ``uncertainty``)."""
        inst = self.data["instance"]
        K = inst["horizon"]
        Ka = inst.get("arrival_limit", K)
        dem = self.data["demand"]
        kind = dem["kind"]
        if kind == "fixed_rate":
            return fixed_rate_profile(dem["rates"], Ka, K)
        if kind == "s_curve":
            return s_curve_profile(dem["totals"], MobilizationCurve(dem["rate"],
                                                                    dem["half_time"]), Ka, K)
        if kind == "arrivals":
            return DemandProfile(np.asarray(dem["arrivals"], float)).on_horizon(K)
        n = len(inst["ramp_caps"])
        arr = np.zeros((n, K))
        arr[:, :Ka] = np.broadcast_to(np.asarray(dem["nominal"], float).reshape(-1, 1)
                                      if np.ndim(dem["nominal"]) else dem["nominal"], (n, Ka))
        return DemandProfile(arr)

    def uncertainty(self, nominal=None, theta=None) -> UncertaintySet:
        dem = self.data["demand"]
        if dem["kind"] != "uncertainty":
            self._fail(("demand", "kind"), "this command needs an uncertainty demand block")
        inst = self.data["instance"]
        K = inst["horizon"]
        Ka = inst.get("arrival_limit", K)
        n = len(inst["ramp_caps"])
        nom = dem["nominal"] if nominal is None else nominal
        arr = np.zeros((n, Ka))
        arr[:] = np.asarray(nom, float).reshape(-1, 1) if np.ndim(nom) else nom
        th = dem.get("theta", 0.0) if theta is None else theta
        return box_uncertainty(arr, th, dem["caps"], Ka)

    def beta(self) -> BetaShape:
        a, b = self.data["demand"].get("beta", [1.0, 1.0])
        return BetaShape(a, b)
