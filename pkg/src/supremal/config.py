"""Experiment plans read from YAML.

Grammar (every key except ``scenarios`` and ``grids`` has a default)::

    format_version: "1"
    output_dir: results            # SUPREMAL_OUTPUT_DIR overrides it at run time
    confidence_level: 0.99
    bound_kinds: [ExpAbs, ChernoffAbs, PolyAbs]
    grids:
      n: [20, 50]                  # strictly increasing positive integers
      x: [0.1, 0.3]                # strictly increasing positive reals
    simulation:
      replications: 10000
      seed: 1
      horizon_factor: 50           # N = horizon_factor * n
      epsilon: 0.5
      workers: 1
    poly:
      s: 2
      B_s: 1                       # required when s > 2
    chernoff:
      theta_max: 50
    scenarios:
      - preset: quantile_normal
        name: quantile             # defaults to the preset name
        params: {alpha: 0.5}

Unknown keys are rejected.  Errors carry the key path and source line.
"""

from __future__ import annotations

import os
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .bounds import TheoremId, resolve_B_s
from .errors import SchemaError, SupremalError
from .presets import PRESETS, get_preset, resolve_name

FORMAT_VERSION = "1"
OUTPUT_ENV = "SUPREMAL_OUTPUT_DIR"
SIMULATED_THEOREMS = tuple(t for t in TheoremId if not t.value.startswith("Asymptotic"))


@dataclass(frozen=True)
class ScenarioSpec:
    preset: str
    name: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SimulationConfig:
    replications: int = 10_000
    seed: int = 1
    horizon_factor: int = 50
    epsilon: float = 0.5
    workers: int = 1


@dataclass(frozen=True)
class ExperimentPlan:
    scenarios: tuple
    bound_kinds: tuple
    n_grid: tuple
    x_grid: tuple
    output_dir: str = "results"
    confidence_level: float = 0.99
    format_version: str = FORMAT_VERSION
    simulation: SimulationConfig = SimulationConfig()
    poly_s: float = 2.0
    poly_B_s: Optional[float] = None
    theta_max: float = 50.0

    def resolved_output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_ENV) or self.output_dir)

    def to_dict(self) -> dict:
        poly = {"s": self.poly_s}
        if self.poly_B_s is not None:
            poly["B_s"] = self.poly_B_s
        return {
            "format_version": self.format_version,
            "output_dir": self.output_dir,
            "confidence_level": self.confidence_level,
            "bound_kinds": [k.value for k in self.bound_kinds],
            "grids": {"n": list(self.n_grid), "x": list(self.x_grid)},
            "simulation": asdict(self.simulation),
            "poly": poly,
            "chernoff": {"theta_max": self.theta_max},
            "scenarios": [{"preset": s.preset, "name": s.name, "params": dict(s.params)}
                          for s in self.scenarios],
        }


def serialize_plan(plan: ExperimentPlan) -> str:
    return yaml.safe_dump(plan.to_dict(), sort_keys=False)


# -- YAML with line numbers -----------------------------------------------------------

class _Doc:
    """Plain Python data plus the source line of every key path."""

    def __init__(self, text: str):
        try:
            root = yaml.compose(text, Loader=yaml.SafeLoader)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise SchemaError(f"malformed YAML: {getattr(exc, 'problem', exc)}", "",
                              None if mark is None else mark.line + 1) from None
        self.lines = {}
        if root is None:
            raise SchemaError("empty configuration", "", 1)
        self.data = self._convert(root, "")

    def _convert(self, node, path):
        self.lines.setdefault(path, node.start_mark.line + 1)
        if isinstance(node, yaml.MappingNode):
            out = {}
            for knode, vnode in node.value:
                key = knode.value
                sub = f"{path}.{key}" if path else key
                if key in out:
                    raise SchemaError("duplicate key", sub, knode.start_mark.line + 1)
                self.lines[sub] = knode.start_mark.line + 1
                out[key] = self._convert(vnode, sub)
            return out
        if isinstance(node, yaml.SequenceNode):
            return [self._convert(v, f"{path}[{i}]") for i, v in enumerate(node.value)]
        return _scalar(node)

    def error(self, path, message):
        # fall back to the nearest enclosing key that exists in the source
        probe = path
        while probe not in self.lines and probe:
            probe = re.sub(r"(\.[^.\[]*|\[\d+\])$", "", probe)
        return SchemaError(message, path, self.lines.get(probe))


def _scalar(node):
    loader = yaml.SafeLoader("")
    try:
        return loader.construct_object(node, deep=True)
    finally:
        loader.dispose()


# -- validation ----------------------------------------------------------------------

def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _mapping(doc, value, path, allowed, required=()):
    if not isinstance(value, dict):
        raise doc.error(path, "expected a mapping")
    for key in value:
        if key not in allowed:
            raise doc.error(f"{path}.{key}" if path else key, "unknown key")
    for key in required:
        if key not in value:
            raise doc.error(path, f"missing required key {key!r}")
    return value


def _grid(doc, value, path, integer):
    if not isinstance(value, list) or not value:
        raise doc.error(path, "grid must be a nonempty list")
    out = []
    for i, v in enumerate(value):
        ok = _is_int(v) if integer else _is_num(v)
        if not ok or v <= 0:
            raise doc.error(f"{path}[{i}]", f"expected a positive {'integer' if integer else 'number'}, got {v!r}")
        out.append(int(v) if integer else float(v))
    if any(b <= a for a, b in zip(out, out[1:])):
        raise doc.error(path, "grid must be strictly increasing")
    return tuple(out)


def _number(doc, d, key, path, default, pred, what, integer=False):
    if key not in d:
        return default
    v = d[key]
    ok = _is_int(v) if integer else _is_num(v)
    if not ok or not pred(v):
        raise doc.error(f"{path}.{key}" if path else key, f"expected {what}, got {v!r}")
    return int(v) if integer else float(v)


def _plan_from_doc(doc: _Doc) -> ExperimentPlan:
    top = _mapping(doc, doc.data, "", {
        "format_version", "output_dir", "confidence_level", "bound_kinds", "grids",
        "simulation", "poly", "chernoff", "scenarios"}, required=("grids", "scenarios"))

    version = str(top.get("format_version", FORMAT_VERSION))
    if version != FORMAT_VERSION:
        raise doc.error("format_version", f"unsupported format_version {version!r}; expected \"1\"")
    output_dir = top.get("output_dir", "results")
    if not isinstance(output_dir, str) or not output_dir:
        raise doc.error("output_dir", "expected a nonempty path string")
    level = _number(doc, top, "confidence_level", "", 0.99, lambda v: 0 < v < 1, "a number in (0, 1)")

    kinds_raw = top.get("bound_kinds", ["ExpAbs", "ChernoffAbs", "PolyAbs"])
    if not isinstance(kinds_raw, list) or not kinds_raw:
        raise doc.error("bound_kinds", "expected a nonempty list of theorem ids")
    kinds = []
    for i, k in enumerate(kinds_raw):
        try:
            tid = TheoremId(k)
        except ValueError:
            raise doc.error(f"bound_kinds[{i}]", f"unknown theorem id {k!r}") from None
        if tid not in SIMULATED_THEOREMS:
            raise doc.error(f"bound_kinds[{i}]", f"{k} is asymptotic and cannot be checked by simulation")
        if tid in kinds:
            raise doc.error(f"bound_kinds[{i}]", f"duplicate theorem id {k!r}")
        kinds.append(tid)

    grids = _mapping(doc, top["grids"], "grids", {"n", "x"}, required=("n", "x"))
    n_grid = _grid(doc, grids["n"], "grids.n", integer=True)
    x_grid = _grid(doc, grids["x"], "grids.x", integer=False)

    sim_raw = _mapping(doc, top.get("simulation", {}), "simulation",
                       {"replications", "seed", "horizon_factor", "epsilon", "workers"})
    sim = SimulationConfig(
        replications=_number(doc, sim_raw, "replications", "simulation", 10_000, lambda v: v >= 1,
                             "a positive integer", integer=True),
        seed=_number(doc, sim_raw, "seed", "simulation", 1, lambda v: 0 <= v < 2**64,
                     "an integer in [0, 2^64)", integer=True),
        horizon_factor=_number(doc, sim_raw, "horizon_factor", "simulation", 50, lambda v: v >= 1,
                               "a positive integer", integer=True),
        epsilon=_number(doc, sim_raw, "epsilon", "simulation", 0.5, lambda v: v > 0, "a positive number"),
        workers=_number(doc, sim_raw, "workers", "simulation", 1, lambda v: v >= 1,
                        "a positive integer", integer=True),
    )

    poly_raw = _mapping(doc, top.get("poly", {}), "poly", {"s", "B_s"})
    s = _number(doc, poly_raw, "s", "poly", 2.0, lambda v: v >= 2, "a number >= 2")
    B_s = _number(doc, poly_raw, "B_s", "poly", None, lambda v: v > 0, "a positive number")
    if any(k.value.startswith("Poly") for k in kinds):
        try:
            resolve_B_s(s, B_s)
        except SupremalError as exc:
            raise doc.error("poly.B_s", str(exc)) from None

    ch_raw = _mapping(doc, top.get("chernoff", {}), "chernoff", {"theta_max"})
    theta_max = _number(doc, ch_raw, "theta_max", "chernoff", 50.0, lambda v: v > 1e-8, "a number > 1e-8")

    sc_raw = top["scenarios"]
    if not isinstance(sc_raw, list) or not sc_raw:
        raise doc.error("scenarios", "expected a nonempty list of scenarios")
    scenarios, names = [], set()
    for i, entry in enumerate(sc_raw):
        path = f"scenarios[{i}]"
        entry = _mapping(doc, entry, path, {"preset", "name", "params"}, required=("preset",))
        preset = entry["preset"]
        try:
            canonical = resolve_name(str(preset))
        except SupremalError:
            raise doc.error(f"{path}.preset", f"unknown preset {preset!r}; known: {', '.join(PRESETS)}") from None
        params = entry.get("params", {}) or {}
        params = _mapping(doc, params, f"{path}.params", set(PRESETS[canonical].defaults))
        for key, v in params.items():
            if not _is_num(v):
                raise doc.error(f"{path}.params.{key}", f"expected a number, got {v!r}")
        try:
            get_preset(canonical, **params)
        except SupremalError as exc:
            bad = next((k for k in params if k in str(exc)), None)
            raise doc.error(f"{path}.params.{bad}" if bad else f"{path}.params", str(exc)) from None
        name = entry.get("name", canonical)
        if not isinstance(name, str) or not name:
            raise doc.error(f"{path}.name", "expected a nonempty string")
        if name in names:
            raise doc.error(f"{path}.name", f"duplicate scenario name {name!r}")
        names.add(name)
        scenarios.append(ScenarioSpec(str(preset), name, dict(params)))

    return ExperimentPlan(
        scenarios=tuple(scenarios), bound_kinds=tuple(kinds), n_grid=n_grid, x_grid=x_grid,
        output_dir=output_dir, confidence_level=level, format_version=version, simulation=sim,
        poly_s=s, poly_B_s=B_s, theta_max=theta_max,
    )


def parse_config_text(text: str) -> ExperimentPlan:
    return _plan_from_doc(_Doc(text))


def parse_config(path) -> ExperimentPlan:
    """Read and validate a plan; raises ``OSError`` or ``SchemaError``."""
    text = Path(path).read_text()
    try:
        return parse_config_text(text)
    except SchemaError as exc:
        raise SchemaError(exc.message, exc.path, exc.line, source=str(path)) from None
