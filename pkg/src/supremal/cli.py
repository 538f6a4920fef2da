"""Command line entry point: ``run``, ``presets`` and ``bound``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np
import scipy

from . import __version__
from .bounds import EVENT_KIND, TheoremId, asymptotic_bound, asymptotic_spec_for, model_bound
from .config import ExperimentPlan, parse_config
from .errors import SchemaError, SupremalError
from .montecarlo import Scenario, estimate_sup_tails, verify_bounds
from .presets import format_presets, get_preset, resolve_name

CSV_HEADER = ("scenario,n,x,kind,theorem,raw_bound,clamped_bound,p_hat,ci_low,ci_high,"
              "replications,horizon,censored_fraction,seed,pass")


def fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _csv_line(row) -> str:
    fields = (row.scenario, row.n, row.x, row.kind, row.theorem, row.raw_bound, row.clamped_bound,
              row.p_hat, row.ci_low, row.ci_high, row.replications, row.horizon,
              row.censored_fraction, row.seed, row.passed)
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow([fmt(v) for v in fields])
    return buf.getvalue()


@dataclass
class RunResult:
    csv_path: Path
    json_path: Path
    rows: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    abort_failures: list = field(default_factory=list)

    @property
    def failed(self) -> int:
        return sum(not r.passed for r in self.rows)

    @property
    def passed(self) -> bool:
        return self.failed == 0 and not self.errors and not self.abort_failures

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1


def _versions():
    return {"supremal": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def run_experiment(plan: ExperimentPlan, workers: Optional[int] = None, out_dir=None) -> RunResult:
    """Bound, simulate and verify every scenario x n x x x theorem; write CSV and JSON reports."""
    out = Path(out_dir) if out_dir is not None else plan.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    sim = plan.simulation
    workers = sim.workers if workers is None else workers
    result = RunResult(out / "report.csv", out / "summary.json")
    with result.csv_path.open("w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for spec in plan.scenarios:
            try:
                model = get_preset(resolve_name(spec.preset), **spec.params)
                for n in plan.n_grid:
                    sc = Scenario(model, n, sim.horizon_factor * n, plan.x_grid, sim.replications,
                                  sim.seed, sim.epsilon, spec.name)
                    bounds = []
                    for x in plan.x_grid:
                        for tid in plan.bound_kinds:
                            try:
                                bounds.append(model_bound(tid, model, n, x, s=plan.poly_s,
                                                          B_s=plan.poly_B_s, theta_max=plan.theta_max))
                            except SupremalError as exc:
                                result.skipped.append({"scenario": spec.name, "n": n, "x": x,
                                                       "theorem": tid.value,
                                                       "reason": f"{type(exc).__name__}: {exc}"})
                    if not bounds:
                        continue
                    kinds = sorted({EVENT_KIND[b.theorem_id] for b in bounds})
                    est = estimate_sup_tails(sc, kinds, plan.confidence_level, workers)
                    report = verify_bounds(sc, bounds, plan.confidence_level, estimates=est)
                    if report.abort_fraction > 1e-3:
                        result.abort_failures.append({"scenario": spec.name, "n": n,
                                                      "aborted": report.aborted})
                    for row in report.rows:
                        fh.write(_csv_line(row))
                        result.rows.append(row)
                    fh.flush()
            except SupremalError as exc:
                result.errors.append({"scenario": spec.name, "error": f"{type(exc).__name__}: {exc}"})
    summary = {
        "format_version": plan.format_version,
        "rows": len(result.rows),
        "passed": len(result.rows) - result.failed,
        "failed": result.failed,
        "skipped": result.skipped,
        "errors": result.errors,
        "abort_failures": result.abort_failures,
        "ok": result.passed,
        "provenance": {
            "seed": sim.seed,
            "replications": sim.replications,
            "horizon_factor": sim.horizon_factor,
            "confidence_level": plan.confidence_level,
            "versions": _versions(),
        },
        "failures": [{"scenario": r.scenario, "n": r.n, "x": r.x, "theorem": r.theorem,
                      "clamped_bound": r.clamped_bound, "ci_low": r.ci_low}
                     for r in result.rows if not r.passed],
    }
    result.json_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return result


def _parse_params(items: List[str]) -> dict:
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise SystemExit(f"--param expects key=value, got {item!r}")
        out[key] = float(val)
    return out


def evaluate_bound(preset: str, n: int, x: float, kind: str, s: float = 2.0,
                   B_s: Optional[float] = None, theta_max: float = 50.0, params=None) -> dict:
    """Single bound as a flat record; asymptotic kinds use root-n norming."""
    tid = TheoremId(kind)
    model = get_preset(preset, **(params or {}))
    if tid.value.startswith("Asymptotic"):
        k = EVENT_KIND[tid]
        value = asymptotic_bound(k, asymptotic_spec_for(model), -x if k == "inf" else x)
        return {"theorem_id": tid.value, "kind": k, "x": float(x), "raw": value, "clamped": min(value, 1.0)}
    return model_bound(tid, model, n, x, s=s, B_s=B_s, theta_max=theta_max).to_record()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="supremal", description="Supremal tail bounds for convex M-estimators.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="bound, simulate and verify an experiment plan")
    run.add_argument("config", help="YAML experiment plan")
    run.add_argument("--workers", type=int, default=None, help="worker threads (output does not depend on it)")

    sub.add_parser("presets", help="list the preset scenarios")

    b = sub.add_parser("bound", help="evaluate one bound")
    b.add_argument("preset")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--x", type=float, required=True)
    b.add_argument("--kind", required=True, choices=[t.value for t in TheoremId])
    b.add_argument("--s", type=float, default=2.0)
    b.add_argument("--B_s", type=float, default=None)
    b.add_argument("--theta-max", type=float, default=50.0)
    b.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="preset parameter override, repeatable")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "presets":
            print(format_presets())
            return 0
        if args.command == "bound":
            rec = evaluate_bound(args.preset, args.n, args.x, args.kind, args.s, args.B_s,
                                 args.theta_max, _parse_params(args.param))
            for key, val in rec.items():
                print(f"{key}={fmt(val)}")
            return 0
        plan = parse_config(args.config)
        result = run_experiment(plan, workers=args.workers)
        print(f"{len(result.rows)} checks, {result.failed} failed, {len(result.skipped)} skipped, "
              f"{len(result.errors)} scenario errors -> {result.csv_path}")
        return result.exit_code
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SupremalError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
