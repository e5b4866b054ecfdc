"""Command-line front end: run, audit, scenarios, bench."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

from .audit import audit_trace
from .braking import KinodynamicLimits
from .controller import Model
from .sim import METHODS, RunMetrics, Scenario, builtin, builtin_scenarios, circle, run
from .traceio import (
    ScenarioFormatError,
    load_scenario,
    read_trace_jsonl,
    save_scenario,
    write_metrics,
    write_trace_csv,
    write_trace_jsonl,
)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_COLLISION = 2
EXIT_INCOMPLETE = 3
EXIT_USAGE = 64

LIMIT_FIELDS = ("v_max", "a_max", "t_h", "dt")
CONFIG_FIELDS = (
    "sigma", "apex_mode", "tau", "si_slow_radius", "deadlock_patience", "sensing_radius",
    "eps_p", "eps_v", "workspace_half", "obstacle_decel", "axis_decel", "max_halvings", "orca_tau",
)
BENCH_SIZES = (5, 10, 20, 40, 70)


def exit_code(collided: bool, incomplete: bool, deadlocked: bool) -> int:
    """Collisions dominate; otherwise any agent short of its goal gives 3."""
    if collided:
        return EXIT_COLLISION
    if incomplete or deadlocked:
        return EXIT_INCOMPLETE
    return EXIT_OK


def exit_code_for(metrics: RunMetrics) -> int:
    return exit_code(metrics.collision_count > 0, not metrics.all_arrived, metrics.deadlocked_at_end > 0)


@dataclass
class RunConfig:
    scenario: Optional[str] = None
    scenario_file: Optional[str] = None
    agents: Optional[int] = None
    radius: Optional[float] = None
    lane_gap: Optional[float] = None
    spacing: Optional[float] = None
    method: Optional[str] = None
    model: Optional[str] = None
    deadlock: Optional[bool] = None
    max_ticks: Optional[int] = None
    limits: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)
    trace: Optional[str] = None
    fmt: str = "jsonl"
    metrics: Optional[str] = None

    def build(self) -> Scenario:
        if (self.scenario is None) == (self.scenario_file is None):
            raise ValueError("give exactly one of --scenario or --scenario-file")
        if self.scenario_file is not None:
            sc = load_scenario(self.scenario_file)
        else:
            kw = {}
            if self.agents is not None:
                kw["agents"] = self.agents
            for name in ("radius", "lane_gap", "spacing"):
                val = getattr(self, name)
                if val is not None:
                    kw[name] = val
            try:
                sc = builtin(self.scenario, **kw)
            except TypeError as exc:
                raise ValueError(f"scenario {self.scenario!r} does not take those parameters: {exc}") from exc
        changes: dict = {}
        if self.method is not None:
            changes["method"] = self.method
        if self.model is not None:
            changes["model"] = Model(self.model)
        if self.deadlock is not None:
            changes["deadlock_enabled"] = self.deadlock
        if self.max_ticks is not None:
            changes["max_ticks"] = self.max_ticks
        if self.limits:
            lim = {k: getattr(sc.limits, k) for k in LIMIT_FIELDS}
            lim.update(self.limits)
            changes["limits"] = KinodynamicLimits(**lim)
        if self.overrides:
            changes["config"] = replace(sc.config, **self.overrides)
        if changes:
            sc = replace(sc, **changes)
        sc.validate()
        return sc


def _on_off(text: str) -> bool:
    t = text.lower()
    if t in ("on", "true", "1", "yes"):
        return True
    if t in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError("expected on or off")


def _optional_float(text: str) -> Optional[float]:
    if text.lower() in ("none", "inf"):
        return None
    return float(text)


def _add_run_args(p: argparse.ArgumentParser) -> None:
    src = p.add_argument_group("scenario")
    src.add_argument("--scenario", help="builtin name: circle, pairs, two_vs_one, grid (also circle25, grid16, ...)")
    src.add_argument("--scenario-file", help="scenario JSON file")
    src.add_argument("--agents", type=int, help="agent count (circle, grid) or pair count (pairs)")
    src.add_argument("--radius", type=float, help="start circle radius in meters")
    src.add_argument("--lane-gap", type=float, help="distance between pair lanes in meters")
    src.add_argument("--spacing", type=float, help="grid goal spacing in meters")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--model", choices=[m.value for m in Model])
    p.add_argument("--deadlock", type=_on_off, help="deadlock resolution on/off")
    p.add_argument("--max-ticks", type=int)
    lim = p.add_argument_group("kinodynamic limits")
    for name in LIMIT_FIELDS:
        lim.add_argument(f"--{name.replace('_', '-')}", type=float, dest=f"limit_{name}")
    cfg = p.add_argument_group("controller settings")
    cfg.add_argument("--sigma", type=float)
    cfg.add_argument("--apex-mode", choices=("rvo", "vo_center"))
    cfg.add_argument("--tau", type=_optional_float, default=argparse.SUPPRESS,
                     help="cone truncation horizon in seconds; 'none' for an untruncated cone")
    cfg.add_argument("--si-slow-radius", type=float)
    cfg.add_argument("--deadlock-patience", type=int)
    cfg.add_argument("--sensing-radius", type=float)
    cfg.add_argument("--eps-p", type=float)
    cfg.add_argument("--eps-v", type=float)
    cfg.add_argument("--workspace-half", type=float, help="half side of the square workspace in meters")
    cfg.add_argument("--obstacle-decel", choices=("obstacle", "agent"))
    cfg.add_argument("--axis-decel", choices=("directional", "independent"))
    cfg.add_argument("--max-halvings", type=int)
    cfg.add_argument("--orca-tau", type=float)
    out = p.add_argument_group("output")
    out.add_argument("--trace", help="trace output path")
    out.add_argument("--format", choices=("jsonl", "csv"), default="jsonl", dest="fmt")
    out.add_argument("--metrics", help="metrics JSON path (default: next to the trace)")


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    limits = {k: getattr(args, f"limit_{k}") for k in LIMIT_FIELDS if getattr(args, f"limit_{k}") is not None}
    overrides = {}
    for k in CONFIG_FIELDS:
        if hasattr(args, k) and getattr(args, k) is not None:
            overrides[k] = getattr(args, k)
    if "tau" in vars(args):
        overrides["tau"] = args.tau
    return RunConfig(
        scenario=args.scenario, scenario_file=args.scenario_file, agents=args.agents, radius=args.radius,
        lane_gap=args.lane_gap, spacing=args.spacing, method=args.method, model=args.model,
        deadlock=args.deadlock, max_ticks=args.max_ticks, limits=limits, overrides=overrides,
        trace=args.trace, fmt=args.fmt, metrics=args.metrics,
    )


def cmd_run(args: argparse.Namespace) -> int:
    rc = run_config_from_args(args)
    try:
        sc = rc.build()
    except (ValueError, KeyError, ScenarioFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    result = run(sc, record=rc.trace is not None)
    if rc.trace:
        if rc.fmt == "csv":
            write_trace_csv(result, rc.trace)
        else:
            write_trace_jsonl(result, rc.trace)
    metrics_path = rc.metrics
    if metrics_path is None and rc.trace:
        metrics_path = str(Path(rc.trace).with_suffix(".metrics.json"))
    if metrics_path:
        write_metrics(result.metrics, metrics_path)
    code = exit_code_for(result.metrics)
    summary = {"scenario": sc.name, "method": sc.method, "model": sc.model.value, "exit": code}
    summary.update(result.metrics.as_dict())
    print(json.dumps(summary, sort_keys=True))
    return code


def cmd_audit(args: argparse.Namespace) -> int:
    try:
        sc, records = read_trace_jsonl(args.trace)
    except (OSError, ValueError, ScenarioFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    rep = audit_trace(sc, records)
    out = rep.summary()
    if args.verbose:
        out["separation"] = rep.separation_violations[: args.verbose]
        out["containment"] = rep.containment_violations[: args.verbose]
        out["hold"] = rep.hold_movements[: args.verbose]
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK if rep.ok else EXIT_VIOLATION


def cmd_scenarios(args: argparse.Namespace) -> int:
    if args.export:
        name, path = args.export
        try:
            sc = builtin(name)
        except KeyError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        save_scenario(sc, path)
        print(path)
        return EXIT_OK
    for sc in builtin_scenarios():
        print(f"{sc.name:<12} agents={len(sc.agents):<3} model={sc.model.value} "
              + " ".join(f"{k}={v:g}" for k, v in sc.params))
    return EXIT_OK


def bench(sizes: Sequence[int], ticks: int, method: str = "vrvo", model: Model = Model.DI) -> list[dict]:
    """Mean per-agent decision time on circle scenes of each size."""
    rows = []
    for n in sizes:
        sc = circle(n, model=model, method=method, max_ticks=ticks)
        m = run(sc, record=False).metrics
        rows.append({"agents": n, "method": method, "ticks": m.ticks, "mean_step_ms": m.mean_step_ms,
                     "max_step_ms": m.max_step_ms})
    return rows


def cmd_bench(args: argparse.Namespace) -> int:
    methods = ["vrvo", "orca"] if args.method == "both" else [args.method]
    rows = []
    for meth in methods:
        rows.extend(bench(args.sizes, args.ticks, meth, Model(args.model)))
    for r in rows:
        print(f"{r['method']:<5} N={r['agents']:<3} mean {r['mean_step_ms']:.3f} ms/agent  max {r['max_step_ms']:.3f} ms")
    vr = {r["agents"]: r["mean_step_ms"] for r in rows if r["method"] == "vrvo"}
    if vr and min(vr) != max(vr):
        lo, hi = min(vr), max(vr)
        print(f"vrvo t({hi})/t({lo}) = {vr[hi] / vr[lo]:.2f} (sub-quadratic bound {hi / lo * 3:.0f})")
    if "orca" in methods and vr:
        orc = {r["agents"]: r["mean_step_ms"] for r in rows if r["method"] == "orca"}
        ratios = [vr[n] / orc[n] for n in vr if n in orc and orc[n] > 0]
        if ratios:
            print(f"vrvo/orca mean time ratio {sum(ratios) / len(ratios):.2f}")
    if args.json:
        Path(args.json).write_text(json.dumps(rows, indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vrvo", description="Buffered Voronoi cells with RVO cones: simulation and audit")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="simulate a scenario")
    _add_run_args(r)
    r.set_defaults(func=cmd_run)
    a = sub.add_parser("audit", help="check a JSONL trace for safety violations")
    a.add_argument("trace")
    a.add_argument("--verbose", type=int, default=0, metavar="N", help="list up to N violations of each kind")
    a.set_defaults(func=cmd_audit)
    s = sub.add_parser("scenarios", help="list builtin scenarios or export one as JSON")
    s.add_argument("--export", nargs=2, metavar=("NAME", "PATH"))
    s.set_defaults(func=cmd_scenarios)
    b = sub.add_parser("bench", help="per-agent timing sweep over circle scenes")
    b.add_argument("--sizes", type=int, nargs="+", default=list(BENCH_SIZES))
    b.add_argument("--ticks", type=int, default=100)
    b.add_argument("--method", choices=("vrvo", "orca", "both"), default="vrvo")
    b.add_argument("--model", choices=[m.value for m in Model], default="di")
    b.add_argument("--json", help="write the rows as JSON")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
