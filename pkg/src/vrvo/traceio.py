"""Scenario files, trace files and metrics files.

Scenario files are a single JSON document carrying a ``version`` field;
unknown keys anywhere are rejected. Traces are newline-delimited JSON: a
header line holding the scenario, then one object per agent per tick. A
CSV writer is provided for plotting tools.
"""

from __future__ import annotations

import csv
import json
from dataclasses import fields
from pathlib import Path
from typing import Any, Iterable, Iterator

from .braking import KinodynamicLimits
from .bvc import Mode, ObstacleState
from .config import VrvoConfig
from .controller import Model
from .geom2d import Vec2
from .sim import AgentSpec, RunMetrics, RunResult, Scenario, TraceRecord

SCENARIO_VERSION = 1
CSV_COLUMNS = ("tick", "id", "px", "py", "vx", "vy", "ux", "uy", "mode", "flags")

_SCENARIO_KEYS = {
    "version", "name", "agents", "obstacles", "limits", "model", "method",
    "deadlock_enabled", "max_ticks", "config", "params",
}
_AGENT_KEYS = {"p", "g", "R"}
_OBSTACLE_KEYS = {"p", "R", "v_max_obs", "a_max_obs", "v"}
_LIMIT_KEYS = {"v_max", "a_max", "t_h", "dt"}


class ScenarioFormatError(ValueError):
    pass


def _check_keys(d: Any, allowed: set[str], where: str, required: Iterable[str] = ()) -> None:
    if not isinstance(d, dict):
        raise ScenarioFormatError(f"{where}: expected an object")
    extra = set(d) - allowed
    if extra:
        raise ScenarioFormatError(f"{where}: unknown keys {sorted(extra)}")
    missing = [k for k in required if k not in d]
    if missing:
        raise ScenarioFormatError(f"{where}: missing keys {missing}")


def _vec(v: Any, where: str) -> Vec2:
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ScenarioFormatError(f"{where}: expected [x, y]")
    out = Vec2(float(v[0]), float(v[1]))
    if not out.is_finite():
        raise ScenarioFormatError(f"{where}: non-finite coordinate")
    return out


def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "version": SCENARIO_VERSION,
        "name": sc.name,
        "agents": [{"p": [a.p.x, a.p.y], "g": [a.g.x, a.g.y], "R": a.R} for a in sc.agents],
        "obstacles": [
            {"p": [o.p.x, o.p.y], "R": o.R, "v_max_obs": o.v_max_obs, "a_max_obs": o.a_max_obs, "v": [o.v.x, o.v.y]}
            for o in sc.obstacles
        ],
        "limits": {"v_max": sc.limits.v_max, "a_max": sc.limits.a_max, "t_h": sc.limits.t_h, "dt": sc.limits.dt},
        "model": sc.model.value,
        "method": sc.method,
        "deadlock_enabled": sc.deadlock_enabled,
        "max_ticks": sc.max_ticks,
        "config": sc.config.to_dict(),
        "params": [[k, v] for k, v in sc.params],
    }


def scenario_from_dict(d: dict) -> Scenario:
    _check_keys(d, _SCENARIO_KEYS, "scenario", required=("version", "agents"))
    if d["version"] != SCENARIO_VERSION:
        raise ScenarioFormatError(f"unsupported scenario version {d['version']!r}")
    agents = []
    for i, a in enumerate(d["agents"]):
        _check_keys(a, _AGENT_KEYS, f"agents[{i}]", required=("p", "g"))
        agents.append(AgentSpec(_vec(a["p"], f"agents[{i}].p"), _vec(a["g"], f"agents[{i}].g"), float(a.get("R", 0.25))))
    obstacles = []
    for i, o in enumerate(d.get("obstacles", [])):
        _check_keys(o, _OBSTACLE_KEYS, f"obstacles[{i}]", required=("p", "R", "v_max_obs", "a_max_obs"))
        obstacles.append(ObstacleState(
            _vec(o["p"], f"obstacles[{i}].p"), float(o["R"]), float(o["v_max_obs"]), float(o["a_max_obs"]),
            _vec(o.get("v", [0.0, 0.0]), f"obstacles[{i}].v"),
        ))
    lim = d.get("limits", {})
    _check_keys(lim, _LIMIT_KEYS, "limits")
    cfg = d.get("config", {})
    _check_keys(cfg, VrvoConfig.field_names(), "config")
    params = []
    for item in d.get("params", []):
        if not (isinstance(item, (list, tuple)) and len(item) == 2 and isinstance(item[0], str)):
            raise ScenarioFormatError("params: expected [name, value] pairs")
        params.append((item[0], item[1]))
    try:
        return Scenario(
            name=str(d.get("name", "custom")),
            agents=tuple(agents),
            obstacles=tuple(obstacles),
            limits=KinodynamicLimits(**{k: float(v) for k, v in lim.items()}),
            model=Model(d.get("model", "si")),
            method=d.get("method", "vrvo"),
            deadlock_enabled=bool(d.get("deadlock_enabled", True)),
            max_ticks=int(d.get("max_ticks", 3000)),
            config=VrvoConfig(**cfg),
            params=tuple(params),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioFormatError):
            raise
        raise ScenarioFormatError(str(exc)) from exc


def save_scenario(sc: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(sc), indent=2) + "\n")


def load_scenario(path: str | Path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"{path}: {exc}") from exc
    return scenario_from_dict(data)


# -- traces ---------------------------------------------------------------------


def record_to_dict(r: TraceRecord) -> dict:
    return {
        "tick": r.tick,
        "id": r.id,
        "p": [r.p.x, r.p.y],
        "v": [r.v.x, r.v.y],
        "u": [r.u.x, r.u.y],
        "mode": r.mode.value,
        "flags": list(r.flags),
    }


def record_from_dict(d: dict) -> TraceRecord:
    return TraceRecord(
        int(d["tick"]), int(d["id"]), Vec2(*map(float, d["p"])), Vec2(*map(float, d["v"])),
        Vec2(*map(float, d["u"])), Mode(d["mode"]), tuple(d.get("flags", ())),
    )


def iter_trace_lines(result: RunResult) -> Iterator[str]:
    yield json.dumps({"type": "header", "scenario": scenario_to_dict(result.scenario)}, sort_keys=True)
    for r in result.trace:
        yield json.dumps(record_to_dict(r), sort_keys=True)


def write_trace_jsonl(result: RunResult, path: str | Path) -> None:
    with open(path, "w") as fh:
        for line in iter_trace_lines(result):
            fh.write(line)
            fh.write("\n")


def read_trace_jsonl(path: str | Path) -> tuple[Scenario, list[TraceRecord]]:
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip()]
    if not lines:
        raise ScenarioFormatError(f"{path}: empty trace")
    head = json.loads(lines[0])
    if head.get("type") != "header":
        raise ScenarioFormatError(f"{path}: first line must be the scenario header")
    sc = scenario_from_dict(head["scenario"])
    return sc, [record_from_dict(json.loads(ln)) for ln in lines[1:]]


def write_trace_csv(result: RunResult, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in result.trace:
            w.writerow([r.tick, r.id, repr(r.p.x), repr(r.p.y), repr(r.v.x), repr(r.v.y),
                        repr(r.u.x), repr(r.u.y), r.mode.value, "|".join(r.flags)])


def write_metrics(metrics: RunMetrics, path: str | Path) -> None:
    Path(path).write_text(json.dumps(metrics.as_dict(), indent=2, sort_keys=True) + "\n")


def metrics_field_names() -> list[str]:
    return [f.name for f in fields(RunMetrics)]
