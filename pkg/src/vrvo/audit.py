"""Post-hoc safety audit of a recorded trace.

The audit rebuilds every agent's buffered cell from the tick-start
positions in the trace and checks three things: no pair of disks overlaps,
every agent under normal control ends the tick inside the cell it started
the tick with, and agents held for a neighboring switch do not move.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

from .bvc import AgentState, Mode, compute_bvc
from .geom2d import Vec2
from .sim import COLLISION_TOL, Scenario, TraceRecord

CONTAIN_TOL = 1e-7


@dataclass
class AuditReport:
    ticks: int = 0
    min_separation: float = math.inf
    separation_violations: list[tuple[int, int, int, float]] = field(default_factory=list)
    containment_violations: list[tuple[int, int, float]] = field(default_factory=list)
    hold_movements: list[tuple[int, int, float]] = field(default_factory=list)
    stray_holds: list[tuple[int, int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.separation_violations or self.containment_violations
                    or self.hold_movements or self.stray_holds)

    def summary(self) -> dict:
        return {
            "ok": self.ok,
            "ticks": self.ticks,
            "min_separation": self.min_separation if math.isfinite(self.min_separation) else None,
            "separation_violations": len(self.separation_violations),
            "containment_violations": len(self.containment_violations),
            "hold_movements": len(self.hold_movements),
            "stray_holds": len(self.stray_holds),
            "first_containment_violation": list(self.containment_violations[0]) if self.containment_violations else None,
        }


def _group(records: Sequence[TraceRecord]) -> list[list[TraceRecord]]:
    by_tick: dict[int, list[TraceRecord]] = defaultdict(list)
    for r in records:
        by_tick[r.tick].append(r)
    ticks = sorted(by_tick)
    if ticks and ticks != list(range(ticks[0], ticks[-1] + 1)):
        raise ValueError("trace ticks are not contiguous")
    return [sorted(by_tick[t], key=lambda r: r.id) for t in ticks]


def audit_trace(scenario: Scenario, records: Sequence[TraceRecord], check_containment: bool = True) -> AuditReport:
    """Check separation, cell containment and HOLD stillness tick by tick."""
    rep = AuditReport()
    frames = _group(records)
    if not frames:
        return rep
    rep.ticks = frames[-1][0].tick
    radii = [a.R for a in scenario.agents]
    goals = [a.g for a in scenario.agents]
    ws = scenario.config.workspace
    sensing = scenario.config.sensing_radius

    for frame in frames:
        n = len(frame)
        for i in range(n):
            a = frame[i]
            for j in range(i + 1, n):
                b = frame[j]
                d = math.hypot(a.p.x - b.p.x, a.p.y - b.p.y)
                rep.min_separation = min(rep.min_separation, d)
                if d - radii[a.id] - radii[b.id] < -COLLISION_TOL:
                    rep.separation_violations.append((a.tick, a.id, b.id, d))
        if any(r.mode == Mode.HOLD for r in frame) and not any("switching" in r.flags for r in frame):
            rep.stray_holds.extend((r.tick, r.id) for r in frame if r.mode == Mode.HOLD)

    for prev, cur in zip(frames, frames[1:]):
        states = [AgentState(r.id, r.p, r.v, goals[r.id], radii[r.id], r.mode) for r in prev]
        for r in cur:
            before = prev[r.id]
            if r.mode == Mode.HOLD:
                moved = (r.p - before.p).norm()
                if moved != 0.0:
                    rep.hold_movements.append((r.tick, r.id, moved))
                continue
            if not check_containment or "switching" in r.flags:
                continue
            if r.p == before.p:
                continue
            cell = compute_bvc(states[r.id], states, ws, sensing).cell
            if cell.empty:
                continue
            if not cell.contains(r.p, CONTAIN_TOL):
                rep.containment_violations.append((r.tick, r.id, -cell.depth(r.p)))
    return rep


def teleport(records: Sequence[TraceRecord], tick: int, agent: int, to: Vec2) -> list[TraceRecord]:
    """Copy of ``records`` with one position replaced, for fault-injection tests."""
    out = []
    for r in records:
        if r.tick == tick and r.id == agent:
            r = TraceRecord(r.tick, r.id, to, r.v, r.u, r.mode, r.flags)
        out.append(r)
    return out
