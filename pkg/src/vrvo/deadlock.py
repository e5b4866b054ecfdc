"""Deadlock detection and pairwise position switching.

An agent that sits still away from its goal for ``patience`` consecutive
ticks is flagged. It then picks the Voronoi-adjacent, stationary neighbor
lying most directly toward its goal; the two swap places by a rigid
half-turn about their midpoint while every Voronoi neighbor of either is
frozen in HOLD.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .braking import KinodynamicLimits
from .bvc import AgentState, Mode, compute_bvc
from .geom2d import ConvexCell, Vec2, angle_between

_DISK_SAMPLES = 16
_PATH_SAMPLES = 24


class Phase(str, enum.Enum):
    ROTATING = "ROTATING"
    DONE = "DONE"
    ABORTED = "ABORTED"


def is_stalled(agent: AgentState, eps_p: float, eps_v: float) -> bool:
    """Away from the goal and (nearly) at rest."""
    return (agent.p - agent.g).norm() >= eps_p and agent.v.norm() <= eps_v


class DeadlockDetector:
    """Tracks how long each agent has been stalled."""

    def __init__(self, eps_p: float = 0.05, eps_v: float = 0.01, patience: int = 10):
        self.eps_p = eps_p
        self.eps_v = eps_v
        self.patience = patience
        self.counts: dict[int, int] = {}

    def observe(self, agent: AgentState) -> bool:
        if is_stalled(agent, self.eps_p, self.eps_v):
            self.counts[agent.id] = self.counts.get(agent.id, 0) + 1
        else:
            self.counts[agent.id] = 0
        return self.counts[agent.id] >= self.patience

    def reset(self, agent_id: int) -> None:
        self.counts[agent_id] = 0


def detect_deadlock(
    agent: AgentState, stalled_ticks: int, eps_p: float = 0.05, eps_v: float = 0.01, patience: int = 10
) -> bool:
    """True once the agent has been stalled for ``patience`` ticks, this one included."""
    if not is_stalled(agent, eps_p, eps_v):
        return False
    return stalled_ticks + 1 >= patience


def ranked_switch_partners(
    me: AgentState,
    neighbors: Sequence[AgentState],
    adjacent: Sequence[int],
    eps_v: float = 0.01,
) -> list[int]:
    """Eligible partners, best first.

    Candidates must share a Voronoi edge with ``me`` and be either in
    DEADLOCK or stationary in DEFAULT. They are ordered by the angle
    between ``p - g`` and ``p - p_j``; angles within 1e-12 rad tie and go
    to the lower id.
    """
    to_goal = me.p - me.g
    if to_goal.norm() == 0.0:
        return []
    adjacent_set = set(adjacent)
    keyed: list[tuple[float, int]] = []
    for o in neighbors:
        if o.id == me.id or o.id not in adjacent_set:
            continue
        if o.mode == Mode.HOLD:
            continue
        if o.mode == Mode.DEFAULT and o.v.norm() > eps_v:
            continue
        off = me.p - o.p
        if off.norm() == 0.0:
            continue
        keyed.append((angle_between(to_goal, off), o.id))
    keyed.sort()
    # merge near-equal angles so the id decides
    out: list[int] = []
    i = 0
    while i < len(keyed):
        j = i
        while j + 1 < len(keyed) and keyed[j + 1][0] - keyed[i][0] <= 1e-12:
            j += 1
        out.extend(sorted(k for _, k in keyed[i:j + 1]))
        i = j + 1
    return out


def choose_switch_partner(
    me: AgentState,
    neighbors: Sequence[AgentState],
    adjacent: Sequence[int],
    eps_v: float = 0.01,
) -> Optional[int]:
    """Neighbor lying most directly toward the goal, or None if nobody is eligible."""
    ranked = ranked_switch_partners(me, neighbors, adjacent, eps_v)
    return ranked[0] if ranked else None


@dataclass
class SwitchManeuver:
    agent_a: int
    agent_b: int
    pivot: Vec2
    start_a: Vec2
    start_b: Vec2
    direction: int  # +1 counter-clockwise, -1 clockwise
    angular_speed: float
    held: tuple[int, ...]
    phase: Phase = Phase.ROTATING
    angular_progress: float = 0.0
    region: tuple[ConvexCell, ...] = field(default=(), repr=False)

    @property
    def participants(self) -> tuple[int, ...]:
        return (self.agent_a, self.agent_b) + self.held

    def positions_at(self, progress: float) -> tuple[Vec2, Vec2]:
        ang = self.direction * progress
        return _rotate(self.start_a, self.pivot, ang), _rotate(self.start_b, self.pivot, ang)


def _rotate(p: Vec2, c: Vec2, ang: float) -> Vec2:
    ca, sa = math.cos(ang), math.sin(ang)
    dx, dy = p.x - c.x, p.y - c.y
    return Vec2(c.x + ca * dx - sa * dy, c.y + sa * dx + ca * dy)


def _disk_inside_union(center: Vec2, radius: float, cells: Sequence[ConvexCell]) -> bool:
    pts = [center] + [
        Vec2(center.x + radius * math.cos(2 * math.pi * k / _DISK_SAMPLES),
             center.y + radius * math.sin(2 * math.pi * k / _DISK_SAMPLES))
        for k in range(_DISK_SAMPLES)
    ]
    return all(any(c.contains(q, 1e-9) for c in cells) for q in pts)


def switch_speed(radius: float, limits: KinodynamicLimits) -> float:
    """Tangential speed for the half-turn: capped by v_max and by the centripetal limit."""
    return min(limits.v_max, math.sqrt(limits.a_max * radius))


def plan_switch(
    a: AgentState,
    b: AgentState,
    held: Sequence[int],
    region: Sequence[ConvexCell],
    limits: KinodynamicLimits,
    obstacles: Sequence[tuple[Vec2, float]] = (),
) -> Optional[SwitchManeuver]:
    """Set up the half-turn, picking a rotation sense whose sweep stays in ``region``.

    ``region`` holds the unbuffered Voronoi cells (at initiation) of the pair
    and of the agents that will be held; ``obstacles`` are the held disks as
    ``(center, radius)``, which the sweep must not touch. Returns None when
    neither sense works.
    """
    pivot = (a.p + b.p) * 0.5
    radius = (a.p - b.p).norm() * 0.5
    if radius == 0.0:
        return None
    omega = switch_speed(radius, limits) / radius
    for direction in (1, -1):
        ok = True
        for k in range(1, _PATH_SAMPLES + 1):
            ang = direction * math.pi * k / _PATH_SAMPLES
            pa = _rotate(a.p, pivot, ang)
            pb = _rotate(b.p, pivot, ang)
            if not (_disk_inside_union(pa, a.R, region) and _disk_inside_union(pb, b.R, region)):
                ok = False
                break
            if any((pa - c).norm() < a.R + r or (pb - c).norm() < b.R + r for c, r in obstacles):
                ok = False
                break
        if ok:
            return SwitchManeuver(a.id, b.id, pivot, a.p, b.p, direction, omega, tuple(held), region=tuple(region))
    return None


def execute_switch(
    maneuver: SwitchManeuver,
    states: Mapping[int, AgentState],
    limits: KinodynamicLimits,
    dt: float,
) -> dict[int, tuple[Vec2, Vec2]]:
    """Advance the half-turn by one tick.

    Returns new ``(position, velocity)`` for both switching agents. The
    maneuver is marked DONE once the angular progress reaches pi, at which
    point the two have exactly traded places and come to rest.
    """
    if maneuver.phase is not Phase.ROTATING:
        return {}
    a = states[maneuver.agent_a]
    b = states[maneuver.agent_b]
    progress = min(math.pi, maneuver.angular_progress + maneuver.angular_speed * dt)
    pa, pb = maneuver.positions_at(progress)
    if progress >= math.pi:
        # land exactly on the partner's start
        pa, pb = maneuver.start_b, maneuver.start_a
        maneuver.phase = Phase.DONE
        va = vb = Vec2(0.0, 0.0)
    else:
        va = (pa - a.p) / dt
        vb = (pb - b.p) / dt
    maneuver.angular_progress = progress
    return {a.id: (pa, va), b.id: (pb, vb)}


def maneuver_blocked(
    maneuver: SwitchManeuver, states: Mapping[int, AgentState], limits: KinodynamicLimits, dt: float
) -> bool:
    """Would the next rotation step bring a switching disk into contact with an outsider?"""
    progress = min(math.pi, maneuver.angular_progress + maneuver.angular_speed * dt)
    pa, pb = maneuver.positions_at(progress)
    if progress >= math.pi:
        pa, pb = maneuver.start_b, maneuver.start_a
    inside = {maneuver.agent_a, maneuver.agent_b}
    held = set(maneuver.held)
    ra = states[maneuver.agent_a].R
    rb = states[maneuver.agent_b].R
    # agents outside the maneuver may themselves move up to v_max * dt this tick
    slack = limits.v_max * dt
    for s in states.values():
        if s.id in inside:
            continue
        m = 0.0 if s.id in held else slack
        if (s.p - pa).norm() < s.R + ra + m or (s.p - pb).norm() < s.R + rb + m:
            return True
    return False


@dataclass
class DeadlockEvents:
    detected: int = 0
    resolved: int = 0
    aborted: int = 0

    def as_dict(self) -> dict:
        return {"detected": self.detected, "resolved": self.resolved, "aborted": self.aborted}


class DeadlockCoordinator:
    """Sequential arbiter for switch initiations plus maneuver bookkeeping.

    Detection runs for every agent each tick whether or not resolution is
    enabled, so a run without resolution still reports which agents ended
    up stuck.
    """

    def __init__(self, limits: KinodynamicLimits, workspace: ConvexCell, sensing_radius: float,
                 eps_p: float = 0.05, eps_v: float = 0.01, patience: int = 10, enabled: bool = True):
        self.limits = limits
        self.workspace = workspace
        self.sensing_radius = sensing_radius
        self.detector = DeadlockDetector(eps_p, eps_v, patience)
        self.enabled = enabled
        self.maneuvers: list[SwitchManeuver] = []
        self.events = DeadlockEvents()
        self._flagged: set[int] = set()

    def claimed(self) -> set[int]:
        out: set[int] = set()
        for m in self.maneuvers:
            out.update(m.participants)
        return out

    def switching(self) -> set[int]:
        out: set[int] = set()
        for m in self.maneuvers:
            out.update((m.agent_a, m.agent_b))
        return out

    def update_modes(self, states: dict[int, AgentState]) -> None:
        """Detection pass on the tick-start snapshot; sets or clears DEADLOCK."""
        busy = self.claimed()
        for i in sorted(states):
            s = states[i]
            if i in busy:
                continue
            stuck = self.detector.observe(s)
            if stuck and s.mode == Mode.DEFAULT:
                states[i] = s.with_(mode=Mode.DEADLOCK)
                if i not in self._flagged:
                    self.events.detected += 1
                    self._flagged.add(i)
            elif not stuck and s.mode == Mode.DEADLOCK:
                states[i] = s.with_(mode=Mode.DEFAULT)
                self._flagged.discard(i)

    def initiate(self, states: dict[int, AgentState]) -> list[SwitchManeuver]:
        """Arbitrate initiations in ascending initiator id."""
        if not self.enabled:
            return []
        started = []
        claimed = self.claimed()
        snapshot = list(states.values())
        for i in sorted(states):
            me = states[i]
            if me.mode != Mode.DEADLOCK or i in claimed:
                continue
            bvc_i = compute_bvc(me, snapshot, self.workspace, self.sensing_radius)
            adj_i = bvc_i.neighbors.voronoi_adjacent
            sensed = [states[j] for j in bvc_i.neighbors.sensed]
            man = None
            tried = False
            for k in ranked_switch_partners(me, sensed, adj_i, self.detector.eps_v):
                if k in claimed:
                    continue
                partner = states[k]
                bvc_k = compute_bvc(partner, snapshot, self.workspace, self.sensing_radius)
                held = sorted((set(adj_i) | set(bvc_k.neighbors.voronoi_adjacent)) - {i, k})
                if any(h in claimed for h in held):
                    continue
                if any(states[h].v.norm() > self.detector.eps_v for h in held):
                    continue
                tried = True
                region = [bvc_i.voronoi, bvc_k.voronoi]
                region += [compute_bvc(states[h], snapshot, self.workspace, self.sensing_radius).voronoi for h in held]
                disks = [(states[h].p, states[h].R) for h in held]
                man = plan_switch(me, partner, held, region, self.limits, disks)
                if man is not None:
                    break
            if man is None:
                if tried:
                    # no candidate admits a clear half-turn: start the patience count over
                    self.events.aborted += 1
                    self.detector.reset(i)
                    states[i] = me.with_(mode=Mode.DEFAULT)
                    self._flagged.discard(i)
                continue
            for h in held:
                states[h] = states[h].with_(mode=Mode.HOLD, v=Vec2(0.0, 0.0))
            states[k] = partner.with_(v=Vec2(0.0, 0.0))
            states[i] = me.with_(v=Vec2(0.0, 0.0))
            self.maneuvers.append(man)
            claimed.update(man.participants)
            started.append(man)
        return started

    def advance(self, states: dict[int, AgentState], dt: float) -> dict[int, tuple[Vec2, Vec2]]:
        """Move switching pairs one tick; finish or abort maneuvers."""
        moves: dict[int, tuple[Vec2, Vec2]] = {}
        still = []
        for m in self.maneuvers:
            if maneuver_blocked(m, states, self.limits, dt):
                m.phase = Phase.ABORTED
                self.events.aborted += 1
                self._release(m, states)
                continue
            moves.update(execute_switch(m, states, self.limits, dt))
            if m.phase is Phase.DONE:
                self.events.resolved += 1
                self._release(m, states)
            else:
                still.append(m)
        self.maneuvers = still
        return moves

    def _release(self, m: SwitchManeuver, states: dict[int, AgentState]) -> None:
        for j in m.participants:
            states[j] = states[j].with_(mode=Mode.DEFAULT)
            self.detector.reset(j)
            self._flagged.discard(j)
