"""Fixed-step world: scenarios, the synchronous tick loop, metrics and traces."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .braking import KinodynamicLimits
from .bvc import AgentState, Mode, ObstacleState
from .config import VrvoConfig
from .controller import ControlInput, Model, at_goal, step_agent
from .deadlock import DeadlockCoordinator
from .geom2d import Vec2
from .orca import orca_step, orca_step_di

COLLISION_TOL = 1e-6
METHODS = ("vrvo", "orca")

# circle radii per agent count; other counts use the arc-spacing rule
CIRCLE_RADII = {4: 2.0, 10: 4.0, 25: 8.0, 70: 20.0}


@dataclass(frozen=True)
class AgentSpec:
    p: Vec2
    g: Vec2
    R: float = 0.25


@dataclass(frozen=True)
class Scenario:
    name: str
    agents: tuple[AgentSpec, ...]
    obstacles: tuple[ObstacleState, ...] = ()
    limits: KinodynamicLimits = KinodynamicLimits()
    model: Model = Model.SI
    method: str = "vrvo"
    deadlock_enabled: bool = True
    config: VrvoConfig = VrvoConfig()
    max_ticks: int = 3000
    params: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "model", Model(self.model))
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.max_ticks < 1:
            raise ValueError("max_ticks must be positive")
        if not self.agents:
            raise ValueError("scenario needs at least one agent")

    @property
    def sensing_radius(self) -> float:
        return self.config.sensing_radius

    def validate(self) -> None:
        """Start configuration must be collision-free and inside the workspace."""
        ws = self.config.workspace
        for i, a in enumerate(self.agents):
            if not ws.contains(a.p, 0.0):
                raise ValueError(f"agent {i} starts outside the workspace")
            for j in range(i):
                b = self.agents[j]
                if (a.p - b.p).norm() < a.R + b.R:
                    raise ValueError(f"agents {j} and {i} overlap at the start")

    def initial_states(self) -> list[AgentState]:
        return [AgentState(i, a.p, Vec2(0.0, 0.0), a.g, a.R) for i, a in enumerate(self.agents)]

    def mirrored(self) -> "Scenario":
        return _replace(self, agents=tuple(AgentSpec(Vec2(-a.p.x, a.p.y), Vec2(-a.g.x, a.g.y), a.R) for a in self.agents))


def _replace(sc: Scenario, **kw) -> Scenario:
    from dataclasses import replace

    return replace(sc, **kw)


# -- builtin scenarios ------------------------------------------------------


def circle_radius_for(n: int, R: float = 0.25) -> float:
    if n in CIRCLE_RADII:
        return CIRCLE_RADII[n]
    # arc spacing of at least 4R between neighbors on the circle
    return max(2.0, 4.0 * R * n / (2.0 * math.pi))


def circle(n: int, radius: Optional[float] = None, R: float = 0.25, **kw) -> Scenario:
    """``n`` agents evenly spaced on a circle, each heading to the antipode."""
    r = circle_radius_for(n, R) if radius is None else radius
    agents = []
    for k in range(n):
        ang = 2.0 * math.pi * k / n
        p = Vec2(r * math.cos(ang), r * math.sin(ang))
        agents.append(AgentSpec(p, Vec2(-p.x, -p.y), R))
    return Scenario(f"circle{n}", tuple(agents), params=(("agents", n), ("radius", r)), **kw)


def pairs(k: int = 4, lane_gap: float = 1.0, half_length: float = 5.0, offset: float = 0.05,
          R: float = 0.25, **kw) -> Scenario:
    """``k`` head-on pairs on vertical lanes placed symmetrically about x = 0 (DI by default).

    Within a lane the upward agent sits ``offset`` further from the center
    line than the downward one, so the scene is a left-right mirror of
    itself without being up-down symmetric as well.
    """
    kw.setdefault("model", Model.DI)
    agents = []
    for lane in range(k):
        x = (lane - (k - 1) / 2.0) * lane_gap
        side = math.copysign(offset, x) if x != 0.0 else 0.0
        agents.append(AgentSpec(Vec2(x + side, -half_length), Vec2(x + side, half_length), R))
        agents.append(AgentSpec(Vec2(x - side, half_length), Vec2(x - side, -half_length), R))
    return Scenario(f"pairs{k}", tuple(agents),
                    params=(("pairs", k), ("lane_gap", lane_gap), ("half_length", half_length), ("offset", offset)),
                    **kw)


def two_vs_one(spacing: float = 1.0, half_length: float = 5.0, R: float = 0.25, **kw) -> Scenario:
    """Two agents travel right to left while a third crosses left to right between them."""
    agents = (
        AgentSpec(Vec2(half_length, 0.5 * spacing), Vec2(-half_length, 0.5 * spacing), R),
        AgentSpec(Vec2(half_length, -0.5 * spacing), Vec2(-half_length, -0.5 * spacing), R),
        AgentSpec(Vec2(-half_length, 0.0), Vec2(half_length, 0.0), R),
    )
    return Scenario("two_vs_one", agents, params=(("spacing", spacing), ("half_length", half_length)), **kw)


def grid_formation(n: int = 16, spacing: float = 1.25, radius: float = 6.0, R: float = 0.25, **kw) -> Scenario:
    """Agents on a circle move into a square grid formation centered at the origin (DI by default)."""
    kw.setdefault("model", Model.DI)
    side = int(round(math.sqrt(n)))
    if side * side != n:
        raise ValueError("grid formation needs a square agent count")
    goals = []
    for row in range(side):
        for col in range(side):
            goals.append(Vec2((col - (side - 1) / 2.0) * spacing, ((side - 1) / 2.0 - row) * spacing))
    agents = []
    for k in range(n):
        ang = 2.0 * math.pi * k / n
        agents.append(AgentSpec(Vec2(radius * math.cos(ang), radius * math.sin(ang)), goals[k], R))
    return Scenario(f"grid{n}", tuple(agents), params=(("agents", n), ("spacing", spacing), ("radius", radius)), **kw)


SCENARIO_BUILDERS: dict[str, Callable[..., Scenario]] = {
    "circle": circle,
    "pairs": pairs,
    "two_vs_one": two_vs_one,
    "grid": grid_formation,
}


def builtin_scenarios() -> list[Scenario]:
    return [
        circle(4),
        circle(10),
        circle(25),
        circle(70),
        pairs(4),
        two_vs_one(),
        grid_formation(16),
    ]


def builtin(name: str, **kw) -> Scenario:
    """Resolve names such as ``circle`` (with ``agents=``), ``circle25``, ``pairs4``, ``grid16``."""
    agents = kw.pop("agents", None)
    if name in ("circle", "pairs", "grid") or name.rstrip("0123456789") in ("circle", "pairs", "grid"):
        base = name.rstrip("0123456789")
        digits = name[len(base):]
        count = agents if agents is not None else (int(digits) if digits else None)
        if base == "circle":
            return circle(count if count is not None else 4, **kw)
        if base == "pairs":
            return pairs(count if count is not None else 4, **kw)
        return grid_formation(count if count is not None else 16, **kw)
    if name == "two_vs_one":
        return two_vs_one(**kw)
    raise KeyError(f"unknown scenario {name!r}")


# -- run loop -------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class TraceRecord:
    tick: int
    id: int
    p: Vec2
    v: Vec2
    u: Vec2
    mode: Mode
    flags: tuple[str, ...] = ()


@dataclass
class RunMetrics:
    collision_count: int = 0
    min_separation: float = math.inf
    min_clearance: float = math.inf
    makespan_ticks: Optional[int] = None
    arrived_count: int = 0
    n_agents: int = 0
    ticks: int = 0
    mean_step_ms: float = 0.0
    max_step_ms: float = 0.0
    deadlock_events: dict = field(default_factory=lambda: {"detected": 0, "resolved": 0, "aborted": 0})
    deadlocked_at_end: int = 0
    infeasible_ticks: int = 0
    fallback_ticks: int = 0
    agent_ticks: int = 0
    obstacle_contacts: int = 0

    @property
    def all_arrived(self) -> bool:
        return self.arrived_count == self.n_agents

    @property
    def infeasible_fraction(self) -> float:
        return self.infeasible_ticks / self.agent_ticks if self.agent_ticks else 0.0

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "collision_count", "min_separation", "min_clearance", "makespan_ticks", "arrived_count", "n_agents", "ticks",
            "mean_step_ms", "max_step_ms", "deadlock_events", "deadlocked_at_end", "infeasible_ticks",
            "fallback_ticks", "agent_ticks", "obstacle_contacts")}
        for k in ("min_separation", "min_clearance"):
            if not math.isfinite(d[k]):
                d[k] = None
        return d


@dataclass
class RunResult:
    scenario: Scenario
    trace: list[TraceRecord]
    metrics: RunMetrics


def _decide(sc: Scenario, me: AgentState, snapshot: Sequence[AgentState], obstacles) -> ControlInput:
    cfg = sc.config
    if sc.method == "orca":
        if me.mode == Mode.HOLD:
            return step_agent(me, snapshot, obstacles, sc.limits, sc.model, cfg)
        if sc.model is Model.SI:
            return orca_step(me, snapshot, sc.limits, cfg.orca_tau, cfg.sensing_radius, cfg.si_slow_radius)
        return orca_step_di(me, snapshot, sc.limits, cfg.orca_tau, cfg.sensing_radius, cfg.si_slow_radius)
    return step_agent(me, snapshot, obstacles, sc.limits, sc.model, cfg)


def _integrate(s: AgentState, u: Vec2, model: Model, limits: KinodynamicLimits) -> AgentState:
    dt = limits.dt
    if model is Model.SI:
        return s.with_(p=Vec2(s.p.x + u.x * dt, s.p.y + u.y * dt), v=u)
    vx = s.v.x + u.x * dt
    vy = s.v.y + u.y * dt
    sp = math.hypot(vx, vy)
    if sp > limits.v_max:
        k = limits.v_max / sp
        vx *= k
        vy *= k
    return s.with_(p=Vec2(s.p.x + vx * dt, s.p.y + vy * dt), v=Vec2(vx, vy))


def run(
    scenario: Scenario,
    order: Optional[Sequence[int]] = None,
    on_tick: Optional[Callable[[int, list[AgentState]], None]] = None,
    record: bool = True,
) -> RunResult:
    """Simulate until every agent has arrived or ``max_ticks`` elapse.

    ``order`` permutes the per-agent evaluation order; results do not
    depend on it because every decision reads the same tick-start snapshot.
    """
    sc = scenario
    cfg = sc.config
    limits = sc.limits
    dt = limits.dt
    states = sc.initial_states()
    n = len(states)
    ids = list(range(n)) if order is None else list(order)
    if sorted(ids) != list(range(n)):
        raise ValueError("order must be a permutation of agent ids")
    obstacles = list(sc.obstacles)
    coord = DeadlockCoordinator(limits, cfg.workspace, cfg.sensing_radius, cfg.eps_p, cfg.eps_v,
                                cfg.deadlock_patience, enabled=sc.deadlock_enabled and sc.method == "vrvo")
    metrics = RunMetrics(n_agents=n)
    arrived = [False] * n
    trace: list[TraceRecord] = []
    step_times: list[float] = []

    def record_tick(tick: int, states: list[AgentState], us: dict[int, Vec2], flags: dict[int, tuple[str, ...]]):
        if not record:
            return
        for s in states:
            trace.append(TraceRecord(tick, s.id, s.p, s.v, us.get(s.id, Vec2(0.0, 0.0)), s.mode, flags.get(s.id, ())))

    _check_pairs(states, metrics)
    for i, s in enumerate(states):
        if at_goal(s, cfg.eps_p, cfg.eps_v):
            arrived[i] = True
    record_tick(0, states, {}, {i: ("arrived",) for i in range(n) if arrived[i]})

    tick = 0
    while tick < sc.max_ticks and not all(arrived):
        tick += 1
        # deadlock bookkeeping reads and amends the tick-start snapshot
        by_id = {s.id: s for s in states}
        coord.update_modes(by_id)
        coord.initiate(by_id)
        snapshot = [by_id[i] for i in range(n)]
        switching = coord.switching()

        controls: dict[int, ControlInput] = {}
        for i in ids:
            me = snapshot[i]
            if i in switching or me.mode == Mode.HOLD:
                continue
            t0 = time.perf_counter()
            controls[i] = _decide(sc, me, snapshot, obstacles)
            step_times.append(time.perf_counter() - t0)

        moves = coord.advance(by_id, dt)
        new_states: list[AgentState] = []
        us: dict[int, Vec2] = {}
        for i in range(n):
            s = by_id[i]
            if i in moves:
                p, v = moves[i]
                new = s.with_(p=p, v=v)
            elif i not in controls:
                # held in place for a neighboring switch
                new = s.with_(v=Vec2(0.0, 0.0))
            else:
                ci = controls[i]
                us[i] = ci.u
                new = _integrate(s, ci.u, sc.model, limits)
                d = ci.diagnostics
                if d.fallback_used:
                    metrics.fallback_ticks += 1
                if d.infeasible:
                    metrics.infeasible_ticks += 1
                metrics.agent_ticks += 1
            new_states.append(new)
        states = new_states
        obstacles = [
            ObstacleState(Vec2(o.p.x + o.v.x * dt, o.p.y + o.v.y * dt), o.R, o.v_max_obs, o.a_max_obs, o.v)
            for o in obstacles
        ]

        _check_pairs(states, metrics)
        _check_obstacles(states, obstacles, metrics)
        flags: dict[int, tuple[str, ...]] = {}
        for i, s in enumerate(states):
            if i in moves:
                # a switch drags agents off their goals; arrival has to be re-earned
                arrived[i] = at_goal(s, cfg.eps_p, cfg.eps_v)
            elif not arrived[i] and at_goal(s, cfg.eps_p, cfg.eps_v):
                arrived[i] = True
        for i in range(n):
            fl = []
            if i in moves:
                fl.append("switching")
            ci = controls.get(i)
            if ci is not None:
                if ci.diagnostics.fallback_used:
                    fl.append("fallback")
                if ci.diagnostics.infeasible:
                    fl.append("infeasible")
            if arrived[i]:
                fl.append("arrived")
            flags[i] = tuple(fl)
        if all(arrived) and metrics.makespan_ticks is None:
            metrics.makespan_ticks = tick
        record_tick(tick, states, us, flags)
        if on_tick is not None:
            on_tick(tick, states)

    metrics.ticks = tick
    metrics.arrived_count = sum(arrived)
    metrics.deadlock_events = coord.events.as_dict()
    metrics.deadlocked_at_end = sum(1 for s in states if s.mode == Mode.DEADLOCK)
    if step_times:
        metrics.mean_step_ms = 1000.0 * sum(step_times) / len(step_times)
        metrics.max_step_ms = 1000.0 * max(step_times)
    return RunResult(sc, trace, metrics)


def _check_pairs(states: Sequence[AgentState], metrics: RunMetrics) -> None:
    """Track the closest center distance and the smallest rim-to-rim gap."""
    n = len(states)
    for i in range(n):
        a = states[i]
        for j in range(i + 1, n):
            b = states[j]
            dist = math.hypot(a.p.x - b.p.x, a.p.y - b.p.y)
            gap = dist - a.R - b.R
            if dist < metrics.min_separation:
                metrics.min_separation = dist
            if gap < metrics.min_clearance:
                metrics.min_clearance = gap
            if gap < -COLLISION_TOL:
                metrics.collision_count += 1


def _check_obstacles(states, obstacles, metrics: RunMetrics) -> None:
    for s in states:
        for o in obstacles:
            if (s.p - o.p).norm() < s.R + o.R - COLLISION_TOL:
                metrics.obstacle_contacts += 1
