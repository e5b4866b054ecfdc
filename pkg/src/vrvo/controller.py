"""Per-agent decision step: cell, cones, target, control input."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .braking import BrakingPlan, KinodynamicLimits, plan_braking
from .bvc import AgentState, Mode, ObstacleState, buffer_for_obstacles, compute_bvc, sense
from .config import VrvoConfig
from .geom2d import ZERO, ConvexCell, Vec2
from .rvo import TargetPoint, build_cones, crowd_center, select_target

CONTAIN_TOL = 1e-9
_EPS_U = 1e-12


class Model(str, enum.Enum):
    SI = "si"
    DI = "di"


@dataclass(slots=True)
class Diagnostics:
    target: Optional[TargetPoint] = None
    plan: Optional[BrakingPlan] = None
    fallback_used: bool = False
    infeasible: bool = False
    center_outside: bool = False
    at_goal: bool = False
    hold: bool = False
    t_h_used: Optional[float] = None
    cell: Optional[ConvexCell] = None
    adjacent: tuple[int, ...] = ()
    notes: list[str] = field(default_factory=list)


@dataclass(slots=True)
class ControlInput:
    u: Vec2
    model: Model
    diagnostics: Diagnostics


def _clamp(u: Vec2, limit: float) -> Vec2:
    n = u.norm()
    if n > limit:
        return u * (limit / n)
    return u


def at_goal(me: AgentState, eps_p: float, eps_v: float) -> bool:
    return (me.g - me.p).norm() < eps_p and me.v.norm() < eps_v


def si_input(p: Vec2, p_rvo: Vec2, v_max: float, slow_radius: float = 1.0) -> Vec2:
    """Velocity command toward ``p_rvo``: full speed, or the raw offset when close."""
    d = p_rvo - p
    n = d.norm()
    if n <= slow_radius:
        return _clamp(d, v_max)
    if n == 0.0:
        return ZERO
    return d * (v_max / n)


def di_input(v: Vec2, v_int: Vec2, t_h: float, a_max: float) -> Vec2:
    """Constant acceleration reaching ``v_int`` after ``t_h``, clamped to ``a_max``."""
    return _clamp(Vec2((v_int.x - v.x) / t_h, (v_int.y - v.y) / t_h), a_max)


def _step(p: Vec2, v: Vec2, u: Vec2, limits: KinodynamicLimits) -> tuple[Vec2, Vec2]:
    """One semi-implicit Euler tick, speed clamped like the simulator."""
    dt = limits.dt
    nvx = v.x + u.x * dt
    nvy = v.y + u.y * dt
    s = math.hypot(nvx, nvy)
    if s > limits.v_max:
        k = limits.v_max / s
        nvx *= k
        nvy *= k
    return Vec2(p.x + nvx * dt, p.y + nvy * dt), Vec2(nvx, nvy)


def braking_accel(v: Vec2, limits: KinodynamicLimits) -> Vec2:
    """Deceleration that brings the agent to rest as fast as ``a_max`` allows."""
    s = v.norm()
    if s == 0.0:
        return ZERO
    mag = min(limits.a_max, s / limits.dt)
    return Vec2(-v.x / s * mag, -v.y / s * mag)


def braking_rollout(p: Vec2, v: Vec2, limits: KinodynamicLimits, max_steps: int = 10_000):
    """Positions visited while braking to rest (excluding the start)."""
    out = []
    for _ in range(max_steps):
        if v.x == 0.0 and v.y == 0.0:
            break
        p, v = _step(p, v, braking_accel(v, limits), limits)
        out.append(p)
    return out


def _brake_path_inside(p: Vec2, v: Vec2, cell: ConvexCell, limits: KinodynamicLimits) -> bool:
    for _ in range(10_000):
        if v.x == 0.0 and v.y == 0.0:
            return True
        p, v = _step(p, v, braking_accel(v, limits), limits)
        if not cell.contains(p, CONTAIN_TOL):
            return False
    return False


def verify_containment(
    me: AgentState,
    u: Vec2,
    cell: ConvexCell,
    limits: KinodynamicLimits,
    t_h: Optional[float] = None,
) -> bool:
    """Does holding ``u`` for the horizon and then braking stay inside ``cell``?

    The rollout uses the simulator's integrator. Braking after the first
    tick is checked too, since that is what happens when the next tick
    finds no admissible plan.
    """
    th = limits.t_h if t_h is None else t_h
    steps = max(1, int(round(th / limits.dt)))
    p, v = me.p, me.v
    for k in range(steps):
        p, v = _step(p, v, u, limits)
        if not cell.contains(p, CONTAIN_TOL):
            return False
        if k == 0 and steps > 1 and not _brake_path_inside(p, v, cell, limits):
            return False
    return _brake_path_inside(p, v, cell, limits)


def safe_brake(me: AgentState, cell: Optional[ConvexCell], limits: KinodynamicLimits) -> tuple[Vec2, bool]:
    """Braking input, bent back into ``cell`` if plain braking would leave it.

    Returns the input and whether the next position stays inside.
    """
    u = braking_accel(me.v, limits)
    if cell is None or cell.empty:
        return u, False
    p_next, _ = _step(me.p, me.v, u, limits)
    if cell.contains(p_next, CONTAIN_TOL):
        return u, True
    dt = limits.dt
    drift = Vec2(me.p.x + me.v.x * dt, me.p.y + me.v.y * dt)
    reach = limits.a_max * dt * dt
    candidates = [cell.closest_point(p_next), cell.closest_point(drift)]
    for k in range(32):
        ang = 2.0 * math.pi * k / 32
        candidates.append(Vec2(drift.x + reach * math.cos(ang), drift.y + reach * math.sin(ang)))
    best = None
    best_d = math.inf
    for q in candidates:
        off = q - drift
        if off.norm() > reach * (1 + 1e-9):
            off = off * (reach / off.norm())
            q = drift + off
        if not cell.contains(q, CONTAIN_TOL):
            continue
        d = (q - p_next).norm_sq()
        if d < best_d:
            best, best_d = q, d
    if best is None:
        return u, False
    cand = _clamp((best - drift) / (dt * dt), limits.a_max)
    p_chk, _ = _step(me.p, me.v, cand, limits)
    if cell.contains(p_chk, CONTAIN_TOL):
        return cand, True
    return u, False


def goal_target(me: AgentState, cell: ConvexCell) -> Optional[TargetPoint]:
    """The goal itself, when it already lies inside the cell."""
    if cell.contains(me.g, 0.0):
        return TargetPoint(me.g, 0.0, True)
    return None


def step_agent(
    me: AgentState,
    neighbors: Sequence[AgentState],
    obstacles: Sequence[ObstacleState],
    limits: KinodynamicLimits,
    model: Model | str,
    config: VrvoConfig | None = None,
) -> ControlInput:
    cfg = config or VrvoConfig()
    model = Model(model)
    diag = Diagnostics()

    if me.mode == Mode.HOLD:
        diag.hold = True
        return ControlInput(ZERO, model, diag)

    sensed = sense(me, neighbors, cfg.sensing_radius)
    bvc = compute_bvc(me, sensed, cfg.workspace)
    cell = bvc.cell
    diag.adjacent = bvc.neighbors.voronoi_adjacent
    if obstacles and not cell.empty:
        a_agent = limits.a_max
        cell = buffer_for_obstacles(cell, me, obstacles, cfg.obstacle_decel, a_agent).cell
    diag.cell = cell

    if bvc.center_outside or cell.empty or not cell.contains(me.p, CONTAIN_TOL):
        diag.center_outside = True
        return _fallback(me, None if cell.empty else cell, limits, model, diag)

    if at_goal(me, cfg.eps_p, cfg.eps_v):
        diag.at_goal = True
        if model is Model.SI:
            return ControlInput(ZERO, model, diag)
        u, _ = safe_brake(me, cell, limits)
        return ControlInput(u, model, diag)

    target = goal_target(me, cell)
    if target is None:
        cones = build_cones(me, sensed, cfg.sigma, cfg.apex_mode, cfg.tau)
        target = select_target(cell, me, cones, crowd=crowd_center(me, sensed))
    diag.target = target
    if not target.feasible:
        diag.infeasible = True
        return _fallback(me, cell, limits, model, diag)

    if model is Model.SI:
        u = si_input(me.p, target.p_rvo, limits.v_max, cfg.si_slow_radius)
        return ControlInput(u, model, diag)

    th = limits.t_h
    for _ in range(cfg.max_halvings + 1):
        plan = plan_braking(me, target.p_rvo, limits, th, cfg.axis_decel)
        diag.plan = plan
        if plan.feasible:
            u = di_input(me.v, plan.v_int, th, limits.a_max)
            if verify_containment(me, u, cell, limits, th):
                diag.t_h_used = th
                return ControlInput(u, model, diag)
        if th <= limits.dt * (1 + 1e-9):
            break
        th = max(th / 2.0, limits.dt)
    diag.infeasible = diag.plan is not None and not diag.plan.feasible
    return _fallback(me, cell, limits, model, diag)


def _fallback(
    me: AgentState,
    cell: Optional[ConvexCell],
    limits: KinodynamicLimits,
    model: Model,
    diag: Diagnostics,
) -> ControlInput:
    diag.fallback_used = True
    if model is Model.SI:
        return ControlInput(ZERO, model, diag)
    u, ok = safe_brake(me, cell, limits)
    if not ok:
        diag.notes.append("braking leaves the cell")
    return ControlInput(u, model, diag)
