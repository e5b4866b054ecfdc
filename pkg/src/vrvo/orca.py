"""ORCA comparison baseline.

Each neighbor contributes one half-plane of permitted velocities, built by
projecting the relative velocity onto the boundary of the truncated
velocity obstacle and taking half of the correction. The preferred
velocity is then projected onto the intersection of those half-planes and
the speed disk with an incremental 2-D linear program; when the set is
empty the velocity minimizing the largest violation is used instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .braking import KinodynamicLimits
from .bvc import AgentState, sense
from .controller import ControlInput, Diagnostics, Model
from .geom2d import ZERO, Vec2

RVO_EPS = 1e-5


@dataclass(frozen=True, slots=True)
class OrcaPlane:
    """Permitted velocities ``{v : (v - point) . normal >= 0}``."""

    point: Vec2
    normal: Vec2

    @property
    def direction(self) -> Vec2:
        # boundary direction with the permitted side on its left
        return Vec2(self.normal.y, -self.normal.x)

    def violation(self, v: Vec2) -> float:
        return max(0.0, -(v - self.point).dot(self.normal))


def orca_plane(me: AgentState, other: AgentState, tau: float, dt: float) -> OrcaPlane:
    rel_pos = other.p - me.p
    rel_vel = me.v - other.v
    dist_sq = rel_pos.norm_sq()
    r = me.R + other.R
    r_sq = r * r
    if dist_sq > r_sq:
        inv_tau = 1.0 / tau
        w = rel_vel - rel_pos * inv_tau
        w_len_sq = w.norm_sq()
        dot1 = w.dot(rel_pos)
        if dot1 < 0.0 and dot1 * dot1 > r_sq * w_len_sq:
            # closest boundary point lies on the cut-off circle
            w_len = math.sqrt(w_len_sq)
            unit_w = w / w_len
            direction = Vec2(unit_w.y, -unit_w.x)
            u = unit_w * (r * inv_tau - w_len)
        else:
            leg = math.sqrt(dist_sq - r_sq)
            if rel_pos.cross(w) > 0.0:
                direction = Vec2(rel_pos.x * leg - rel_pos.y * r, rel_pos.x * r + rel_pos.y * leg) / dist_sq
            else:
                direction = -Vec2(rel_pos.x * leg + rel_pos.y * r, -rel_pos.x * r + rel_pos.y * leg) / dist_sq
            u = direction * rel_vel.dot(direction) - rel_vel
    else:
        # already overlapping: resolve within one step
        inv_dt = 1.0 / dt
        w = rel_vel - rel_pos * inv_dt
        w_len = w.norm()
        unit_w = w / w_len if w_len > 0.0 else Vec2(1.0, 0.0)
        direction = Vec2(unit_w.y, -unit_w.x)
        u = unit_w * (r * inv_dt - w_len)
    point = me.v + u * 0.5
    normal = Vec2(-direction.y, direction.x)
    return OrcaPlane(point, normal)


def _lp1(planes: Sequence[OrcaPlane], i: int, radius: float, opt: Vec2, direction_opt: bool):
    line = planes[i]
    d = line.direction
    pt = line.point
    dot = pt.dot(d)
    disc = dot * dot + radius * radius - pt.norm_sq()
    if disc < 0.0:
        return None
    sq = math.sqrt(disc)
    t_left = -dot - sq
    t_right = -dot + sq
    for j in range(i):
        dj = planes[j].direction
        denom = d.cross(dj)
        numer = dj.cross(pt - planes[j].point)
        if abs(denom) <= RVO_EPS:
            if numer < 0.0:
                return None
            continue
        t = numer / denom
        if denom >= 0.0:
            t_right = min(t_right, t)
        else:
            t_left = max(t_left, t)
        if t_left > t_right:
            return None
    if direction_opt:
        t = t_right if opt.dot(d) > 0.0 else t_left
    else:
        t = d.dot(opt - pt)
        t = min(max(t, t_left), t_right)
    return pt + d * t


def _lp2(planes: Sequence[OrcaPlane], radius: float, opt: Vec2, direction_opt: bool):
    """Returns (failed index or len(planes), result)."""
    if direction_opt:
        result = opt * radius
    elif opt.norm_sq() > radius * radius:
        result = opt.unit() * radius
    else:
        result = opt
    for i, line in enumerate(planes):
        if line.direction.cross(line.point - result) > 0.0:
            tmp = _lp1(planes, i, radius, opt, direction_opt)
            if tmp is None:
                return i, result
            result = tmp
    return len(planes), result


def _lp3(planes: Sequence[OrcaPlane], begin: int, radius: float, result: Vec2) -> Vec2:
    """Minimize the largest violation, starting from the first failing plane."""
    distance = 0.0
    for i in range(begin, len(planes)):
        li = planes[i]
        if li.direction.cross(li.point - result) > distance:
            proj: list[OrcaPlane] = []
            for j in range(i):
                lj = planes[j]
                det = li.direction.cross(lj.direction)
                if abs(det) <= RVO_EPS:
                    if li.direction.dot(lj.direction) > 0.0:
                        continue
                    point = (li.point + lj.point) * 0.5
                else:
                    point = li.point + li.direction * (lj.direction.cross(li.point - lj.point) / det)
                direction = (lj.direction - li.direction).unit()
                proj.append(OrcaPlane(point, Vec2(-direction.y, direction.x)))
            opt = Vec2(-li.direction.y, li.direction.x)
            fail, res = _lp2(proj, radius, opt, True)
            if fail < len(proj):
                # numerical corner case: keep the previous result
                pass
            else:
                result = res
            distance = li.direction.cross(li.point - result)
    return result


def solve_orca(planes: Sequence[OrcaPlane], v_pref: Vec2, v_max: float) -> tuple[Vec2, bool]:
    """Velocity closest to ``v_pref`` under ``planes``; flag is True when infeasible."""
    fail, result = _lp2(planes, v_max, v_pref, False)
    if fail < len(planes):
        return _lp3(planes, fail, v_max, result), True
    return result, False


def preferred_velocity(me: AgentState, v_max: float, slow_radius: float = 1.0) -> Vec2:
    d = me.g - me.p
    n = d.norm()
    if n == 0.0:
        return ZERO
    speed = v_max if n > slow_radius else v_max * n / max(slow_radius, 1e-12)
    return d * (speed / n)


def orca_velocity(
    me: AgentState,
    neighbors: Sequence[AgentState],
    limits: KinodynamicLimits,
    tau: float = 2.0,
    sensing_radius: float = 5.0,
    slow_radius: float = 1.0,
) -> tuple[Vec2, bool, list[OrcaPlane]]:
    sensed = sense(me, neighbors, sensing_radius)
    planes = [orca_plane(me, o, tau, limits.dt) for o in sensed]
    v_pref = preferred_velocity(me, limits.v_max, slow_radius)
    v, infeasible = solve_orca(planes, v_pref, limits.v_max)
    return v, infeasible, planes


def orca_step(
    me: AgentState,
    neighbors: Sequence[AgentState],
    limits: KinodynamicLimits,
    tau: float = 2.0,
    sensing_radius: float = 5.0,
    slow_radius: float = 1.0,
) -> ControlInput:
    v, infeasible, _ = orca_velocity(me, neighbors, limits, tau, sensing_radius, slow_radius)
    return ControlInput(v, Model.SI, Diagnostics(infeasible=infeasible))


def track_velocity(v_target: Vec2, v: Vec2, limits: KinodynamicLimits) -> Vec2:
    """Proportional acceleration toward ``v_target`` (gain 1/dt), clamped to ``a_max``."""
    u = (v_target - v) / limits.dt
    n = u.norm()
    if n > limits.a_max:
        u = u * (limits.a_max / n)
    return u


def orca_step_di(
    me: AgentState,
    neighbors: Sequence[AgentState],
    limits: KinodynamicLimits,
    tau: float = 2.0,
    sensing_radius: float = 5.0,
    slow_radius: float = 1.0,
) -> ControlInput:
    v, infeasible, _ = orca_velocity(me, neighbors, limits, tau, sensing_radius, slow_radius)
    return ControlInput(track_velocity(v, me.v, limits), Model.DI, Diagnostics(infeasible=infeasible))
