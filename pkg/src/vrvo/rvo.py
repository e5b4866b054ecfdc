"""Reciprocal velocity cones laid over the buffered cell boundary.

A neighbor's cone lives in velocity space; it is drawn in the workspace by
mapping a velocity ``w`` to the point ``p_self + sigma * w``. A boundary
point ``q`` is then blocked when the velocity pointing at it lies in some
cone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .bvc import AgentState
from .geom2d import (
    ANGLE_TOL,
    BoundaryArc,
    ConvexCell,
    Vec2,
    VelocityCone,
    angle_between,
    boundary_minus_cones,
    cone_contains,
)

APEX_MODES = ("rvo", "vo_center")
HALF_ANGLE_CAP = math.pi / 2 - 1e-6
NUDGE = 1e-9
DIST_TOL = 1e-9


@dataclass(frozen=True, slots=True)
class TargetPoint:
    p_rvo: Vec2
    deviation: float
    feasible: bool
    edge: int = -1


@dataclass(frozen=True, slots=True)
class RvoSuperposition:
    cones: tuple[VelocityCone, ...]
    free_arcs: tuple[BoundaryArc, ...]
    scale_sigma: float


def build_cones(
    me: AgentState,
    neighbors: Sequence[AgentState],
    sigma: float = 1.0,
    apex_mode: str = "rvo",
    tau: Optional[float] = None,
) -> list[VelocityCone]:
    """One cone per neighbor, in workspace coordinates.

    With ``apex_mode="rvo"`` the apex sits at ``p + sigma*(v_i + v_j)/2``;
    ``"vo_center"`` puts it on the agent itself. A finite ``tau`` cuts the
    cone at ``sigma*(|p_ji| - R_ij)/tau`` from the apex.
    """
    if apex_mode not in APEX_MODES:
        raise ValueError(f"unknown apex mode {apex_mode!r}")
    cones = []
    for o in neighbors:
        if o.id == me.id:
            continue
        rel = o.p - me.p
        dist = rel.norm()
        r_sum = me.R + o.R
        clamped = False
        if dist <= 0.0:
            axis = Vec2(1.0, 0.0)
            half = HALF_ANGLE_CAP
            clamped = True
        else:
            axis = rel / dist
            if dist <= r_sum:
                half = HALF_ANGLE_CAP
                clamped = True
            else:
                half = min(math.asin(r_sum / dist), HALF_ANGLE_CAP)
                clamped = half == HALF_ANGLE_CAP
        if apex_mode == "rvo":
            apex = Vec2(
                me.p.x + sigma * 0.5 * (me.v.x + o.v.x),
                me.p.y + sigma * 0.5 * (me.v.y + o.v.y),
            )
        else:
            apex = me.p
        trunc = None
        if tau is not None and math.isfinite(tau) and dist > r_sum:
            trunc = sigma * (dist - r_sum) / tau
        cones.append(VelocityCone(apex, axis, half, trunc, clamped, o.id))
    return cones


def crowd_center(me: AgentState, neighbors: Sequence[AgentState]) -> Optional[Vec2]:
    """Centroid of the other agents' positions, or None when there are none."""
    xs = [o.p for o in neighbors if o.id != me.id]
    if not xs:
        return None
    # sort first so the float sum does not depend on neighbor order
    xs.sort()
    return Vec2(math.fsum(p.x for p in xs) / len(xs), math.fsum(p.y for p in xs) / len(xs))


def _is_free(p: Vec2, cones: Sequence[VelocityCone]) -> bool:
    for c in cones:
        if cone_contains(c, p):
            return False
    return True


def select_target(
    cell: ConvexCell,
    me: AgentState,
    cones: Sequence[VelocityCone],
    arcs: Optional[Sequence[BoundaryArc]] = None,
    crowd: Optional[Vec2] = None,
) -> TargetPoint:
    """Free boundary point whose bearing is closest to the goal bearing.

    Candidates are the goal-ray exit point, every arc endpoint (nudged 1e-9 m
    into its arc) and every polygon vertex, kept only if they sit on a free
    arc and outside all cones. Ties within 1e-9 rad go to the nearer point.
    If distances tie as well (within 1e-9 m) and ``crowd`` is given (usually
    the neighbors' centroid), the point farther from it wins; the lower edge
    index settles the rest. The crowd rule commutes with reflections, so
    mirrored scenes make mirrored choices.
    """
    goal_dir = me.g - me.p
    if arcs is None:
        arcs = boundary_minus_cones(cell, me.p, cones)
    if not arcs or goal_dir.norm() == 0.0:
        return TargetPoint(me.p, math.pi, False)

    candidates: list[tuple[int, float]] = []
    exit_ = cell.ray_exit(me.p, goal_dir)
    if exit_ is not None:
        candidates.append((exit_[0], exit_[1]))
    for arc in arcs:
        for k, t0, t1 in arc.pieces:
            a, b = cell.edge(k)
            length = (b - a).norm()
            nudge = min(NUDGE / length, 0.5 * (t1 - t0)) if length > 0.0 else 0.0
            candidates.append((k, t0 + nudge))
            candidates.append((k, t1 - nudge))
    n = len(cell.vertices)
    for k in range(n):
        candidates.append((k, 0.0))

    best: Optional[tuple[float, float, int, Vec2]] = None
    for k, t in candidates:
        if not any(arc.covers(k, t) for arc in arcs):
            continue
        q = cell.point_at(k, t)
        if not _is_free(q, cones):
            continue
        d = q - me.p
        dist = d.norm()
        if dist == 0.0:
            continue
        dev = angle_between(d, goal_dir)
        spread = -(q - crowd).norm() if crowd is not None else 0.0
        key = (dev, dist, spread, k)
        if best is None or _better(key, best[:4]):
            best = (dev, dist, spread, k, q)
    if best is None:
        return TargetPoint(me.p, math.pi, False)
    return TargetPoint(best[4], best[0], True, best[3])


def _better(a: tuple[float, float, float, int], b: tuple[float, float, float, int]) -> bool:
    if a[0] < b[0] - ANGLE_TOL:
        return True
    if a[0] > b[0] + ANGLE_TOL:
        return False
    if a[1] < b[1] - DIST_TOL:
        return True
    if a[1] > b[1] + DIST_TOL:
        return False
    if a[2] < b[2] - DIST_TOL:
        return True
    if a[2] > b[2] + DIST_TOL:
        return False
    return a[3] < b[3]


def superpose(
    cell: ConvexCell,
    me: AgentState,
    neighbors: Sequence[AgentState],
    sigma: float = 1.0,
    apex_mode: str = "rvo",
    tau: Optional[float] = None,
) -> tuple[RvoSuperposition, TargetPoint]:
    cones = build_cones(me, neighbors, sigma, apex_mode, tau)
    arcs = boundary_minus_cones(cell, me.p, cones)
    target = select_target(cell, me, cones, arcs, crowd_center(me, neighbors))
    return RvoSuperposition(tuple(cones), tuple(arcs), sigma), target
