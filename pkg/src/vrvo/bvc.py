"""Voronoi cells, buffered Voronoi cells and obstacle retraction."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

from .geom2d import ConvexCell, HalfPlane, Vec2, clip_cell, intersect_halfplanes

log = logging.getLogger(__name__)

# a Voronoi edge shorter than this does not make two agents adjacent
ADJACENT_EDGE_MIN = 1e-6


class Mode(str, enum.Enum):
    DEFAULT = "DEFAULT"
    HOLD = "HOLD"
    DEADLOCK = "DEADLOCK"


@dataclass(frozen=True, slots=True)
class AgentState:
    id: int
    p: Vec2
    v: Vec2
    g: Vec2
    R: float
    mode: Mode = Mode.DEFAULT

    def __post_init__(self):
        if not self.R > 0.0:
            raise ValueError(f"agent {self.id}: radius must be positive")
        if not (self.p.is_finite() and self.v.is_finite() and self.g.is_finite()):
            raise ValueError(f"agent {self.id}: non-finite state")

    def with_(self, **kw) -> "AgentState":
        return replace(self, **kw)


@dataclass(frozen=True, slots=True)
class ObstacleState:
    """Circular moving obstacle whose motion we know nothing about beyond its limits.

    ``v`` is only used by the simulator to move the obstacle; the planner
    reasons with ``v_max_obs`` and ``a_max_obs``.
    """

    p: Vec2
    R: float
    v_max_obs: float
    a_max_obs: float
    v: Vec2 = Vec2(0.0, 0.0)

    def __post_init__(self):
        if not self.R > 0.0:
            raise ValueError("obstacle radius must be positive")
        if self.v_max_obs < 0.0:
            raise ValueError("obstacle speed bound must be non-negative")
        if not self.a_max_obs > 0.0:
            raise ValueError("obstacle deceleration must be positive")


@dataclass(frozen=True, slots=True)
class NeighborSets:
    sensed: tuple[int, ...]
    voronoi_adjacent: tuple[int, ...]


@dataclass(frozen=True, slots=True)
class BvcResult:
    cell: ConvexCell
    neighbors: NeighborSets
    voronoi: ConvexCell
    center_outside: bool = False
    warnings: tuple[str, ...] = field(default=())

    def __iter__(self):
        # lets callers unpack ``cell, nsets = compute_bvc(...)``
        yield self.cell
        yield self.neighbors


def bisector_halfplane(p_self: Vec2, p_other: Vec2, buffer: float) -> HalfPlane:
    """Points on ``p_self``'s side of the bisector, pulled in by ``buffer``.

    Writing d = p_other - p_self, this is (p - (p_self + p_other)/2) . d
    + buffer * |d| <= 0, i.e. the buffered Voronoi constraint oriented so
    the agent's own position satisfies it.
    """
    dx = p_other.x - p_self.x
    dy = p_other.y - p_self.y
    dist = math.hypot(dx, dy)
    nx, ny = dx / dist, dy / dist
    off = nx * 0.5 * (p_self.x + p_other.x) + ny * 0.5 * (p_self.y + p_other.y) - buffer
    return HalfPlane(Vec2(nx, ny), off)


def sense(me: AgentState, others: Sequence[AgentState], sensing_radius: float) -> list[AgentState]:
    r2 = sensing_radius * sensing_radius
    out = []
    for o in others:
        if o.id == me.id:
            continue
        if (o.p - me.p).norm_sq() <= r2:
            out.append(o)
    return out


def compute_bvc(
    me: AgentState,
    neighbors: Sequence[AgentState],
    workspace: ConvexCell,
    sensing_radius: float = math.inf,
) -> BvcResult:
    """Buffered Voronoi cell of ``me`` against the sensed neighbors.

    ``voronoi_adjacent`` is read off the *unbuffered* cell: a neighbor is
    adjacent when its bisector contributes an edge longer than 1e-6 m.
    """
    sensed = [o for o in neighbors if o.id != me.id and (o.p - me.p).norm() <= sensing_radius]
    buffered: list[HalfPlane] = []
    plain: list[HalfPlane] = []
    ids: list[int] = []
    warnings: list[str] = []
    for o in sensed:
        if (o.p - me.p).norm() == 0.0:
            warnings.append(f"coincident with agent {o.id}")
            continue
        plain.append(bisector_halfplane(me.p, o.p, 0.0))
        buffered.append(bisector_halfplane(me.p, o.p, me.R))
        ids.append(o.id)

    voronoi = intersect_halfplanes(plain, workspace, me.p)
    adjacent = set()
    if not voronoi.empty:
        for k, label in enumerate(voronoi.edge_labels):
            if label < 0:
                continue
            a, b = voronoi.edge(k)
            if (b - a).norm() > ADJACENT_EDGE_MIN:
                adjacent.add(ids[label])
    cell = intersect_halfplanes(buffered, workspace, me.p)
    outside = cell.empty or not cell.contains(me.p, 1e-9)
    if outside:
        warnings.append("agent center outside its buffered cell")
    nsets = NeighborSets(tuple(o.id for o in sensed), tuple(i for i in ids if i in adjacent))
    return BvcResult(cell, nsets, voronoi, outside, tuple(warnings))


def obstacle_clearance(s_obs: float, v_max_obs: float, a_max: float) -> float:
    """Slack left between an obstacle and the cell after it brakes.

    ``s_obs`` is the obstacle center's distance to the cell boundary and
    the obstacle needs ``v_max_obs**2 / (2 a_max)`` to come to rest.
    """
    return s_obs - v_max_obs * v_max_obs / (2.0 * a_max)


@dataclass(frozen=True, slots=True)
class ObstacleBuffering:
    cell: ConvexCell
    clearances: tuple[float, ...]
    warnings: tuple[str, ...] = ()


def buffer_for_obstacles(
    cell: ConvexCell,
    me: AgentState,
    obstacles: Sequence[ObstacleState],
    decel: str = "obstacle",
    agent_a_max: float | None = None,
) -> ObstacleBuffering:
    """Shrink ``cell`` so every obstacle keeps room to brake.

    Each obstacle acts as an extra generator: its bisector with the agent,
    buffered by the agent radius plus the obstacle radius, is added and then
    pulled further toward the agent by the obstacle's stopping distance.
    ``decel`` picks whose deceleration limit that stopping distance uses.
    A retraction that would put the agent outside its own cell is capped
    at the agent's position and reported in ``warnings``.
    """
    if not obstacles:
        return ObstacleBuffering(cell, ())
    current = cell
    clearances = []
    warnings = []
    for ob in obstacles:
        a = ob.a_max_obs if decel == "obstacle" else agent_a_max
        if a is None or not a > 0.0:
            raise ValueError("a positive deceleration is required for obstacle buffering")
        if (ob.p - me.p).norm() == 0.0:
            warnings.append("agent coincides with an obstacle")
            continue
        generator = bisector_halfplane(me.p, ob.p, me.R + ob.R)
        stop = ob.v_max_obs * ob.v_max_obs / (2.0 * a)
        with_gen = clip_cell(current, generator)
        s_obs = _distance_to_boundary(with_gen, ob.p) if not with_gen.empty else 0.0
        slack = obstacle_clearance(s_obs, ob.v_max_obs, a)
        clearances.append(slack)
        # never retract past the agent's own center
        room = -generator.signed_distance(me.p)
        retract = stop
        if slack < 0.0:
            warnings.append(f"obstacle at {tuple(ob.p)} cannot stop before the cell (slack {slack:.3f} m)")
        if retract > room:
            warnings.append(f"obstacle at {tuple(ob.p)}: retraction capped at the agent position")
            retract = room
        current = clip_cell(current, generator.shifted(retract))
        if current.empty:
            warnings.append("obstacle buffering emptied the cell")
            break
    for w in warnings:
        log.warning("agent %d: %s", me.id, w)
    return ObstacleBuffering(current, tuple(clearances), tuple(warnings))


def _distance_to_boundary(cell: ConvexCell, p: Vec2) -> float:
    """Distance from ``p`` (usually outside) to the closest boundary point."""
    q = cell.closest_point(p)
    if q == p:
        return max(0.0, cell.depth(p))
    return (q - p).norm()
