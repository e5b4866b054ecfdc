"""Planar geometry used by the navigation stack.

Everything here works on plain Python floats. The polygons involved have a
handful of vertices and the neighbor sets are small, so per-call overhead
matters far more than vectorization; numpy is only used in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

GEOM_TOL = 1e-7
ANGLE_TOL = 1e-9
MERGE_TOL = 1e-9
# Sidedness tolerance used while clipping.
CLIP_EPS = 1e-12


class Vec2(NamedTuple):
    x: float
    y: float

    def __add__(self, o):  # type: ignore[override]
        return Vec2(self.x + o[0], self.y + o[1])

    def __sub__(self, o):
        return Vec2(self.x - o[0], self.y - o[1])

    def __mul__(self, s):  # type: ignore[override]
        return Vec2(self.x * s, self.y * s)

    __rmul__ = __mul__

    def __truediv__(self, s):
        return Vec2(self.x / s, self.y / s)

    def __neg__(self):
        return Vec2(-self.x, -self.y)

    def dot(self, o) -> float:
        return self.x * o[0] + self.y * o[1]

    def cross(self, o) -> float:
        return self.x * o[1] - self.y * o[0]

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def norm_sq(self) -> float:
        return self.x * self.x + self.y * self.y

    def unit(self) -> "Vec2":
        n = math.hypot(self.x, self.y)
        if n == 0.0:
            return Vec2(0.0, 0.0)
        return Vec2(self.x / n, self.y / n)

    def perp(self) -> "Vec2":
        """Left-hand perpendicular."""
        return Vec2(-self.y, self.x)

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y)


ZERO = Vec2(0.0, 0.0)


def angle_between(a: Vec2, b: Vec2) -> float:
    """Unsigned angle in [0, pi] between two non-zero vectors."""
    return abs(math.atan2(a.cross(b), a.dot(b)))


@dataclass(frozen=True, slots=True)
class HalfPlane:
    """The closed set ``{p : normal . p <= offset}``."""

    normal: Vec2
    offset: float

    def __post_init__(self):
        if abs(self.normal.norm() - 1.0) > 1e-9:
            raise ValueError(f"half-plane normal must be unit length, got {self.normal}")

    @classmethod
    def through(cls, point: Vec2, normal: Vec2) -> "HalfPlane":
        n = normal.unit()
        return cls(n, n.dot(point))

    def signed_distance(self, p: Vec2) -> float:
        """Positive outside, negative inside."""
        return self.normal.x * p[0] + self.normal.y * p[1] - self.offset

    def contains(self, p: Vec2, tol: float = GEOM_TOL) -> bool:
        return self.signed_distance(p) <= tol

    def shifted(self, inward: float) -> "HalfPlane":
        """Move the boundary ``inward`` meters into the kept side."""
        return HalfPlane(self.normal, self.offset - inward)


@dataclass(frozen=True, slots=True)
class ConvexCell:
    """Bounded convex polygon, vertices counter-clockwise.

    ``edge_labels[k]`` names the constraint that produced the edge from
    ``vertices[k]`` to ``vertices[k + 1]``: an index into
    ``source_halfplanes`` or ``-1`` for the bounding region. ``empty`` marks an
    intersection without interior; such a cell has no vertices.
    """

    vertices: tuple[Vec2, ...]
    source_halfplanes: tuple[HalfPlane, ...] = ()
    edge_labels: tuple[int, ...] = ()
    empty: bool = False
    degenerate: bool = False

    @classmethod
    def box(cls, xmin: float, ymin: float, xmax: float, ymax: float) -> "ConvexCell":
        if not (xmax > xmin and ymax > ymin):
            raise ValueError("box must have positive extent")
        verts = (Vec2(xmin, ymin), Vec2(xmax, ymin), Vec2(xmax, ymax), Vec2(xmin, ymax))
        return cls(verts, (), (-1, -1, -1, -1))

    @classmethod
    def square(cls, half_width: float) -> "ConvexCell":
        return cls.box(-half_width, -half_width, half_width, half_width)

    def __len__(self) -> int:
        return len(self.vertices)

    def edges(self):
        v = self.vertices
        n = len(v)
        for k in range(n):
            yield v[k], v[(k + 1) % n]

    def edge(self, k: int) -> tuple[Vec2, Vec2]:
        v = self.vertices
        return v[k], v[(k + 1) % len(v)]

    def point_at(self, k: int, t: float) -> Vec2:
        a, b = self.edge(k)
        return Vec2(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))

    def area(self) -> float:
        return 0.5 * sum(a.cross(b) for a, b in self.edges())

    def perimeter(self) -> float:
        return sum((b - a).norm() for a, b in self.edges())

    def contains(self, p: Vec2, tol: float = GEOM_TOL) -> bool:
        """Point-in-convex-polygon, inclusive within ``tol`` meters."""
        if self.empty:
            return False
        v = self.vertices
        n = len(v)
        px, py = p[0], p[1]
        for k in range(n):
            a = v[k]
            b = v[(k + 1) % n]
            ex = b.x - a.x
            ey = b.y - a.y
            # cross(e, p - a) / |e| is the signed distance to the left of the edge
            c = ex * (py - a.y) - ey * (px - a.x)
            if c < -tol * math.hypot(ex, ey):
                return False
        return True

    def depth(self, p: Vec2) -> float:
        """Signed distance to the boundary, positive inside."""
        best = math.inf
        for a, b in self.edges():
            e = b - a
            best = min(best, e.cross(p - a) / e.norm())
        return best

    def closest_point(self, p: Vec2) -> Vec2:
        if self.contains(p, 0.0):
            return p
        best = None
        best_d = math.inf
        for a, b in self.edges():
            q = closest_point_on_segment(a, b, p)
            d = (q - p).norm_sq()
            if d < best_d:
                best, best_d = q, d
        assert best is not None
        return best

    def ray_exit(self, origin: Vec2, direction: Vec2) -> Optional[tuple[int, float, Vec2]]:
        """Where the ray from an interior ``origin`` leaves the polygon.

        Returns ``(edge index, edge parameter, point)``.
        """
        best = None
        best_s = math.inf
        for k, (a, b) in enumerate(self.edges()):
            e = b - a
            denom = direction.cross(e)
            if abs(denom) < 1e-15:
                continue
            w = a - origin
            s = w.cross(e) / denom
            t = w.cross(direction) / denom
            if s > 0.0 and -1e-12 <= t <= 1.0 + 1e-12 and s < best_s:
                best_s = s
                best = (k, min(1.0, max(0.0, t)))
        if best is None:
            return None
        k, t = best
        return k, t, self.point_at(k, t)

    def mirrored_x(self) -> "ConvexCell":
        """Reflection about the y axis (x -> -x), re-oriented counter-clockwise."""
        v = [Vec2(-p.x, p.y) for p in reversed(self.vertices)]
        return ConvexCell(tuple(v), (), tuple(-1 for _ in v), self.empty, self.degenerate)


EMPTY_CELL = ConvexCell((), (), (), empty=True, degenerate=True)


def closest_point_on_segment(a: Vec2, b: Vec2, p: Vec2) -> Vec2:
    e = b - a
    ee = e.norm_sq()
    if ee == 0.0:
        return a
    t = max(0.0, min(1.0, (p - a).dot(e) / ee))
    return Vec2(a.x + t * e.x, a.y + t * e.y)


def _clean(verts: list[Vec2], labels: list[int]) -> tuple[list[Vec2], list[int]]:
    """Drop near-duplicate vertices and collinear middle vertices."""
    changed = True
    while changed and len(verts) >= 3:
        changed = False
        n = len(verts)
        for k in range(n):
            a = verts[k]
            b = verts[(k + 1) % n]
            if abs(a.x - b.x) <= MERGE_TOL and abs(a.y - b.y) <= MERGE_TOL:
                # edge k has zero length; vertex k+1 starts the surviving edge
                del verts[k]
                del labels[k]
                changed = True
                break
        if changed:
            continue
        n = len(verts)
        for k in range(n):
            prev = verts[k - 1]
            cur = verts[k]
            nxt = verts[(k + 1) % n]
            e1 = cur - prev
            e2 = nxt - cur
            if abs(e1.cross(e2)) <= MERGE_TOL * max(e1.norm(), e2.norm(), 1.0) and e1.dot(e2) > 0:
                # cur lies on segment prev->nxt; the merged edge keeps the earlier label
                del verts[k]
                del labels[k]
                changed = True
                break
    return verts, labels


def clip_polygon(
    verts: Sequence[Vec2], labels: Sequence[int], plane: HalfPlane, label: int
) -> tuple[list[Vec2], list[int]]:
    """Clip a convex polygon by one half-plane, tracking edge provenance."""
    n = len(verts)
    if n == 0:
        return [], []
    nx, ny, c = plane.normal.x, plane.normal.y, plane.offset
    dist = [nx * p.x + ny * p.y - c for p in verts]
    if all(d <= CLIP_EPS for d in dist):
        return list(verts), list(labels)
    if all(d > -CLIP_EPS for d in dist):
        return [], []
    out: list[Vec2] = []
    out_labels: list[int] = []
    for k in range(n):
        a = verts[k]
        b = verts[(k + 1) % n]
        da = dist[k]
        db = dist[(k + 1) % n]
        a_in = da <= CLIP_EPS
        b_in = db <= CLIP_EPS
        if a_in:
            out.append(a)
            if b_in:
                out_labels.append(labels[k])
            else:
                # edge k exits through the plane: keep the stub, then the new edge
                out_labels.append(labels[k])
                t = da / (da - db)
                out.append(Vec2(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)))
                out_labels.append(label)
        elif b_in:
            t = da / (da - db)
            out.append(Vec2(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)))
            out_labels.append(labels[k])
    return out, out_labels


def _finish(verts: list[Vec2], labels: list[int], planes: tuple[HalfPlane, ...]) -> ConvexCell:
    if len(verts) >= 3:
        verts, labels = _clean(verts, labels)
    if len(verts) < 3:
        return ConvexCell((), planes, (), empty=True, degenerate=True)
    cell = ConvexCell(tuple(verts), planes, tuple(labels))
    if cell.area() <= MERGE_TOL * max(cell.perimeter(), 1.0):
        return ConvexCell(tuple(verts), planes, tuple(labels), empty=True, degenerate=True)
    return cell


def intersect_halfplanes(
    planes: Sequence[HalfPlane], bounds: ConvexCell, center: Optional[Vec2] = None
) -> ConvexCell:
    """Intersect ``bounds`` with every plane by successive clipping.

    A result without interior comes back with ``empty`` set rather than as
    an error. Given an interior ``center``, planes are applied nearest
    first and planes that cannot reach the current polygon are skipped;
    the resulting set is the same, only cheaper to get.
    """
    verts = list(bounds.vertices)
    # bounding edges keep the -1 label regardless of their origin
    labels = [-1] * len(verts)
    if center is None:
        for idx, plane in enumerate(planes):
            verts, labels = clip_polygon(verts, labels, plane, idx)
            if len(verts) < 3:
                break
        return _finish(verts, labels, tuple(planes))

    cx, cy = center.x, center.y
    order = sorted(
        range(len(planes)),
        key=lambda i: (planes[i].offset - planes[i].normal.x * cx - planes[i].normal.y * cy, i),
    )
    reach = max(math.hypot(v.x - cx, v.y - cy) for v in verts) if verts else 0.0
    for idx in order:
        plane = planes[idx]
        gap = plane.offset - plane.normal.x * cx - plane.normal.y * cy
        if gap > reach + CLIP_EPS:
            continue
        verts, labels = clip_polygon(verts, labels, plane, idx)
        if len(verts) < 3:
            break
        if idx in labels:
            reach = max(math.hypot(v.x - cx, v.y - cy) for v in verts)
    return _finish(verts, labels, tuple(planes))


def clip_cell(cell: ConvexCell, plane: HalfPlane) -> ConvexCell:
    """``cell`` intersected with one more plane, keeping edge provenance."""
    planes = cell.source_halfplanes + (plane,)
    if cell.empty:
        return ConvexCell((), planes, (), empty=True, degenerate=True)
    verts, labels = clip_polygon(cell.vertices, cell.edge_labels, plane, len(planes) - 1)
    return _finish(verts, labels, planes)


@dataclass(frozen=True, slots=True)
class VelocityCone:
    """A velocity cone drawn in workspace coordinates.

    ``truncation`` (meters from the apex) removes the part of the cone
    nearer to the apex than the cap. ``clamped`` marks cones built from an
    overlapping pair whose half-angle had to be limited.
    """

    apex: Vec2
    axis: Vec2
    half_angle: float
    truncation: Optional[float] = None
    clamped: bool = False
    source: int = -1
    cos_half: float = field(init=False, repr=False, compare=False)
    edge_dirs: tuple[tuple[float, float], tuple[float, float]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (0.0 < self.half_angle < math.pi / 2):
            raise ValueError(f"half_angle must lie in (0, pi/2), got {self.half_angle}")
        if self.truncation is not None and not self.truncation > 0.0:
            raise ValueError("truncation must be positive")
        if abs(self.axis.norm() - 1.0) > 1e-9:
            raise ValueError("cone axis must be unit length")
        ch, sh = math.cos(self.half_angle), math.sin(self.half_angle)
        ax, ay = self.axis.x, self.axis.y
        object.__setattr__(self, "cos_half", ch)
        object.__setattr__(self, "edge_dirs", ((ax * ch - ay * sh, ay * ch + ax * sh), (ax * ch + ay * sh, ay * ch - ax * sh)))


def cone_contains(cone: VelocityCone, p: Vec2) -> bool:
    """Closed-cone membership. The apex itself is never inside."""
    wx = p[0] - cone.apex.x
    wy = p[1] - cone.apex.y
    r2 = wx * wx + wy * wy
    if r2 == 0.0:
        return False
    along = wx * cone.axis.x + wy * cone.axis.y
    if along <= 0.0:
        return False
    r = math.sqrt(r2)
    if along < r * cone.cos_half:
        return False
    if cone.truncation is not None and r < cone.truncation:
        return False
    return True


@dataclass(frozen=True, slots=True)
class BoundaryArc:
    """Connected stretch of a polygon boundary as ``(edge, t0, t1)`` pieces."""

    pieces: tuple[tuple[int, float, float], ...]

    def start(self, cell: ConvexCell) -> Vec2:
        k, t0, _ = self.pieces[0]
        return cell.point_at(k, t0)

    def end(self, cell: ConvexCell) -> Vec2:
        k, _, t1 = self.pieces[-1]
        return cell.point_at(k, t1)

    def covers(self, k: int, t: float, tol: float = 0.0) -> bool:
        for e, t0, t1 in self.pieces:
            if e == k and t0 - tol <= t <= t1 + tol:
                return True
        return False

    def length(self, cell: ConvexCell) -> float:
        total = 0.0
        for k, t0, t1 in self.pieces:
            a, b = cell.edge(k)
            total += (t1 - t0) * (b - a).norm()
        return total


def _quadratic_roots(a: float, b: float, c: float) -> list[float]:
    if abs(a) < 1e-18:
        if abs(b) < 1e-18:
            return []
        return [-c / b]
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return []
    sq = math.sqrt(disc)
    # numerically stable pair
    q = -0.5 * (b + math.copysign(sq, b))
    roots = [q / a]
    if q != 0.0:
        roots.append(c / q)
    return roots


def cone_segment_breakpoints(cone: VelocityCone, a: Vec2, b: Vec2) -> list[float]:
    """Segment parameters in (0, 1) where membership in ``cone`` can change.

    The cone edges are intersected as rays, a linear solve per edge, which
    stays accurate even when the crossing lies very close to the apex.
    """
    ex, ey = b.x - a.x, b.y - a.y
    wx, wy = cone.apex.x - a.x, cone.apex.y - a.y
    ts: list[float] = []
    for dx, dy in cone.edge_dirs:
        den = ex * dy - ey * dx
        if den == 0.0:
            continue
        t = (wx * dy - wy * dx) / den
        s_ray = (wx * ey - wy * ex) / den
        if s_ray >= 0.0:
            ts.append(t)
    if cone.truncation is not None:
        r2 = cone.truncation * cone.truncation
        ts.extend(_quadratic_roots(ex * ex + ey * ey, -2.0 * (wx * ex + wy * ey), wx * wx + wy * wy - r2))
    return [t for t in ts if 0.0 < t < 1.0]


def _inside(cone: VelocityCone, x: float, y: float) -> bool:
    # cone_contains on raw coordinates, for the inner loop below
    wx = x - cone.apex.x
    wy = y - cone.apex.y
    r2 = wx * wx + wy * wy
    if r2 == 0.0:
        return False
    along = wx * cone.axis.x + wy * cone.axis.y
    if along <= 0.0:
        return False
    r = math.sqrt(r2)
    if along < r * cone.cos_half:
        return False
    return cone.truncation is None or r >= cone.truncation


def blocked_intervals(a: Vec2, b: Vec2, cones: Sequence[VelocityCone]) -> list[tuple[float, float]]:
    """Merged parameter intervals of segment a->b lying inside any cone."""
    ax, ay = a.x, a.y
    ex, ey = b.x - ax, b.y - ay
    raw: list[tuple[float, float]] = []
    for cone in cones:
        ts = cone_segment_breakpoints(cone, a, b)
        if not ts:
            if _inside(cone, ax + 0.5 * ex, ay + 0.5 * ey):
                raw.append((0.0, 1.0))
            continue
        ts = sorted(set(ts))
        ts.insert(0, 0.0)
        ts.append(1.0)
        for t0, t1 in zip(ts, ts[1:]):
            if t1 <= t0:
                continue
            tm = 0.5 * (t0 + t1)
            if _inside(cone, ax + tm * ex, ay + tm * ey):
                raw.append((t0, t1))
    if not raw:
        return []
    raw.sort()
    merged = [raw[0]]
    for t0, t1 in raw[1:]:
        if t0 <= merged[-1][1]:
            if t1 > merged[-1][1]:
                merged[-1] = (merged[-1][0], t1)
        else:
            merged.append((t0, t1))
    return merged


def boundary_minus_cones(
    cell: ConvexCell, center: Vec2, cones: Sequence[VelocityCone]
) -> list[BoundaryArc]:
    """Maximal boundary stretches of ``cell`` outside every cone.

    ``center`` only has to be interior; it is accepted for interface parity
    with callers that reason about directions from it.
    """
    del center
    n = len(cell.vertices)
    if n == 0:
        return []
    # free parameter intervals per edge
    free: list[list[tuple[float, float]]] = []
    for k in range(n):
        a, b = cell.edge(k)
        blocked = blocked_intervals(a, b, cones)
        segs: list[tuple[float, float]] = []
        cursor = 0.0
        for t0, t1 in blocked:
            if t0 > cursor:
                segs.append((cursor, t0))
            cursor = max(cursor, t1)
        if cursor < 1.0:
            segs.append((cursor, 1.0))
        free.append(segs)

    if all(segs == [(0.0, 1.0)] for segs in free):
        return [BoundaryArc(tuple((k, 0.0, 1.0) for k in range(n)))]

    # walk edges in order, chaining pieces that meet at a vertex
    pieces: list[list[tuple[int, float, float]]] = []
    for k in range(n):
        for t0, t1 in free[k]:
            if pieces and t0 == 0.0 and pieces[-1][-1][0] == k - 1 and pieces[-1][-1][2] == 1.0:
                pieces[-1].append((k, t0, t1))
            else:
                pieces.append([(k, t0, t1)])
    if len(pieces) > 1:
        first, last = pieces[0], pieces[-1]
        if first[0][0] == 0 and first[0][1] == 0.0 and last[-1][0] == n - 1 and last[-1][2] == 1.0:
            pieces[0] = last + first
            pieces.pop()
    return [BoundaryArc(tuple(p)) for p in pieces]
