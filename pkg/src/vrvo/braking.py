"""Accelerate-then-brake planning toward a boundary target.

For each axis the agent changes velocity linearly from ``v0`` to ``v_int``
over the horizon ``t_h`` and then decelerates at the axis budget ``a`` to
rest. Matching the covered distance to the signed offset ``s`` gives

    v_int**2 + a*t_h*v_int + (a*t_h*v0 - 2*a*s) = 0.

The solve runs in a frame where ``s >= 0`` so only monotone approaches are
produced; a target the agent would overshoot even while decelerating to
rest over ``t_h`` has no admissible root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geom2d import Vec2


@dataclass(frozen=True, slots=True)
class KinodynamicLimits:
    v_max: float = 2.0
    a_max: float = 1.0
    t_h: float = 1.0
    dt: float = 0.1

    def __post_init__(self):
        for name in ("v_max", "a_max", "t_h", "dt"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0.0):
                raise ValueError(f"{name} must be positive and finite, got {val}")
        if self.dt > self.t_h * (1 + 1e-9):
            raise ValueError("dt must not exceed t_h")
        ratio = self.t_h / self.dt
        if abs(ratio - round(ratio)) > 1e-6:
            raise ValueError("t_h must be an integer multiple of dt")

    @property
    def horizon_steps(self) -> int:
        return int(round(self.t_h / self.dt))


@dataclass(frozen=True, slots=True)
class AxisSolution:
    v_int: float
    feasible: bool


def axis_residual(v_int: float, v0: float, s: float, a: float, t_h: float) -> float:
    """Left-hand side of the axis quadratic in the solve frame."""
    flip = s < 0.0 or (s == 0.0 and v0 > 0.0)
    if flip:
        v_int, v0, s = -v_int, -v0, -s
    return v_int * v_int + a * t_h * v_int + (a * t_h * v0 - 2.0 * a * s)


def solve_axis(v0: float, s: float, a: float, t_h: float) -> AxisSolution:
    """Intermediate axis velocity that lets the agent stop exactly ``s`` away."""
    if s == 0.0 and v0 == 0.0:
        return AxisSolution(0.0, True)
    if not a > 0.0:
        return AxisSolution(0.0, False)
    # frame with the target ahead; at s == 0 the agent is taken to be moving away
    sign = -1.0 if (s < 0.0 or (s == 0.0 and v0 > 0.0)) else 1.0
    s_f = sign * s
    v0_f = sign * v0
    b = a * t_h
    c = b * v0_f - 2.0 * a * s_f
    if c > 0.0:
        # both roots negative (or complex): the target would be overrun
        return AxisSolution(0.0, False)
    disc = b * b - 4.0 * c
    root = -2.0 * c / (b + math.sqrt(disc))
    return AxisSolution(sign * root, True)


@dataclass(frozen=True, slots=True)
class BrakingPlan:
    v_int: Vec2
    p_int: Vec2
    t_b: float
    p_rvo: Vec2
    feasible: bool
    t_h: float
    axis_decel: tuple[float, float]


def axis_budgets(offset: Vec2, a_max: float, mode: str) -> tuple[float, float]:
    """Per-axis deceleration used by the decoupled solve.

    ``"independent"`` gives each axis the full ``a_max``. ``"directional"``
    splits it along the direction to the target so that braking along a
    straight line toward the target never needs more than ``a_max``.
    """
    if mode == "independent":
        return a_max, a_max
    if mode != "directional":
        raise ValueError(f"unknown axis deceleration mode {mode!r}")
    d = offset.norm()
    if d == 0.0:
        return a_max, a_max
    # keep a small floor so a purely transverse axis can still settle
    floor = 0.05 * a_max
    return max(a_max * abs(offset.x) / d, floor), max(a_max * abs(offset.y) / d, floor)


def plan_braking(
    me,
    p_rvo: Vec2,
    limits: KinodynamicLimits,
    t_h: float | None = None,
    axis_decel: str = "directional",
) -> BrakingPlan:
    """Solve both axes for agent ``me`` and clamp the intermediate speed to ``v_max``."""
    p, v = me.p, me.v
    th = limits.t_h if t_h is None else t_h
    s = p_rvo - p
    ax, ay = axis_budgets(s, limits.a_max, axis_decel)
    sx = solve_axis(v.x, s.x, ax, th)
    sy = solve_axis(v.y, s.y, ay, th)
    v_int = Vec2(sx.v_int, sy.v_int)
    speed = v_int.norm()
    if speed > limits.v_max:
        v_int = v_int * (limits.v_max / speed)
    p_int = Vec2(p.x + 0.5 * th * (v.x + v_int.x), p.y + 0.5 * th * (v.y + v_int.y))
    t_b = max(abs(v_int.x), abs(v_int.y)) / limits.a_max
    return BrakingPlan(v_int, p_int, t_b, p_rvo, sx.feasible and sy.feasible, th, (ax, ay))
