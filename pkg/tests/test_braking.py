import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vrvo.braking import KinodynamicLimits, axis_budgets, axis_residual, plan_braking, solve_axis
from vrvo.bvc import AgentState
from vrvo.geom2d import Vec2


def two_phase_distance(v0, v_int, a, t_h, dt=1e-4):
    """Distance covered by: ramp v0 -> v_int over t_h, then brake at ``a`` to rest.

    Trapezoidal steps in the frame where the motion is toward +s.
    """
    sign = 1.0 if v_int >= 0.0 else -1.0
    v0, v_int = sign * v0, sign * v_int
    x, v = 0.0, v0
    steps = int(round(t_h / dt))
    acc = (v_int - v0) / t_h
    for _ in range(steps):
        nv = v + acc * dt
        x += 0.5 * (v + nv) * dt
        v = nv
    while v > 0.0:
        nv = max(0.0, v - a * dt)
        x += 0.5 * (v + nv) * dt
        v = nv
    return sign * x


def rest_state(x=0.0, y=0.0, vx=0.0, vy=0.0):
    return AgentState(0, Vec2(x, y), Vec2(vx, vy), Vec2(100.0, 0.0), 0.25)


def test_from_rest_two_meters():
    sol = solve_axis(0.0, 2.0, 1.0, 1.0)
    assert sol.feasible
    assert sol.v_int == pytest.approx((-1.0 + math.sqrt(17.0)) / 2.0, abs=1e-12)
    s_int = 0.5 * (0.0 + sol.v_int)
    s_stop = sol.v_int ** 2 / 2.0
    assert s_int == pytest.approx(0.7808, abs=1e-4)
    assert s_stop == pytest.approx(1.2192, abs=1e-4)
    assert s_int + s_stop == pytest.approx(2.0, abs=1e-12)
    assert two_phase_distance(0.0, sol.v_int, 1.0, 1.0) == pytest.approx(2.0, abs=1e-3)


def test_exact_stopping_distance_gives_zero():
    sol = solve_axis(1.0, 0.5, 1.0, 1.0)
    assert sol.feasible
    assert sol.v_int == 0.0


def test_at_target_and_at_rest():
    sol = solve_axis(0.0, 0.0, 1.0, 1.0)
    assert sol.feasible and sol.v_int == 0.0


def test_negative_direction_is_mirrored():
    a = solve_axis(0.3, 2.0, 1.0, 1.0)
    b = solve_axis(-0.3, -2.0, 1.0, 1.0)
    assert b.v_int == -a.v_int


def test_overrun_is_infeasible():
    # moving at 3 m/s toward a target 0.5 m away cannot be fixed by this profile
    assert not solve_axis(3.0, 0.5, 1.0, 1.0).feasible


@settings(max_examples=300, deadline=None)
@given(
    v0=st.floats(-3.0, 3.0),
    s=st.floats(-10.0, 10.0),
    a=st.floats(0.1, 5.0),
    t_h=st.sampled_from([0.1, 0.2, 0.5, 1.0, 2.0]),
)
def test_root_satisfies_quadratic(v0, s, a, t_h):
    sol = solve_axis(v0, s, a, t_h)
    if sol.feasible:
        assert abs(axis_residual(sol.v_int, v0, s, a, t_h)) <= 1e-9
        # toward the target, never away (at s == 0 there is no "toward")
        assert s == 0.0 or sol.v_int == 0.0 or math.copysign(1.0, sol.v_int) == math.copysign(1.0, s)


def test_plan_from_rest():
    lim = KinodynamicLimits(v_max=2.0, a_max=1.0, t_h=1.0, dt=0.1)
    plan = plan_braking(rest_state(), Vec2(2.0, 0.0), lim)
    assert plan.feasible
    assert plan.v_int.x == pytest.approx(1.5616, abs=1e-4)
    assert plan.v_int.y == 0.0
    assert plan.p_int.x == pytest.approx(0.7808, abs=1e-4)
    assert plan.p_int.y == 0.0
    assert plan.t_b == pytest.approx(plan.v_int.x / 1.0)


def test_plan_at_target():
    lim = KinodynamicLimits()
    plan = plan_braking(rest_state(1.0, 1.0), Vec2(1.0, 1.0), lim)
    assert plan.feasible
    assert plan.v_int == Vec2(0.0, 0.0)
    assert plan.p_int == Vec2(1.0, 1.0)
    assert plan.t_b == 0.0


@pytest.mark.parametrize("mode", ["independent", "directional"])
def test_diagonal_target_is_axis_symmetric(mode):
    plan = plan_braking(rest_state(), Vec2(2.0, 2.0), KinodynamicLimits(v_max=10.0), axis_decel=mode)
    assert abs(plan.v_int.x - plan.v_int.y) <= 1e-12


def test_speed_clamp_keeps_direction():
    rng = np.random.default_rng(1)
    lim = KinodynamicLimits(v_max=0.5, a_max=2.0, t_h=1.0, dt=0.1)
    for _ in range(200):
        me = rest_state(*rng.uniform(-1, 1, 2), *rng.uniform(-0.3, 0.3, 2))
        target = Vec2(*rng.uniform(-8, 8, 2))
        raw = plan_braking(me, target, KinodynamicLimits(v_max=1e9, a_max=2.0, t_h=1.0, dt=0.1))
        clamped = plan_braking(me, target, lim)
        if raw.v_int.norm() <= lim.v_max or not raw.feasible:
            continue
        assert clamped.v_int.norm() == pytest.approx(lim.v_max, abs=1e-12)
        ang = math.atan2(raw.v_int.cross(clamped.v_int), raw.v_int.dot(clamped.v_int))
        assert abs(ang) <= 1e-12


def test_directional_budget_splits_along_offset():
    ax, ay = axis_budgets(Vec2(3.0, 4.0), 1.0, "directional")
    assert (ax, ay) == pytest.approx((0.6, 0.8))
    assert axis_budgets(Vec2(3.0, 4.0), 1.0, "independent") == (1.0, 1.0)
    with pytest.raises(ValueError):
        axis_budgets(Vec2(1.0, 0.0), 1.0, "diagonal")


def test_two_phase_profile_ends_at_target():
    rng = np.random.default_rng(8)
    lim = KinodynamicLimits(v_max=1e9, a_max=1.0, t_h=1.0, dt=0.1)
    for _ in range(20):
        me = rest_state(0.0, 0.0, *rng.uniform(-0.5, 0.5, 2))
        target = Vec2(*rng.uniform(-4, 4, 2))
        plan = plan_braking(me, target, lim, axis_decel="independent")
        if not plan.feasible:
            continue
        ax, ay = plan.axis_decel
        x = two_phase_distance(me.v.x, plan.v_int.x, ax, plan.t_h) if plan.v_int.x else None
        y = two_phase_distance(me.v.y, plan.v_int.y, ay, plan.t_h) if plan.v_int.y else None
        if x is not None:
            assert x == pytest.approx(target.x, abs=1e-3)
        if y is not None:
            assert y == pytest.approx(target.y, abs=1e-3)


@pytest.mark.parametrize("kw", [dict(v_max=0.0), dict(a_max=-1.0), dict(t_h=0.05, dt=0.1), dict(t_h=0.25, dt=0.1)])
def test_limits_validation(kw):
    with pytest.raises(ValueError):
        KinodynamicLimits(**kw)
