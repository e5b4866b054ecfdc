import math

import pytest

from vrvo.braking import KinodynamicLimits
from vrvo.bvc import AgentState, Mode, compute_bvc
from vrvo.config import VrvoConfig
from vrvo.controller import (
    Model,
    braking_rollout,
    di_input,
    si_input,
    step_agent,
    verify_containment,
)
from vrvo.geom2d import ConvexCell, Vec2
from vrvo.sim import _integrate, circle, run

LIM = KinodynamicLimits(v_max=2.0, a_max=1.0, t_h=1.0, dt=0.1)


def st(i, x, y, vx=0.0, vy=0.0, gx=0.0, gy=0.0, mode=Mode.DEFAULT):
    return AgentState(i, Vec2(x, y), Vec2(vx, vy), Vec2(gx, gy), 0.25, mode)


def test_si_far_target_full_speed():
    u = si_input(Vec2(0.0, 0.0), Vec2(3.0, 4.0), 2.0)
    assert u.x == pytest.approx(1.2) and u.y == pytest.approx(1.6)


def test_si_near_target_uses_offset():
    u = si_input(Vec2(0.0, 0.0), Vec2(0.3, 0.4), 2.0)
    assert u.x == pytest.approx(0.3) and u.y == pytest.approx(0.4)


def test_di_from_rest():
    assert di_input(Vec2(0.0, 0.0), Vec2(1.0, 0.0), 1.0, 1.0) == Vec2(1.0, 0.0)


def test_di_input_is_clamped():
    assert di_input(Vec2(0.0, 0.0), Vec2(3.0, 4.0), 1.0, 1.0).norm() == pytest.approx(1.0)


def test_verify_stationary():
    me = st(0, 0.0, 0.0)
    assert verify_containment(me, Vec2(0.0, 0.0), ConvexCell.square(1.0), LIM)


def test_verify_rollout_crossing_edge():
    me = st(0, 0.9, 0.0, vx=1.0)
    cell = ConvexCell.box(-10.0, -10.0, 1.0, 10.0)
    assert not verify_containment(me, Vec2(0.0, 0.0), cell, LIM)


def test_verify_grazing_is_inclusive():
    me = st(0, 0.0, 0.0, vx=0.5)
    u = Vec2(-0.5, 0.0)
    # find the farthest point this rollout reaches, then put the wall just inside it
    p, v = me.p, me.v
    far = p.x
    for _ in range(LIM.horizon_steps):
        v = Vec2(v.x + u.x * LIM.dt, 0.0)
        p = Vec2(p.x + v.x * LIM.dt, 0.0)
        far = max(far, p.x)
    for q in braking_rollout(p, v, LIM):
        far = max(far, q.x)
    assert verify_containment(me, u, ConvexCell.box(-10.0, -10.0, far - 5e-10, 10.0), LIM)
    assert not verify_containment(me, u, ConvexCell.box(-10.0, -10.0, far - 1e-8, 10.0), LIM)


def test_hold_agent_does_nothing():
    ci = step_agent(st(0, 0, 0, gx=5.0, mode=Mode.HOLD), [], [], LIM, Model.DI)
    assert ci.u == Vec2(0.0, 0.0)
    assert ci.diagnostics.hold


def test_si_single_agent_heads_to_goal():
    ci = step_agent(st(0, 0, 0, gx=5.0), [], [], LIM, Model.SI)
    assert ci.u.x == pytest.approx(2.0) and ci.u.y == pytest.approx(0.0)


def test_di_single_agent_respects_bounds():
    ci = step_agent(st(0, 0, 0, gx=5.0), [], [], LIM, Model.DI)
    assert ci.u.norm() <= LIM.a_max + 1e-9
    assert ci.u.x > 0.0
    assert not ci.diagnostics.fallback_used


def test_blocked_si_agent_stops():
    # boxed in on every side by close neighbors: every boundary point is blocked
    me = st(0, 0, 0, gx=5.0)
    ring = [st(k + 1, 0.6 * math.cos(k * math.pi / 4), 0.6 * math.sin(k * math.pi / 4)) for k in range(8)]
    ci = step_agent(me, ring, [], LIM, Model.SI)
    assert ci.u == Vec2(0.0, 0.0)
    assert ci.diagnostics.fallback_used


def test_at_goal_si_is_still():
    ci = step_agent(st(0, 1.0, 1.0, gx=1.0, gy=1.01), [], [], LIM, Model.SI)
    assert ci.u == Vec2(0.0, 0.0)
    assert ci.diagnostics.at_goal


def test_passive_safety_along_a_run():
    """Brake right after any applied input: the disk never leaves the tick-start Voronoi cell."""
    sc = circle(10, model=Model.DI, max_ticks=120)
    res = run(sc)
    by_tick = {}
    for r in res.trace:
        by_tick.setdefault(r.tick, []).append(r)
    cfg = VrvoConfig()
    for tick in range(0, 120, 3):
        states = [AgentState(r.id, r.p, r.v, sc.agents[r.id].g, sc.agents[r.id].R, r.mode) for r in by_tick[tick]]
        for me in states:
            ci = step_agent(me, states, [], sc.limits, Model.DI, cfg)
            vor = compute_bvc(me, states, cfg.workspace, cfg.sensing_radius).voronoi
            nxt = _integrate(me, ci.u, Model.DI, sc.limits)
            path = [nxt.p] + braking_rollout(nxt.p, nxt.v, sc.limits)
            for q in path:
                for k in range(16):
                    ang = 2 * math.pi * k / 16
                    rim = Vec2(q.x + me.R * math.cos(ang), q.y + me.R * math.sin(ang))
                    assert vor.contains(rim, 1e-7)


@pytest.mark.xfail(strict=True, reason="the DI law with t_h = dt and huge a_max oscillates instead of reproducing the SI law")
def test_si_di_consistency_limit():
    lim = KinodynamicLimits(v_max=2.0, a_max=1e6, t_h=0.1, dt=0.1)
    si = run(circle(4, limits=lim, model=Model.SI, max_ticks=600))
    di = run(circle(4, limits=lim, model=Model.DI, max_ticks=600))
    a = {(r.tick, r.id): r.p for r in si.trace}
    b = {(r.tick, r.id): r.p for r in di.trace}
    common = sorted(set(a) & set(b))
    err = max((a[k] - b[k]).norm() for k in common)
    assert err <= 1e-2
