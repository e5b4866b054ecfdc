import math

import numpy as np
import pytest

from vrvo.bvc import (
    AgentState,
    Mode,
    ObstacleState,
    buffer_for_obstacles,
    compute_bvc,
    obstacle_clearance,
    sense,
)
from vrvo.geom2d import ConvexCell, Vec2

from .oracles import cell_membership

WS = ConvexCell.square(10.0)


def agent(i, x, y, R=0.25, gx=0.0, gy=0.0):
    return AgentState(i, Vec2(x, y), Vec2(0.0, 0.0), Vec2(gx, gy), R)


def vertex_set(cell, nd=12):
    return {(round(v.x, nd), round(v.y, nd)) for v in cell.vertices}


def random_agents(rng, n, R=0.25, half=4.0):
    out = []
    while len(out) < n:
        p = rng.uniform(-half, half, 2)
        if all(math.hypot(p[0] - a.p.x, p[1] - a.p.y) >= 2 * R for a in out):
            out.append(agent(len(out), p[0], p[1], R))
    return out


def test_single_neighbor_midline_shifted_by_radius():
    me, other = agent(0, 0.0, 0.0), agent(1, 2.0, 0.0)
    cell, nsets = compute_bvc(me, [other], WS)
    assert vertex_set(cell) == {(-10.0, -10.0), (0.75, -10.0), (0.75, 10.0), (-10.0, 10.0)}
    assert nsets.sensed == (1,)
    assert nsets.voronoi_adjacent == (1,)


def test_no_neighbors_gives_workspace():
    cell, nsets = compute_bvc(agent(0, 1.0, 1.0), [], WS)
    assert vertex_set(cell) == vertex_set(WS)
    assert nsets.sensed == () and nsets.voronoi_adjacent == ()


def test_cells_are_pairwise_disjoint():
    rng = np.random.default_rng(10)
    agents = random_agents(rng, 10)
    cells = [compute_bvc(a, agents, WS).cell for a in agents]
    pts = rng.uniform(-6.0, 6.0, size=(100_000, 2))
    hits = np.sum([cell_membership(c, pts) for c in cells], axis=0)
    assert hits.max() <= 1
    for a, c in zip(agents, cells):
        assert c.contains(a.p)


def test_disk_on_buffered_boundary_stays_in_voronoi_cell():
    rng = np.random.default_rng(3)
    agents = random_agents(rng, 8)
    for a in agents:
        res = compute_bvc(a, agents, WS)
        planes = [pl for pl in res.voronoi.source_halfplanes]
        for q0, q1 in res.cell.edges():
            for t in np.linspace(0.0, 1.0, 7):
                q = q0 + (q1 - q0) * t
                for k in range(32):
                    ang = 2 * math.pi * k / 32
                    rim = Vec2(q.x + a.R * math.cos(ang), q.y + a.R * math.sin(ang))
                    for pl in planes:
                        assert pl.signed_distance(rim) <= 1e-9


def test_equal_radii_pair_is_mirror_symmetric():
    a, b = agent(0, -1.0, 0.0), agent(1, 1.0, 0.0)
    ca = compute_bvc(a, [b], WS).cell
    cb = compute_bvc(b, [a], WS).cell
    assert vertex_set(ca.mirrored_x(), 15) == vertex_set(cb, 15)
    assert max(v.x for v in ca.vertices) == -0.25
    assert min(v.x for v in cb.vertices) == 0.25


def test_unequal_radii_buffer_by_own_radius():
    a, b = agent(0, 0.0, 0.0, R=0.5), agent(1, 3.0, 0.0, R=0.25)
    assert max(v.x for v in compute_bvc(a, [b], WS).cell.vertices) == pytest.approx(1.0)
    assert min(v.x for v in compute_bvc(b, [a], WS).cell.vertices) == pytest.approx(1.75)


def test_hidden_neighbor_is_sensed_but_not_adjacent():
    row = [agent(0, 0.0, 0.0), agent(1, 1.0, 0.0), agent(2, 2.0, 0.0)]
    _, nsets = compute_bvc(row[0], row, WS)
    assert set(nsets.sensed) == {1, 2}
    assert nsets.voronoi_adjacent == (1,)


def test_sensing_radius_limits_neighbors():
    a = [agent(0, 0.0, 0.0), agent(1, 2.0, 0.0), agent(2, 7.0, 0.0)]
    assert [o.id for o in sense(a[0], a, 5.0)] == [1]
    _, nsets = compute_bvc(a[0], a, WS, sensing_radius=5.0)
    assert nsets.sensed == (1,)


def test_overlapping_neighbor_flags_center_outside():
    a, b = agent(0, 0.0, 0.0), agent(1, 0.3, 0.0)
    assert compute_bvc(a, [b], WS).center_outside


def test_agent_state_validation():
    with pytest.raises(ValueError):
        AgentState(0, Vec2(0.0, 0.0), Vec2(0.0, 0.0), Vec2(1.0, 0.0), 0.0)
    with pytest.raises(ValueError):
        AgentState(0, Vec2(math.nan, 0.0), Vec2(0.0, 0.0), Vec2(1.0, 0.0), 0.25)
    assert AgentState(0, Vec2(0.0, 0.0), Vec2(0.0, 0.0), Vec2(1.0, 0.0), 0.25).mode is Mode.DEFAULT


# -- obstacles --------------------------------------------------------------------------


def test_no_obstacles_cell_unchanged():
    me = agent(0, 0.0, 0.0)
    out = buffer_for_obstacles(WS, me, [])
    assert out.cell is WS


def test_stationary_obstacle_adds_no_room_beyond_its_generator_plane():
    me = agent(0, 0.0, 0.0)
    ob = ObstacleState(Vec2(3.0, 0.0), 0.5, 0.0, 1.0)
    out = buffer_for_obstacles(WS, me, [ob]).cell
    # generator plane at the midline 1.5, buffered by 0.25 + 0.5
    assert max(v.x for v in out.vertices) == pytest.approx(0.75, abs=1e-12)


def test_far_stationary_obstacle_leaves_cell_unchanged():
    me = agent(0, 0.0, 0.0)
    base = compute_bvc(me, [agent(1, 2.0, 0.0)], WS).cell
    ob = ObstacleState(Vec2(-40.0, 0.0), 0.5, 0.0, 1.0)
    out = buffer_for_obstacles(base, me, [ob]).cell
    assert vertex_set(out) == vertex_set(base)


def test_stopping_allowance_example():
    assert obstacle_clearance(2.5, 2.0, 1.0) == pytest.approx(0.5)
    # obstacle at 2 m/s braking at 1 m/s^2, fine Euler steps
    x, v, dt = 0.0, 2.0, 1e-5
    while v > 0.0:
        nv = max(0.0, v - dt)
        x += 0.5 * (v + nv) * dt
        v = nv
    assert x == pytest.approx(2.0, abs=1e-6)
    assert x < 2.5


def test_moving_obstacle_retracts_by_stopping_distance():
    me = agent(0, 0.0, 0.0)
    ob = ObstacleState(Vec2(4.0, 0.0), 0.25, 1.0, 2.0)
    out = buffer_for_obstacles(WS, me, [ob])
    # midline at 2, buffered by 0.5, retracted by 1 / (2 * 2) = 0.25
    assert max(v.x for v in out.cell.vertices) == pytest.approx(1.25, abs=1e-12)
    # obstacle center sits 2.5 m beyond the generator plane at x = 1.5
    assert out.clearances[0] == pytest.approx(2.5 - 0.25)


def test_agent_deceleration_option():
    me = agent(0, 0.0, 0.0)
    ob = ObstacleState(Vec2(4.0, 0.0), 0.25, 1.0, 2.0)
    out = buffer_for_obstacles(WS, me, [ob], decel="agent", agent_a_max=1.0)
    assert max(v.x for v in out.cell.vertices) == pytest.approx(1.0, abs=1e-12)


def test_retraction_capped_at_agent_position():
    me = agent(0, 0.0, 0.0)
    ob = ObstacleState(Vec2(2.0, 0.0), 0.25, 3.0, 1.0)
    out = buffer_for_obstacles(WS, me, [ob])
    assert out.warnings
    assert out.cell.contains(me.p)


def test_obstacle_buffering_is_monotone():
    rng = np.random.default_rng(5)
    agents = random_agents(rng, 6)
    for a in agents:
        base = compute_bvc(a, agents, WS).cell
        obs = [ObstacleState(Vec2(*rng.uniform(-5, 5, 2)), 0.3, rng.uniform(0, 1), 1.0) for _ in range(3)]
        out = buffer_for_obstacles(base, a, obs).cell
        if out.empty:
            continue
        for v in out.vertices:
            assert base.contains(v, 1e-9)
