import math

import numpy as np
import pytest

from disnav.world import (
    DRIVEWAY,
    OBSTACLE,
    OFFMAP,
    SIDEWALK,
    STREET,
    World,
    WorldSpec,
    classify_point,
    classify_points,
    generate_world,
    nearest_centerline,
    world_from_dict,
    world_to_dict,
)


def world_equal(a: World, b: World) -> bool:
    return (
        a.spec == b.spec
        and np.array_equal(a.centerline, b.centerline)
        and np.array_equal(a.arc, b.arc)
        and np.array_equal(a.obstacles, b.obstacles)
        and np.array_equal(a.driveways, b.driveways)
    )


def test_generation_deterministic():
    spec = WorldSpec(seed=42, length_m=100)
    assert world_equal(generate_world(spec), generate_world(spec))


def test_empty_densities_give_empty_lists():
    w = generate_world(WorldSpec(seed=3, length_m=50, obstacle_density=0.0, driveway_rate=0.0))
    assert len(w.obstacles) == 0
    assert len(w.driveways) == 0


def test_spec_invariants_rejected():
    with pytest.raises(ValueError):
        generate_world(WorldSpec(seed=1, length_m=-5))
    with pytest.raises(ValueError):
        generate_world(WorldSpec(seed=1, sidewalk_width_m=0.5))  # narrower than the corridor
    with pytest.raises(ValueError):
        generate_world(WorldSpec(seed=1, max_curvature=1.0))  # not followable at a_max
    with pytest.raises(ValueError):
        generate_world(WorldSpec(seed=1, street_side="up"))


def test_unknown_spec_keys_rejected():
    with pytest.raises(ValueError, match="unknown"):
        WorldSpec.from_dict({"seed": 1, "slope": 0.2})


def test_feasibility_corridor_dense_oracle():
    """Independent oracle: sample the centerline every 0.05 m and check
    clearance to every obstacle against the robot corridor radius."""
    for seed in range(50):
        spec = WorldSpec(seed=seed, length_m=60, obstacle_density=3.0, driveway_rate=4.0)
        w = generate_world(spec)
        clearance = spec.robot_radius_m + spec.feasibility_margin_m
        n = int(w.length_m / 0.05)
        for i in range(n + 1):
            p, _ = w.point_at_arc(i * 0.05)
            for x, y, r in w.obstacles:
                d = math.hypot(p[0] - x, p[1] - y)
                assert d >= r + clearance - 1e-9, (seed, i * 0.05, (x, y, r), d)
        # edges: half-width must fit the corridor radius
        assert spec.sidewalk_width_m / 2.0 >= clearance


def test_obstacle_centers_inside_sidewalk():
    from disnav.world import curvilinear_batch

    for seed in range(20):
        w = generate_world(WorldSpec(seed=seed, length_m=60, obstacle_density=3.0))
        for x, y, r in w.obstacles:
            assert classify_point(w, (x, y)) == OBSTACLE  # priority: obstacle wins
            _, _, dist = curvilinear_batch(w, np.array([[x, y]]))
            assert dist[0] <= w.spec.sidewalk_width_m / 2.0 + 1e-9


class TestClassify:
    def test_centerline_is_sidewalk(self, straight_world):
        for s in (0.0, 10.0, 25.5, 59.0):
            p, _ = straight_world.point_at_arc(s)
            assert classify_point(straight_world, p) == SIDEWALK

    def test_obstacle_center_priority(self):
        w = generate_world(WorldSpec(seed=5, length_m=60, obstacle_density=3.0))
        assert len(w.obstacles) > 0
        for x, y, _r in w.obstacles:
            assert classify_point(w, (x, y)) == OBSTACLE

    def test_street_displacement_signed_distance_oracle(self, straight_world):
        """Oracle: on the straight world along +x, the signed distance to the
        sidewalk edge is just |y| - width/2, street on street_side."""
        spec = straight_world.spec
        half_w = spec.sidewalk_width_m / 2.0
        street_y = -1.0 if spec.street_side == "right" else 1.0  # left-positive lateral
        p = (20.0, street_y * spec.sidewalk_width_m)  # displaced by a full width
        assert abs(p[1]) - half_w > 0  # oracle says outside, on street side
        assert classify_point(straight_world, p) == STREET

    def test_house_side_offmap_and_driveway(self, straight_world):
        spec = straight_world.spec
        house_y = 1.0 if spec.street_side == "right" else -1.0
        assert classify_point(straight_world, (20.0, house_y * 2.0)) == OFFMAP

        w = generate_world(WorldSpec(seed=9, length_m=60, max_curvature=0.0, obstacle_density=0.0,
                                     driveway_rate=5.0))
        assert len(w.driveways) > 0
        s0, s1, d0, d1 = w.driveways[0]
        mid = (s0 + s1) / 2.0
        p = (mid, house_y * (d0 + 0.5))
        assert classify_point(w, p) == DRIVEWAY
        behind = (mid, house_y * (d1 + 0.5))
        assert classify_point(w, behind) == OFFMAP

    def test_total_function(self, curvy_world):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-30, 90, size=(500, 2))
        classes = classify_points(curvy_world, pts)
        assert set(np.unique(classes)) <= {SIDEWALK, STREET, DRIVEWAY, OBSTACLE, OFFMAP}


class TestNearestCenterline:
    def test_point_on_centerline(self, curvy_world):
        for idx in (0, 50, 200):
            p = curvy_world.centerline[idx]
            arc, pose = nearest_centerline(curvy_world, p)
            assert math.hypot(pose[0] - p[0], pose[1] - p[1]) < 1e-12
            assert abs(arc - curvy_world.arc[idx]) < 1e-9

    def test_equidistant_tie_smaller_arc(self, straight_world):
        # directly above a vertex, both adjacent segments project to the same
        # point; the reported arc must be the vertex arc (smaller wins on ties)
        v = straight_world.centerline[10]
        arc, _ = nearest_centerline(straight_world, (v[0], v[1] + 0.5))
        assert abs(arc - straight_world.arc[10]) < 1e-9

    def test_brute_force_oracle(self, curvy_world):
        """Oracle: exhaustive search over the centerline sampled at 0.01 m."""
        n = int(curvy_world.length_m / 0.01)
        s_dense = np.linspace(0.0, curvy_world.length_m, n + 1)
        dense = np.array([curvy_world.point_at_arc(s)[0] for s in s_dense])
        rng = np.random.default_rng(7)
        for _ in range(40):
            p = rng.uniform(-5, 40, size=2)
            d2 = ((dense - p) ** 2).sum(axis=1)
            s_oracle = s_dense[int(np.argmin(d2))]
            arc, _ = nearest_centerline(curvy_world, p)
            assert abs(arc - s_oracle) <= 0.02, (p, arc, s_oracle)


def test_world_json_round_trip(curvy_world):
    d = world_to_dict(curvy_world)
    assert d["format"] == "world.v1"
    w2 = world_from_dict(d)
    assert np.allclose(w2.centerline, curvy_world.centerline)
    assert np.allclose(w2.obstacles, curvy_world.obstacles)
    assert np.allclose(w2.driveways, curvy_world.driveways)
    assert abs(w2.length_m - curvy_world.length_m) < 1e-9
    with pytest.raises(ValueError, match="format"):
        world_from_dict({**d, "format": "world.v0"})
