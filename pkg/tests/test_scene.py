"""World generation, flight geometry, and ray synthesis checks."""

import numpy as np
import pytest

from beamvista.errors import ConfigError, GeometryError
from beamvista.scene import (DRONE_HEIGHT, MARKER_COLOR, PropagationConfig,
                             SceneObject, Trajectory, WorldConfig, drone_state,
                             generate_trajectories, generate_world,
                             paths_between, world_at)


class TestWorldGeneration:
    def test_basestation_layout(self):
        cfg = WorldConfig()
        world = generate_world(cfg, 0)
        assert [bs.id for bs in world.basestations] == [1, 2]
        p1 = world.basestations[0].position_vector
        p2 = world.basestations[1].position_vector
        # opposite curb sides, bs_spacing apart along the street
        assert p2[0] - p1[0] == cfg.bs_spacing
        assert p1[1] == -cfg.bs_side_offset and p2[1] == cfg.bs_side_offset
        assert p1[2] == p2[2] == cfg.bs_height

    def test_object_counts(self):
        cfg = WorldConfig(num_cars=5, num_buses=2, num_trucks=3,
                          num_buildings=4)
        world = generate_world(cfg, 1)
        kinds = [o.kind for o in world.objects]
        assert kinds.count("car") == 5
        assert kinds.count("bus") == 2
        assert kinds.count("truck") == 3
        assert kinds.count("building") == 4

    def test_deterministic(self):
        a = generate_world(WorldConfig(), 7)
        b = generate_world(WorldConfig(), 7)
        c = generate_world(WorldConfig(), 8)
        assert a == b
        assert a != c

    def test_buildings_static_vehicles_move(self):
        world = generate_world(WorldConfig(), 2)
        for obj in world.objects:
            if obj.kind == "building":
                assert obj.velocity == (0.0, 0.0, 0.0)
            else:
                assert obj.velocity[0] != 0.0

    def test_no_object_uses_marker_color(self):
        world = generate_world(WorldConfig(), 3)
        for obj in world.objects:
            assert obj.color != MARKER_COLOR

    def test_bad_config_rejected(self):
        with pytest.raises(ConfigError):
            WorldConfig(street_x_range=(5.0, -5.0))
        with pytest.raises(ConfigError):
            WorldConfig(num_cars=-1)


class TestTrajectories:
    def test_total_sample_budget_split(self):
        trajs = generate_trajectories(17, seed=0, total_samples=6735)
        steps = [t.num_steps for t in trajs]
        assert sum(steps) == 6735
        # 6735 = 17 * 396 + 3: first three flights take the remainder
        assert steps == [397] * 3 + [396] * 14

    def test_uniform_steps(self):
        trajs = generate_trajectories(4, steps_per_trajectory=50, seed=1)
        assert [t.num_steps for t in trajs] == [50] * 4

    def test_exactly_one_sizing_mode(self):
        with pytest.raises(ValueError):
            generate_trajectories(3, steps_per_trajectory=10, total_samples=30)
        with pytest.raises(ValueError):
            generate_trajectories(3)

    def test_flights_span_street_at_height(self):
        trajs = generate_trajectories(8, seed=5, total_samples=800,
                                      x_range=(-100.0, 300.0),
                                      y_range=(-5.0, 2.0))
        dirs = set()
        for t in trajs:
            assert t.start[2] == t.end[2] == DRONE_HEIGHT
            assert -5.0 <= t.start[1] <= 2.0
            assert {t.start[0], t.end[0]} == {-100.0, 300.0}
            dirs.add(t.direction)
        assert dirs == {-1, 1}

    def test_ids_sequential(self):
        trajs = generate_trajectories(5, seed=2, total_samples=100)
        assert [t.id for t in trajs] == [0, 1, 2, 3, 4]

    def test_deterministic(self):
        a = generate_trajectories(6, seed=9, total_samples=60)
        b = generate_trajectories(6, seed=9, total_samples=60)
        assert a == b


class TestDroneState:
    def test_linear_interpolation(self):
        traj = Trajectory(id=0, start=(-100.0, 1.0, DRONE_HEIGHT),
                          end=(300.0, 1.0, DRONE_HEIGHT), num_steps=5,
                          direction=1)
        np.testing.assert_allclose(drone_state(traj, 0), [-100.0, 1.0, 50.0])
        np.testing.assert_allclose(drone_state(traj, 4), [300.0, 1.0, 50.0])
        np.testing.assert_allclose(drone_state(traj, 2), [100.0, 1.0, 50.0])

    def test_single_step_sits_at_start(self):
        traj = Trajectory(id=0, start=(0.0, 0.0, DRONE_HEIGHT),
                          end=(10.0, 0.0, DRONE_HEIGHT), num_steps=1,
                          direction=1)
        np.testing.assert_allclose(drone_state(traj, 0), [0.0, 0.0, 50.0])

    def test_out_of_range_step(self):
        traj = Trajectory(id=0, start=(0.0, 0.0, DRONE_HEIGHT),
                          end=(10.0, 0.0, DRONE_HEIGHT), num_steps=3,
                          direction=1)
        with pytest.raises(IndexError):
            drone_state(traj, 3)
        with pytest.raises(IndexError):
            drone_state(traj, -1)


class TestWorldAt:
    def test_translation_by_velocity(self):
        world = generate_world(WorldConfig(), 4)
        posed0 = world_at(world, 0)
        posed5 = world_at(world, 5)
        x0, x1 = world.street_x_range
        span = x1 - x0
        for obj, p0, p5 in zip(world.objects, posed0, posed5):
            np.testing.assert_allclose(p0.box_min,
                                       np.asarray(obj.box_min), atol=1e-12)
            shift = (np.asarray(p5.box_min) - np.asarray(p0.box_min))[0]
            want = 5 * obj.velocity[0]
            # wrap keeps the center on the street, so shifts agree mod span
            assert abs((shift - want) % span) < 1e-9 \
                or abs((shift - want) % span - span) < 1e-9

    def test_wrap_keeps_centers_on_street(self):
        world = generate_world(WorldConfig(), 4)
        x0, x1 = world.street_x_range
        for t in (0, 50, 500, 5000):
            for p in world_at(world, t):
                cx = 0.5 * (p.box_min[0] + p.box_max[0])
                assert x0 - 1e-9 <= cx <= x1 + 1e-9

    def test_markers_appended_last(self):
        world = generate_world(WorldConfig(), 4)
        posed = world_at(world, 3)
        assert len(posed) == len(world.objects) + 2
        for p, bs in zip(posed[-2:], world.basestations):
            assert p.kind == "basestation_marker"
            assert p.color == MARKER_COLOR
            center = 0.5 * (p.box_min + p.box_max)
            np.testing.assert_allclose(center[:2], bs.position_vector[:2],
                                       atol=1e-12)
            assert p.box_min[2] == 0.0
            assert p.box_max[2] == bs.position_vector[2] + 2.0

    def test_negative_step_rejected(self):
        world = generate_world(WorldConfig(), 4)
        with pytest.raises(ValueError):
            world_at(world, -1)


class TestPaths:
    def _bs(self):
        world = generate_world(WorldConfig(), 0)
        return world.basestations[0]

    def test_geometry_of_line_of_sight(self):
        bs = self._bs()
        prop = PropagationConfig()
        drone = bs.position_vector + np.array([30.0, 0.0, 40.0])
        los, bounce = paths_between(bs, drone, prop, seed=0)
        d = 50.0  # 3-4-5 triangle scaled by 10
        assert los.delay == 0
        assert abs(abs(los.gain) - prop.gain_ref / d) < 1e-12
        assert abs(los.direction_cosine - 30.0 / 50.0) < 1e-12

    def test_ground_bounce_via_image_point(self):
        bs = self._bs()
        prop = PropagationConfig()
        drone = bs.position_vector + np.array([30.0, 0.0, 40.0])
        _los, bounce = paths_between(bs, drone, prop, seed=0)
        mirror = bs.position_vector * np.array([1.0, 1.0, -1.0])
        diff = drone - mirror
        db = float(np.linalg.norm(diff))
        assert abs(abs(bounce.gain)
                   - prop.reflection_coeff * prop.gain_ref / db) < 1e-12
        assert abs(bounce.direction_cosine - diff[0] / db) < 1e-12
        want_delay = min(int(round((db - 50.0) / prop.tap_length_m)),
                         prop.max_delay_taps)
        assert bounce.delay == want_delay

    def test_delay_clamped_to_max(self):
        bs = self._bs()
        prop = PropagationConfig(tap_length_m=0.1, max_delay_taps=4)
        drone = bs.position_vector + np.array([10.0, 0.0, 80.0])
        _los, bounce = paths_between(bs, drone, prop, seed=0)
        assert bounce.delay == 4

    def test_bounce_weaker_than_los(self):
        bs = self._bs()
        rng = np.random.default_rng(0)
        for _ in range(10):
            drone = bs.position_vector + rng.uniform(5.0, 60.0, 3)
            los, bounce = paths_between(bs, drone, PropagationConfig(), seed=1)
            assert abs(bounce.gain) < abs(los.gain)

    def test_phases_seeded(self):
        bs = self._bs()
        drone = bs.position_vector + np.array([20.0, 5.0, 44.0])
        a = paths_between(bs, drone, PropagationConfig(), seed=3)
        b = paths_between(bs, drone, PropagationConfig(), seed=3)
        c = paths_between(bs, drone, PropagationConfig(), seed=4)
        assert a == b
        assert a != c

    def test_coincident_positions_rejected(self):
        bs = self._bs()
        with pytest.raises(GeometryError):
            paths_between(bs, bs.position_vector, PropagationConfig(), seed=0)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            PropagationConfig(gain_ref=0.0)
        with pytest.raises(ConfigError):
            PropagationConfig(reflection_coeff=1.5)
        with pytest.raises(ConfigError):
            PropagationConfig(max_delay_taps=-1)


class TestSceneObject:
    def test_kind_validation(self):
        with pytest.raises(ValueError):
            SceneObject(kind="bicycle", box_min=(0, 0, 0), box_max=(1, 1, 1))

    def test_box_extents(self):
        with pytest.raises(ValueError):
            SceneObject(kind="car", box_min=(0, 0, 0), box_max=(1, -1, 1))

    def test_building_must_be_static(self):
        with pytest.raises(ValueError):
            SceneObject(kind="building", box_min=(0, 0, 0),
                        box_max=(1, 1, 1), velocity=(1.0, 0, 0))
