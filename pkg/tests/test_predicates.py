import math

import numpy as np
import pytest

from lcsnav.gridworld import (
    DIR_EAST,
    DIR_NORTH,
    DIR_SOUTH,
    DIR_WEST,
    FREE,
    OCCUPIED,
    Action,
    FullObservation,
    ObservationMap,
    RobotState,
    VisionConfig,
    accumulate,
    generate_office_map,
    step,
    visible_patch,
)
from lcsnav.pathfind import ObservationContext, naive_policy
from lcsnav.predicates import RegistryConfig, build_registry, convolve

from oracles import oracle_shortest


def full_knowledge_obs(domain, state=None):
    state = state or domain.start
    return FullObservation(state, ObservationMap(domain.cells.copy()), domain.goal)


def explored_obs(domain, steps=25, radius=4.0, seed=0):
    rng = np.random.default_rng(seed)
    vision = VisionConfig(radius)
    state = domain.start
    m = ObservationMap.unknown(domain.width, domain.height)
    m = accumulate(m, visible_patch(domain, state.position, vision))
    for _ in range(steps):
        state = step(domain, state, Action(int(rng.integers(3))))
        m = accumulate(m, visible_patch(domain, state.position, vision))
    return FullObservation(state, m, domain.goal)


class TestRegistryBuild:
    def test_direction_only_registry(self):
        cfg = RegistryConfig(
            width=10,
            height=10,
            vision_mode="off",
            x_anchors=(0,),
            y_anchors=(0,),
            goal_x_anchors=(0,),
            goal_y_anchors=(0,),
        )
        reg = build_registry(cfg)
        assert sum(1 for n in reg.names if n.startswith("dir[")) == 4

    def test_experiment_families(self):
        reg = build_registry(RegistryConfig.experiment(20, 20, 5))
        names = reg.names
        assert sum(1 for n in names if n.startswith("v[")) == 11 * 11
        assert "goal_distance" in names
        assert sum(1 for n in names if n.startswith("naive[")) == 3
        assert "dead_end" in names
        assert sum(1 for n in names if n.startswith("obstacle[")) == 3
        assert "predictive_forward" not in names  # separate opt-in family

    def test_order_deterministic(self):
        a = build_registry(RegistryConfig.experiment(20, 20, 5))
        b = build_registry(RegistryConfig.experiment(20, 20, 5))
        assert a.names == b.names

    def test_empty_config_rejected(self):
        with pytest.raises(ValueError):
            RegistryConfig(
                width=10,
                height=10,
                vision_mode="off",
                include_direction=False,
                x_anchors=(0,),
                y_anchors=(0,),
                goal_x_anchors=(0,),
                goal_y_anchors=(0,),
            )
            build_registry(
                RegistryConfig(
                    width=10, height=10, vision_mode="off", include_direction=False
                )
            )

    def test_anchor_bounds_checked(self):
        with pytest.raises(ValueError):
            RegistryConfig(width=10, height=10, x_anchors=(0, 11))


class TestFamilyValues:
    def setup_method(self):
        self.domain = generate_office_map(4, 20, 20)
        self.reg = build_registry(RegistryConfig.experiment(20, 20, 5))

    def value(self, obs, name):
        return self.reg.evaluate(obs)[self.reg.index_of(name)]

    def test_direction_scalar_products(self):
        obs = full_knowledge_obs(self.domain, RobotState(5, 5, DIR_SOUTH))
        assert self.value(obs, "dir[0,1]") == 1.0
        assert self.value(obs, "dir[1,0]") == 0.0
        assert self.value(obs, "dir[0,-1]") == -1.0

    def test_position_anchor_formula(self):
        obs = full_knowledge_obs(self.domain, RobotState(5, 7, DIR_SOUTH))
        assert self.value(obs, "px[0]") == pytest.approx(5 / 20)
        assert self.value(obs, "px[20]") == pytest.approx((5 - 20) / 20)
        assert self.value(obs, "py[0]") == pytest.approx(7 / 20)

    def test_goal_distance_endpoints(self):
        gx, gy = self.domain.goal
        free_near_goal = RobotState(gx, gy, DIR_SOUTH)
        obs = full_knowledge_obs(self.domain, free_near_goal)
        assert self.value(obs, "goal_distance") == pytest.approx(1.0)
        far = RobotState(0, 0, DIR_SOUTH)
        cells = self.domain.cells.copy()
        knowledge = cells.copy()
        knowledge[0, 0] = FREE
        obs_far = FullObservation(far, ObservationMap(knowledge), (19, 19))
        expect = 1 - 2 * math.hypot(19, 19) / math.hypot(20, 20)
        assert self.reg.evaluate(obs_far)[self.reg.index_of("goal_distance")] == pytest.approx(
            expect
        )

    def test_naive_indicator_partition(self):
        obs = explored_obs(self.domain, steps=10)
        vec = self.reg.evaluate(obs)
        vals = [vec[self.reg.index_of(f"naive[{a.name}]")] for a in Action]
        assert sorted(vals) == [-1.0, -1.0, 1.0]
        chosen = Action(int(np.argmax(vals)))
        assert chosen == naive_policy(obs)

    def test_vision_window_rotates_with_heading(self):
        knowledge = np.zeros((20, 20), dtype=np.int8)
        knowledge[5, 5] = FREE
        knowledge[5, 7] = OCCUPIED  # two cells east of the robot
        for d, name in [
            (DIR_EAST, "v[2,0]"),  # ahead
            (DIR_SOUTH, "v[0,-2]"),  # left side
            (DIR_NORTH, "v[0,2]"),  # right side
            (DIR_WEST, "v[-2,0]"),  # behind
        ]:
            obs = FullObservation(RobotState(5, 5, d), ObservationMap(knowledge), (10, 10))
            assert self.value(obs, name) == 1.0

    def test_vision_out_of_bounds_is_zero(self):
        knowledge = np.zeros((20, 20), dtype=np.int8)
        knowledge[0, 0] = FREE
        obs = FullObservation(RobotState(0, 0, DIR_NORTH), ObservationMap(knowledge), (10, 10))
        assert self.value(obs, "v[1,0]") == 0.0  # one step ahead is off-grid

    def test_absolute_vision_mode(self):
        cfg = RegistryConfig(width=5, height=5, vision_mode="absolute", window_radius=0)
        reg = build_registry(cfg)
        knowledge = np.zeros((5, 5), dtype=np.int8)
        knowledge[0, 0] = FREE
        knowledge[3, 2] = OCCUPIED
        obs = FullObservation(RobotState(0, 0, DIR_SOUTH), ObservationMap(knowledge), (4, 4))
        vec = reg.evaluate(obs)
        assert vec[reg.index_of("va[2,3]")] == 1.0
        assert vec[reg.index_of("va[0,0]")] == -1.0


class TestObstacles:
    def make_obs(self, wall_at=None, unknown_at=(), d=DIR_EAST):
        knowledge = np.full((11, 11), FREE, dtype=np.int8)
        for x, y in unknown_at:
            knowledge[y, x] = 0
        if wall_at:
            knowledge[wall_at[1], wall_at[0]] = OCCUPIED
        return FullObservation(RobotState(5, 5, d), ObservationMap(knowledge), (10, 10))

    def reg(self):
        return build_registry(RegistryConfig.experiment(11, 11, 3))

    def test_wall_ahead(self):
        reg = self.reg()
        obs = self.make_obs(wall_at=(7, 5))
        assert reg.evaluate(obs)[reg.index_of("obstacle[ahead]")] == 1.0

    def test_all_free_ray(self):
        reg = self.reg()
        obs = self.make_obs()
        assert reg.evaluate(obs)[reg.index_of("obstacle[ahead]")] == -1.0

    def test_partially_unknown_ray(self):
        reg = self.reg()
        obs = self.make_obs(unknown_at=[(7, 5)])
        assert reg.evaluate(obs)[reg.index_of("obstacle[ahead]")] == 0.0

    def test_border_counts_as_wall(self):
        reg = self.reg()
        obs = self.make_obs(d=DIR_NORTH)  # 5 cells to the border > ray 3? no: y=5, ray 3 -> y=2 ok
        knowledge = np.full((11, 11), FREE, dtype=np.int8)
        obs = FullObservation(RobotState(5, 1, DIR_NORTH), ObservationMap(knowledge), (10, 10))
        assert reg.evaluate(obs)[reg.index_of("obstacle[ahead]")] == 1.0

    def test_left_right_sides(self):
        reg = self.reg()
        obs = self.make_obs(wall_at=(5, 3), d=DIR_EAST)  # north of robot = left when facing east
        vec = reg.evaluate(obs)
        assert vec[reg.index_of("obstacle[left]")] == 1.0
        assert vec[reg.index_of("obstacle[right]")] == -1.0


class TestDeadEnd:
    def reg(self):
        return build_registry(RegistryConfig.experiment(7, 7, 2))

    def test_pocket_detected(self):
        # 1-wide pocket fully known, no frontier, goal outside.
        knowledge = np.full((7, 7), OCCUPIED, dtype=np.int8)
        knowledge[3, 1:6] = FREE  # corridor
        knowledge[2, 1] = FREE  # goal cell open elsewhere
        obs = FullObservation(RobotState(4, 3, DIR_EAST), ObservationMap(knowledge), (1, 2))
        reg = self.reg()
        assert reg.evaluate(obs)[reg.index_of("dead_end")] == 1.0

    def test_goal_in_region_is_not_dead_end(self):
        knowledge = np.full((7, 7), OCCUPIED, dtype=np.int8)
        knowledge[3, 1:6] = FREE
        obs = FullObservation(RobotState(4, 3, DIR_EAST), ObservationMap(knowledge), (5, 3))
        reg = self.reg()
        assert reg.evaluate(obs)[reg.index_of("dead_end")] == -1.0

    def test_frontier_is_not_dead_end(self):
        knowledge = np.full((7, 7), OCCUPIED, dtype=np.int8)
        knowledge[3, 1:6] = FREE
        knowledge[2, 5] = 0  # unknown next to the pocket
        obs = FullObservation(RobotState(4, 3, DIR_EAST), ObservationMap(knowledge), (1, 2))
        reg = self.reg()
        assert reg.evaluate(obs)[reg.index_of("dead_end")] == -1.0

    def test_unknown_behind_gives_zero(self):
        knowledge = np.full((7, 7), OCCUPIED, dtype=np.int8)
        knowledge[3, 3:6] = FREE
        knowledge[3, 2] = 0  # cell behind the robot unknown
        obs = FullObservation(RobotState(3, 3, DIR_EAST), ObservationMap(knowledge), (1, 2))
        reg = self.reg()
        assert reg.evaluate(obs)[reg.index_of("dead_end")] == 0.0


class TestPredictive:
    def reg(self, size=16):
        cfg = RegistryConfig(
            width=size, height=size, vision_mode="off", include_predictive=True
        )
        return build_registry(cfg)

    def test_soundness_random_views(self):
        # Whenever the predicate commits to +-1, the true distance after an
        # executed Forward must move strictly in that direction.
        reg = self.reg()
        idx = reg.index_of("predictive_forward")
        fired = {1.0: 0, -1.0: 0}
        rng = np.random.default_rng(31)
        for seed in range(40):
            d = generate_office_map(seed, 16, 16)
            obs = explored_obs(d, steps=int(rng.integers(5, 40)), seed=seed)
            value = reg.evaluate(obs)[idx]
            if value == 0.0:
                continue
            s = obs.robot
            ns = step(d, s, Action.FORWARD)
            true_before = int(d.goal_distance_field[s.d, s.y, s.x])
            true_after = int(d.goal_distance_field[ns.d, ns.y, ns.x])
            fired[value] += 1
            if value == 1.0:
                assert true_after > true_before
            else:
                assert true_after < true_before
        assert fired[-1.0] > 0  # the sweep must actually exercise the predicate


class TestConvolve:
    def test_single_coefficient(self):
        assert convolve([1.0], np.array([0.5])) == pytest.approx(0.5)

    def test_weighted_mix(self):
        assert convolve([3.0, 1.0], np.array([1.0, -1.0])) == pytest.approx(0.5)

    def test_positive_scale_invariance(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            alpha = rng.normal(size=7)
            if np.abs(alpha).sum() == 0:
                continue
            values = rng.uniform(-1, 1, 7)
            assert convolve(alpha * 3.7, values) == pytest.approx(convolve(alpha, values))

    def test_range_bound(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            alpha = rng.normal(size=11)
            alpha[rng.random(11) < 0.5] = 0
            if np.abs(alpha).sum() == 0:
                continue
            values = rng.uniform(-1, 1, 11)
            assert -1.0 <= convolve(alpha, values) <= 1.0


class TestRanges:
    def test_all_predicates_in_range_random_observations(self):
        reg = build_registry(RegistryConfig.experiment(18, 18, 4))
        for seed in range(15):
            d = generate_office_map(seed + 300, 18, 18)
            obs = explored_obs(d, steps=20, seed=seed)
            vec = reg.evaluate(obs)
            assert vec.shape == (reg.size,)
            assert (vec >= -1.0).all() and (vec <= 1.0).all()
