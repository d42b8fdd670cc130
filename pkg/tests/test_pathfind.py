import numpy as np
import pytest

from lcsnav import _kernels
from lcsnav.gridworld import (
    DIR_EAST,
    DIR_SOUTH,
    DIR_WEST,
    FREE,
    OCCUPIED,
    Action,
    FullObservation,
    GridDomain,
    ObservationMap,
    RobotState,
    VisionConfig,
    accumulate,
    generate_office_map,
    load_map,
    step,
    visible_patch,
)
from lcsnav.pathfind import (
    UNREACHABLE,
    GridView,
    ObservationContext,
    UnknownMode,
    distance_bounds,
    distance_field,
    naive_policy,
    shortest_path,
)

from oracles import oracle_shortest, random_solvable_grid


def corridor():
    return load_map("3 1\nS.G\n")


class TestShortestPath:
    def test_corridor_forward(self):
        d = corridor()
        r = shortest_path(GridView.from_domain(d), RobotState(0, 0, DIR_EAST), (2, 0))
        assert (r.length, r.first_action) == (2, Action.FORWARD)

    def test_corridor_facing_away(self):
        d = corridor()
        r = shortest_path(GridView.from_domain(d), RobotState(0, 0, DIR_WEST), (2, 0))
        assert r.length == 4

    def test_at_goal(self):
        d = corridor()
        r = shortest_path(GridView.from_domain(d), RobotState(2, 0, DIR_EAST), (2, 0))
        assert (r.length, r.first_action) == (0, None)

    def test_unreachable_is_not_an_error(self):
        cells = np.array([[FREE, OCCUPIED, FREE]], dtype=np.int8)
        view = GridView(cells, UnknownMode.AS_FREE)
        r = shortest_path(view, RobotState(0, 0, DIR_EAST), (2, 0))
        assert not r.reachable
        assert r.first_action is None

    def test_matches_oracle_on_random_grids(self):
        rng = np.random.default_rng(2024)
        for _ in range(60):
            grid, (sx, sy, sd), goal = random_solvable_grid(rng)
            view = GridView(np.where(grid, FREE, OCCUPIED).astype(np.int8), UnknownMode.AS_FREE)
            got = shortest_path(view, RobotState(sx, sy, sd), goal)
            assert got.length == oracle_shortest(grid, (sx, sy, sd), goal)

    def test_first_action_is_optimal(self):
        # Following first_action greedily must walk a shortest path.
        rng = np.random.default_rng(5)
        for _ in range(20):
            grid, (sx, sy, sd), goal = random_solvable_grid(rng)
            cells = np.where(grid, FREE, OCCUPIED).astype(np.int8)
            view = GridView(cells, UnknownMode.AS_FREE)
            field = distance_field(view, goal)
            state = RobotState(sx, sy, sd)
            length = shortest_path(view, state, goal, field).length
            domain = GridDomain(cells, state, goal)
            for _ in range(length):
                act = shortest_path(view, state, goal, field).first_action
                state = step(domain, state, act)
            assert state.position == goal

    def test_monotone_under_obstacles(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            grid, (sx, sy, sd), goal = random_solvable_grid(rng)
            cells = np.where(grid, FREE, OCCUPIED).astype(np.int8)
            base = shortest_path(
                GridView(cells, UnknownMode.AS_FREE), RobotState(sx, sy, sd), goal
            ).length
            blocked = cells.copy()
            free = [
                (y, x)
                for y, x in np.argwhere(blocked == FREE)
                if (x, y) not in (goal, (sx, sy))
            ]
            if not free:
                continue
            y, x = free[int(rng.integers(len(free)))]
            blocked[y, x] = OCCUPIED
            harder = shortest_path(
                GridView(blocked, UnknownMode.AS_FREE), RobotState(sx, sy, sd), goal
            ).length
            assert harder >= base

    def test_executed_action_decreases_by_at_most_one(self):
        # rho(s) - rho(step(s, a)) <= 1 for every action on a known view;
        # a single command can shorten the remaining path by at most itself.
        rng = np.random.default_rng(23)
        for _ in range(10):
            d = generate_office_map(int(rng.integers(10_000)), 20, 20)
            field = d.goal_distance_field
            s = d.start
            for _ in range(60):
                a = Action(int(rng.integers(3)))
                ns = step(d, s, a)
                before = field[s.d, s.y, s.x]
                after = field[ns.d, ns.y, ns.x]
                assert before - after <= 1
                if a != Action.FORWARD:
                    assert abs(int(before) - int(after)) <= 1
                s = ns


class TestUnknownModes:
    def test_as_occupied_blocks_unknowns(self):
        grid = np.zeros((1, 3), dtype=np.int8)  # all unknown
        grid[0, 0] = FREE
        free_len = shortest_path(
            GridView(grid, UnknownMode.AS_FREE), RobotState(0, 0, DIR_EAST), (2, 0)
        ).length
        occ_len = shortest_path(
            GridView(grid, UnknownMode.AS_OCCUPIED), RobotState(0, 0, DIR_EAST), (2, 0)
        ).length
        assert free_len == 2
        assert occ_len >= UNREACHABLE

    def test_adjacent_unknown_goal_enterable(self):
        grid = np.zeros((1, 2), dtype=np.int8)
        grid[0, 0] = FREE
        r = shortest_path(GridView(grid, UnknownMode.AS_OCCUPIED), RobotState(0, 0, DIR_EAST), (1, 0))
        assert r.length == 1


class TestNaivePolicy:
    def obs_on(self, domain, state, radius=5.0):
        m = accumulate(
            ObservationMap.unknown(domain.width, domain.height),
            visible_patch(domain, state.position, VisionConfig(radius)),
        )
        return FullObservation(state, m, domain.goal)

    def test_goal_ahead(self):
        d = corridor()
        obs = self.obs_on(d, RobotState(1, 0, DIR_EAST))
        assert naive_policy(obs) == Action.FORWARD

    def test_optimistic_straight_line(self):
        knowledge = np.zeros((1, 7), dtype=np.int8)
        knowledge[0, 0] = FREE
        obs = FullObservation(RobotState(0, 0, DIR_EAST), ObservationMap(knowledge), (5, 0))
        assert naive_policy(obs) == Action.FORWARD

    def test_detour_matches_oracle(self):
        # A revealed wall across the straight line forces the same first
        # action the brute-force search picks on the identical view.
        knowledge = np.zeros((5, 5), dtype=np.int8)
        knowledge[0, :] = FREE
        knowledge[1, 2] = OCCUPIED
        knowledge[1, 0] = FREE
        obs = FullObservation(RobotState(2, 0, DIR_SOUTH), ObservationMap(knowledge), (2, 4))
        act = naive_policy(obs)
        passable = knowledge <= 0
        best = oracle_shortest(passable, (2, 0, DIR_SOUTH), (2, 4))
        after = {
            Action.FORWARD: (2, 1, DIR_SOUTH),
            Action.TURN_LEFT: (2, 0, DIR_EAST),
            Action.TURN_RIGHT: (2, 0, DIR_WEST),
        }[act]
        assert oracle_shortest(passable, after, (2, 4)) == best - 1

    def test_completeness_on_generated_maps(self):
        vision = VisionConfig(5.0)
        for seed in range(10):
            d = generate_office_map(seed, 30, 30)
            state = d.start
            m = ObservationMap.unknown(30, 30)
            commands = 0
            limit = 10 * 30 * 30
            while state.position != d.goal and commands < limit:
                m = accumulate(m, visible_patch(d, state.position, vision))
                act = naive_policy(FullObservation(state, m, d.goal))
                state = step(d, state, act)
                commands += 1
            assert state.position == d.goal


class TestDistanceBounds:
    def test_known_map_bounds_collapse(self):
        d = corridor()
        knowledge = d.cells.copy()
        obs = FullObservation(RobotState(0, 0, DIR_EAST), ObservationMap(knowledge), (2, 0))
        lo, up = distance_bounds(obs, RobotState(0, 0, DIR_EAST))
        assert lo == up == 2

    def test_unknown_map_bounds(self):
        knowledge = np.zeros((3, 5), dtype=np.int8)
        knowledge[1, 1] = FREE
        obs = FullObservation(RobotState(1, 1, DIR_EAST), ObservationMap(knowledge), (4, 1))
        lo, up = distance_bounds(obs, RobotState(1, 1, DIR_EAST))
        assert lo == 3  # straight optimistic line
        assert up == UNREACHABLE  # non-adjacent goal, everything else unknown

    def test_sandwich_on_partial_views(self):
        rng = np.random.default_rng(99)
        vision = VisionConfig(3.0)
        checked = 0
        for seed in range(25):
            d = generate_office_map(seed, 16, 16)
            state = d.start
            m = ObservationMap.unknown(16, 16)
            for _ in range(12):
                m = accumulate(m, visible_patch(d, state.position, vision))
                obs = FullObservation(state, m, d.goal)
                lo, up = distance_bounds(obs, state)
                true = int(d.goal_distance_field[state.d, state.y, state.x])
                assert lo <= true <= up
                checked += 1
                state = step(d, state, naive_policy(obs))
                if state.position == d.goal:
                    break
        assert checked > 100


class TestBackendParity:
    def test_distance_field_backends_agree(self):
        rng = np.random.default_rng(0)
        for _ in range(40):
            h, w = rng.integers(3, 16, 2)
            trav = (rng.random((h, w)) > 0.35).astype(np.uint8)
            gx, gy = int(rng.integers(w)), int(rng.integers(h))
            assert np.array_equal(
                _kernels.distance_field_raw(trav, gx, gy),
                _kernels.distance_field_numpy(trav, gx, gy),
            )

    def test_reachable_backends_agree(self):
        rng = np.random.default_rng(1)
        for _ in range(40):
            h, w = rng.integers(3, 16, 2)
            mask = (rng.random((h, w)) > 0.4).astype(np.uint8)
            sx, sy = int(rng.integers(w)), int(rng.integers(h))
            assert np.array_equal(
                _kernels.reachable_cells_raw(mask, sx, sy),
                _kernels.reachable_cells_numpy(mask, sx, sy),
            )
