import math
import random

import numpy as np
import pytest

from curricula.errors import GoalOccupied, InvalidTask, NoPath, StartOccupied
from curricula.navigation import (
    PROFILES,
    AgentProfile,
    OccupancyGrid,
    Outcome,
    PlannerKind,
    Task,
    Trajectory,
    oracle_cost,
    path_cost,
    plan_shortest_path,
    rasterize,
    run_episode,
    solvable,
)
from curricula.placement import min_clearance
from curricula.scene import validate

from .conftest import box, make_room
from .oracles import flood_fill_reachable, value_iteration_cost

SQRT2 = math.sqrt(2.0)


# --- rasterize --------------------------------------------------------------

def test_empty_room_all_free(empty_room):
    grid = rasterize(empty_room, 0.1, inflation=0.0)
    assert grid.width == grid.height == 100
    assert grid.free_count == 100 * 100


def test_occupied_count_matches_area_oracle():
    scene = make_room([box("a", 5.0, 5.0, 0.5, 0.5)])
    grid = rasterize(scene, 0.1, inflation=0.0)
    occupied = (grid.cells).sum()
    area_cells = (1.0 * 1.0) / (0.1 * 0.1)
    boundary = 4 * (1.0 / 0.1) + 4  # perimeter cells may straddle the edge
    assert abs(occupied - area_cells) <= boundary


def test_inflated_set_is_superset():
    scene = make_room([box("a", 5.0, 5.0, 0.5, 0.5)])
    g0 = rasterize(scene, 0.1, inflation=0.0)
    g2 = rasterize(scene, 0.1, inflation=0.2)
    assert (g2.cells | g0.cells).sum() == g2.cells.sum()
    assert g2.cells.sum() > g0.cells.sum()


def test_inflation_covers_walls():
    scene = make_room([])
    grid = rasterize(scene, 0.1, inflation=0.25)
    assert grid.cells[0, :].all() and grid.cells[-1, :].all()
    assert grid.cells[:, 0].all() and grid.cells[:, -1].all()
    assert not grid.cells[50, 50]


# --- plan_shortest_path ------------------------------------------------------

def grid_from_array(arr) -> OccupancyGrid:
    a = np.asarray(arr, dtype=bool)
    return OccupancyGrid(resolution=1.0, width=a.shape[1], height=a.shape[0],
                         cells=a, inflation_radius=0.0, origin=(0.0, 0.0))


def test_start_equals_goal():
    grid = grid_from_array(np.zeros((5, 5)))
    path = plan_shortest_path(grid, (2.5, 2.5), (2.5, 2.5))
    assert len(path) == 1
    assert path_cost(path, 1.0) == 0.0


def test_corner_to_corner_cost():
    grid = grid_from_array(np.zeros((10, 10)))
    path = plan_shortest_path(grid, (0.5, 0.5), (9.5, 9.5))
    assert path_cost(path, 1.0) == pytest.approx(9 * SQRT2)


def test_occupied_endpoints_raise():
    a = np.zeros((5, 5))
    a[2, 2] = 1
    grid = grid_from_array(a)
    with pytest.raises(StartOccupied):
        plan_shortest_path(grid, (2.5, 2.5), (4.5, 4.5))
    with pytest.raises(GoalOccupied):
        plan_shortest_path(grid, (0.5, 0.5), (2.5, 2.5))


def test_no_path_raises():
    a = np.zeros((7, 7))
    a[:, 3] = 1
    grid = grid_from_array(a)
    with pytest.raises(NoPath):
        plan_shortest_path(grid, (0.5, 0.5), (6.5, 6.5))


def random_maze(rng, n=20, density=0.25):
    a = (np.array([[rng.random() for _ in range(n)] for _ in range(n)]) < density)
    a[0, 0] = False
    a[n - 1, n - 1] = False
    return a


def test_random_mazes_match_value_iteration_oracle():
    rng = random.Random(5)
    agree = 0
    for _ in range(50):
        a = random_maze(rng)
        grid = grid_from_array(a)
        goal_mask = np.zeros_like(a)
        goal_mask[-1, -1] = True
        expect = value_iteration_cost(a, (0, 0), goal_mask)
        try:
            path = plan_shortest_path(grid, (0.5, 0.5), (19.5, 19.5))
            got = path_cost(path, 1.0)
        except NoPath:
            got = None
        if expect is None:
            assert got is None
        else:
            assert got == pytest.approx(expect, abs=1e-9)
        agree += 1
    assert agree == 50


# --- solvable ----------------------------------------------------------------

def test_empty_room_solvable():
    scene = make_room([box("fridge", 9.0, 9.0, 0.4, 0.4, movable=False, target=True)])
    task = Task((1.0, 1.0), 0.0, "fridge", 0.8)
    assert solvable(scene, task, 0.25)


def test_walled_off_target_unsolvable():
    walls = [
        box("w1", 8.5, 7.0, 1.5, 0.2, movable=False),
        box("w2", 8.5, 10.0 - 0.2, 1.5, 0.2, movable=False),
        box("w3", 7.0, 8.6, 0.2, 1.5, movable=False),
    ]
    target = box("fridge", 8.8, 8.6, 0.4, 0.4, movable=False, target=True)
    scene = make_room(walls + [target])
    task = Task((1.0, 1.0), 0.0, "fridge", 0.5)
    assert not solvable(scene, task, 0.25)


def test_solvable_matches_flood_fill_oracle(golden_scene, golden_task):
    from curricula.navigation import _goal_mask, rasterize_cached

    rng = random.Random(9)
    for _ in range(30):
        oid = rng.choice(["chair_1", "sofa_1"])
        dx, dy = rng.uniform(-2, 2), rng.uniform(-2, 2)
        obj = golden_scene.get(oid)
        cand = golden_scene.with_object_pose(
            oid, (obj.position[0] + dx, obj.position[1] + dy), obj.rotation)
        if not validate(cand).empty:
            continue
        got = solvable(cand, golden_task, 0.25)
        grid = rasterize_cached(cand, 0.05, 0.25)
        mask = _goal_mask(grid, cand, golden_task)
        want = flood_fill_reachable(grid.cells, grid.world_to_cell(golden_task.start), mask)
        assert got == want


def test_solvable_monotone_in_radius(golden_scene, golden_task):
    radii = [0.05, 0.15, 0.25, 0.35, 0.45, 0.6]
    flags = [solvable(golden_scene, golden_task, r) for r in radii]
    # once unsolvable at some radius, stays unsolvable at larger radii
    for small, big in zip(flags, flags[1:]):
        assert small or not big


# --- run_episode --------------------------------------------------------------

def test_optimal_profile_reaches_target(golden_scene, golden_task):
    traj = run_episode(golden_scene, golden_task, PROFILES["optimal"], seed=0)
    assert traj.outcome is Outcome.SUCCESS
    assert traj.actions[-1] == "done"
    best = oracle_cost(golden_scene, golden_task, 0.25)
    assert traj.path_length <= best * 1.05 + 0.075  # one cell diagonal of slack


def test_enclosed_target_fails_at_start():
    walls = [
        box("w1", 8.5, 7.0, 1.5, 0.2, movable=False),
        box("w2", 8.5, 9.8, 1.5, 0.2, movable=False),
        box("w3", 7.0, 8.4, 0.2, 1.6, movable=False),
    ]
    target = box("fridge", 8.8, 8.6, 0.4, 0.4, movable=False, target=True)
    scene = make_room(walls + [target])
    task = Task((1.0, 1.0), 0.0, "fridge", 0.5)
    traj = run_episode(scene, task, PROFILES["optimal"], seed=0)
    assert traj.outcome is Outcome.FAILURE_STUCK
    assert len(traj.poses) == 1


def test_clearance_blind_gets_stuck_in_tight_corridor():
    # corridor 0.3 m wide: passable for a point, not for radius 0.25
    left = box("left", 3.0, 5.0, 1.0, 2.0, movable=False)
    right = box("right", 5.3, 5.0, 1.0, 2.0, movable=False)
    target = box("fridge", 4.15, 9.0, 0.3, 0.3, movable=False, target=True)
    scene = make_room([left, right, target])
    task = Task((4.15, 1.0), 90.0, "fridge", 0.8)

    blind = run_episode(scene, task, PROFILES["clearance_blind"], seed=0)
    assert blind.outcome is Outcome.FAILURE_STUCK
    # stuck pose is the first colliding pose: inside the inflated corridor band
    stuck = blind.poses[-1][1]
    assert min_clearance(scene, stuck) < 0.25

    optimal = run_episode(scene, task, PROFILES["optimal"], seed=0)
    assert optimal.outcome is not Outcome.SUCCESS or optimal.path_length > 0


def test_greedy_gets_stuck_behind_wall():
    wall = box("wall", 5.0, 5.0, 2.5, 0.2, movable=False)
    target = box("fridge", 5.0, 8.0, 0.4, 0.4, movable=False, target=True)
    scene = make_room([wall, target])
    task = Task((5.0, 2.0), 90.0, "fridge", 0.8)
    traj = run_episode(scene, task, PROFILES["greedy"], seed=0)
    assert traj.outcome is Outcome.FAILURE_STUCK

    optimal = run_episode(scene, task, PROFILES["optimal"], seed=0)
    assert optimal.outcome is Outcome.SUCCESS


def test_determinism_and_serialization(golden_scene, golden_task):
    a = run_episode(golden_scene, golden_task, PROFILES["optimal_noisy"], seed=42)
    b = run_episode(golden_scene, golden_task, PROFILES["optimal_noisy"], seed=42)
    assert a == b
    assert a.to_json() == b.to_json()
    c = run_episode(golden_scene, golden_task, PROFILES["optimal_noisy"], seed=43)
    assert a.seed != c.seed


def test_path_length_is_sum_of_pose_distances(golden_scene, golden_task):
    traj = run_episode(golden_scene, golden_task, PROFILES["optimal"], seed=1)
    pts = [p for _, p, _ in traj.poses]
    total = sum(math.dist(a, b) for a, b in zip(pts, pts[1:]))
    assert traj.path_length == pytest.approx(total)


def test_min_clearance_along_path_matches_pointwise(golden_scene, golden_task):
    traj = run_episode(golden_scene, golden_task, PROFILES["optimal"], seed=1)
    per_pose = [min_clearance(golden_scene, p) for _, p, _ in traj.poses]
    assert traj.min_clearance_along_path == pytest.approx(min(per_pose))


def test_outcome_matches_success_radius(golden_scene, golden_task):
    from curricula.geometry import point_obb_distance

    traj = run_episode(golden_scene, golden_task, PROFILES["optimal"], seed=2)
    final = np.array([traj.poses[-1][1]])
    target = golden_scene.get(golden_task.target_object_id).footprint
    d = float(point_obb_distance(final, target)[0])
    assert (traj.outcome is Outcome.SUCCESS) == (d <= golden_task.success_radius)


def test_invalid_task_rejected(golden_scene):
    with pytest.raises(InvalidTask):
        run_episode(golden_scene, Task((1, 1), 0, "ghost", 0.8), PROFILES["optimal"], 0)
    with pytest.raises(InvalidTask):
        # bed is not a target candidate
        run_episode(golden_scene, Task((1, 1), 0, "bed_1", 0.8), PROFILES["optimal"], 0)
    with pytest.raises(InvalidTask):
        # start inside the bed footprint
        run_episode(golden_scene, Task((4.2, 6.6), 0, "fridge_1", 0.8),
                    PROFILES["optimal"], 0)


def test_noise_profile_validates_probability():
    with pytest.raises(ValueError):
        AgentProfile("bad", PlannerKind.OPTIMAL, action_noise_prob=1.5)
    with pytest.raises(ValueError):
        AgentProfile("bad", PlannerKind.OPTIMAL, max_steps=0)


def test_trajectory_round_trip(golden_scene, golden_task):
    traj = run_episode(golden_scene, golden_task, PROFILES["optimal"], seed=3)
    again = Trajectory.from_json(traj.to_json())
    assert again.outcome == traj.outcome
    assert again.profile_name == traj.profile_name
    assert len(again.poses) == len(traj.poses)
    assert again.actions == traj.actions
