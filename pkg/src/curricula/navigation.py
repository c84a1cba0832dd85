"""Occupancy grids, grid planning, and parameterized navigation agents.

Scenes are rasterized to boolean occupancy grids (optionally inflated by
the agent radius); paths are planned 8-connected with diagonal cost sqrt(2);
episodes step a discrete agent (forward / rotate 45-degree / done actions)
along its plan and record a timestamped trajectory.

Agent profiles stand in for a trained navigation policy with reproducible
failure modes: an optimal planner, a clearance-blind planner that ignores
its own body radius, and a greedy local controller, each with optional
action noise.
"""

from __future__ import annotations

import enum
import json
import math
import random
from dataclasses import dataclass
from heapq import heappop, heappush

import numpy as np
from scipy import ndimage

from . import config
from .errors import GoalOccupied, InvalidTask, NoPath, StartOccupied
from .geometry import Point, point_obb_distance, quantize
from .placement import min_clearance_batch
from .scene import SceneGraph

SQRT2 = math.sqrt(2.0)

# fixed row-major neighbor expansion order: (dx, dy), dy outer
NEIGHBORS_8 = (
    (-1, -1), (0, -1), (1, -1),
    (-1, 0), (1, 0),
    (-1, 1), (0, 1), (1, 1),
)

_EIGHT_CONN = np.ones((3, 3), dtype=bool)


class Outcome(enum.Enum):
    SUCCESS = "success"
    FAILURE_TIMEOUT = "failure_timeout"
    FAILURE_STUCK = "failure_stuck"


class PlannerKind(enum.Enum):
    OPTIMAL = "optimal"
    CLEARANCE_BLIND = "clearance_blind"
    GREEDY = "greedy"


@dataclass(frozen=True)
class AgentProfile:
    name: str
    planner: PlannerKind = PlannerKind.OPTIMAL
    action_noise_prob: float = 0.0
    max_steps: int | None = None  # None: 4x plan length, min 500
    agent_radius: float = config.DEFAULTS["navigation.agent_radius"]

    def __post_init__(self):
        if not 0.0 <= self.action_noise_prob <= 1.0:
            raise ValueError("action_noise_prob must be in [0, 1]")
        if self.max_steps is not None and self.max_steps <= 0:
            raise ValueError("max_steps must be positive")


PROFILES: dict[str, AgentProfile] = {
    "optimal": AgentProfile("optimal", PlannerKind.OPTIMAL),
    "clearance_blind": AgentProfile("clearance_blind", PlannerKind.CLEARANCE_BLIND),
    "greedy": AgentProfile("greedy", PlannerKind.GREEDY),
    "optimal_noisy": AgentProfile("optimal_noisy", PlannerKind.OPTIMAL, action_noise_prob=0.05),
}


@dataclass(frozen=True)
class Task:
    start: Point
    heading: float
    target_object_id: str
    success_radius: float

    def to_doc(self) -> dict:
        return {
            "start": [quantize(self.start[0]), quantize(self.start[1])],
            "heading": quantize(self.heading),
            "target_object_id": self.target_object_id,
            "success_radius": quantize(self.success_radius),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Task":
        return cls(
            start=tuple(doc["start"]),
            heading=float(doc.get("heading", 0.0)),
            target_object_id=str(doc["target_object_id"]),
            success_radius=float(doc["success_radius"]),
        )


@dataclass(frozen=True)
class OccupancyGrid:
    resolution: float
    width: int          # cells along x
    height: int         # cells along y
    cells: np.ndarray   # bool (height, width), True = occupied
    inflation_radius: float
    origin: Point       # world coords of the bounds min corner

    def world_to_cell(self, p) -> tuple[int, int]:
        ix = int((p[0] - self.origin[0]) / self.resolution)
        iy = int((p[1] - self.origin[1]) / self.resolution)
        return min(max(ix, 0), self.width - 1), min(max(iy, 0), self.height - 1)

    def cell_center(self, ix: int, iy: int) -> Point:
        return (
            self.origin[0] + (ix + 0.5) * self.resolution,
            self.origin[1] + (iy + 0.5) * self.resolution,
        )

    def free(self, ix: int, iy: int) -> bool:
        return not bool(self.cells[iy, ix])

    @property
    def free_count(self) -> int:
        return int((~self.cells).sum())


def rasterize(scene: SceneGraph, resolution: float | None = None,
              inflation: float = 0.0) -> OccupancyGrid:
    """Occupancy grid over the scene bounds.

    A cell is occupied when its center lies within ``inflation`` of any
    footprint or of the room boundary (walls are collision bodies too).
    """
    if resolution is None:
        resolution = config.DEFAULTS["navigation.resolution"]
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    b = scene.bounds
    nx = max(1, math.ceil(b.width / resolution - 1e-9))
    ny = max(1, math.ceil(b.height / resolution - 1e-9))
    xs = b.min[0] + (np.arange(nx) + 0.5) * resolution
    ys = b.min[1] + (np.arange(ny) + 0.5) * resolution
    gx, gy = np.meshgrid(xs, ys)  # (ny, nx)
    pts = np.column_stack([gx.ravel(), gy.ravel()])

    occupied = (
        (pts[:, 0] - b.min[0] <= inflation)
        | (b.max[0] - pts[:, 0] <= inflation)
        | (pts[:, 1] - b.min[1] <= inflation)
        | (b.max[1] - pts[:, 1] <= inflation)
    ) if inflation > 0 else np.zeros(len(pts), dtype=bool)
    occupied |= (pts[:, 0] > b.max[0]) | (pts[:, 1] > b.max[1])
    for obj in scene.objects:
        occupied |= point_obb_distance(pts, obj.footprint) <= inflation

    return OccupancyGrid(
        resolution=resolution,
        width=nx,
        height=ny,
        cells=occupied.reshape(ny, nx),
        inflation_radius=inflation,
        origin=b.min,
    )


_grid_cache: dict[tuple, OccupancyGrid] = {}


def rasterize_cached(scene: SceneGraph, resolution: float, inflation: float) -> OccupancyGrid:
    key = (scene.fingerprint, round(resolution, 6), round(inflation, 6))
    grid = _grid_cache.get(key)
    if grid is None:
        grid = rasterize(scene, resolution, inflation)
        if len(_grid_cache) > 128:
            _grid_cache.clear()
        _grid_cache[key] = grid
    return grid


# ---------------------------------------------------------------------------
# planning
# ---------------------------------------------------------------------------

def _octile(ax: int, ay: int, bx: int, by: int) -> float:
    dx, dy = abs(ax - bx), abs(ay - by)
    return (dx + dy) + (SQRT2 - 2.0) * min(dx, dy)


def _search_cells(cells: np.ndarray, start: tuple[int, int],
                  goal_mask: np.ndarray,
                  heuristic_to: tuple[int, int] | None) -> list[tuple[int, int]] | None:
    """A* (or Dijkstra when no single heuristic target) over flat indices."""
    ny, nx = cells.shape
    n = nx * ny
    sx, sy = start
    s_idx = sy * nx + sx
    occ = cells.ravel()
    goals = goal_mask.ravel()
    g = np.full(n, np.inf)
    prev = np.full(n, -1, dtype=np.int64)
    g[s_idx] = 0.0
    closed = np.zeros(n, dtype=bool)
    counter = 0
    heap: list[tuple[float, int, int]] = []
    h0 = _octile(sx, sy, *heuristic_to) if heuristic_to else 0.0
    heappush(heap, (h0, counter, s_idx))
    goal_idx = -1
    while heap:
        _, _, idx = heappop(heap)
        if closed[idx]:
            continue
        closed[idx] = True
        if goals[idx]:
            goal_idx = idx
            break
        iy, ix = divmod(idx, nx)
        base = g[idx]
        for dx, dy in NEIGHBORS_8:
            jx, jy = ix + dx, iy + dy
            if jx < 0 or jy < 0 or jx >= nx or jy >= ny:
                continue
            j = jy * nx + jx
            if occ[j] or closed[j]:
                continue
            cost = base + (SQRT2 if dx and dy else 1.0)
            if cost < g[j]:
                g[j] = cost
                prev[j] = idx
                counter += 1
                h = _octile(jx, jy, *heuristic_to) if heuristic_to else 0.0
                heappush(heap, (cost + h, counter, j))
    if goal_idx < 0:
        return None
    path = []
    idx = goal_idx
    while idx >= 0:
        iy, ix = divmod(idx, nx)
        path.append((ix, iy))
        idx = int(prev[idx])
    path.reverse()
    return path


def cells_path_cost(path: list[tuple[int, int]]) -> float:
    """Canonical cost of a cell path: straights + sqrt(2) * diagonals."""
    straight = diag = 0
    for (ax, ay), (bx, by) in zip(path, path[1:]):
        if ax != bx and ay != by:
            diag += 1
        else:
            straight += 1
    return straight + SQRT2 * diag


def plan_shortest_path(grid: OccupancyGrid, start: Point, goal: Point) -> list[Point]:
    """Minimal-cost 8-connected path between two world points.

    Returns cell-center waypoints including both endpoints' cells.
    """
    s = grid.world_to_cell(start)
    t = grid.world_to_cell(goal)
    if not grid.free(*s):
        raise StartOccupied(f"start cell {s} occupied")
    if not grid.free(*t):
        raise GoalOccupied(f"goal cell {t} occupied")
    goal_mask = np.zeros_like(grid.cells)
    goal_mask[t[1], t[0]] = True
    path = _search_cells(grid.cells, s, goal_mask, heuristic_to=t)
    if path is None:
        raise NoPath(f"no path {s} -> {t}")
    return [grid.cell_center(ix, iy) for ix, iy in path]


def path_cost(points: list[Point], resolution: float) -> float:
    """Canonical world-unit cost of a cell-center path."""
    straight = diag = 0
    for (ax, ay), (bx, by) in zip(points, points[1:]):
        dx = round((bx - ax) / resolution)
        dy = round((by - ay) / resolution)
        if dx and dy:
            diag += 1
        elif dx or dy:
            straight += 1
    return (straight + SQRT2 * diag) * resolution


def _goal_mask(grid: OccupancyGrid, scene: SceneGraph, task: Task) -> np.ndarray:
    target = scene.get(task.target_object_id)
    if target is None:
        raise InvalidTask(f"unknown target object {task.target_object_id}")
    xs = grid.origin[0] + (np.arange(grid.width) + 0.5) * grid.resolution
    ys = grid.origin[1] + (np.arange(grid.height) + 0.5) * grid.resolution
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    near = point_obb_distance(pts, target.footprint) <= task.success_radius
    return near.reshape(grid.height, grid.width) & ~grid.cells


_plan_cache: dict[tuple, list[tuple[int, int]] | None] = {}


def _plan_to_goal_region(grid: OccupancyGrid, scene: SceneGraph, task: Task,
                         start_cell: tuple[int, int]) -> list[tuple[int, int]] | None:
    key = (scene.fingerprint, round(grid.resolution, 6), round(grid.inflation_radius, 6),
           start_cell, task.target_object_id, round(task.success_radius, 6))
    if key in _plan_cache:
        return _plan_cache[key]
    mask = _goal_mask(grid, scene, task)
    path = None if not mask.any() else _search_cells(grid.cells, start_cell, mask, None)
    if len(_plan_cache) > 512:
        _plan_cache.clear()
    _plan_cache[key] = path
    return path


def solvable(scene: SceneGraph, task: Task, agent_radius: float,
             resolution: float | None = None) -> bool:
    """True iff an inflated-grid path reaches the target's success region."""
    if resolution is None:
        resolution = config.DEFAULTS["navigation.resolution"]
    if scene.get(task.target_object_id) is None:
        return False
    if not scene.bounds.contains_point(task.start):
        return False
    grid = rasterize_cached(scene, resolution, agent_radius)
    s = grid.world_to_cell(task.start)
    if not grid.free(*s):
        return False
    mask = _goal_mask(grid, scene, task)
    if not mask.any():
        return False
    labels, _ = ndimage.label(~grid.cells, structure=_EIGHT_CONN)
    start_label = labels[s[1], s[0]]
    return bool((labels[mask] == start_label).any())


def oracle_cost(scene: SceneGraph, task: Task, agent_radius: float,
                resolution: float | None = None) -> float | None:
    """Shortest-path cost (world units) to the success region, or None."""
    if resolution is None:
        resolution = config.DEFAULTS["navigation.resolution"]
    grid = rasterize_cached(scene, resolution, agent_radius)
    s = grid.world_to_cell(task.start)
    if not grid.free(*s):
        return None
    path = _plan_to_goal_region(grid, scene, task, s)
    if path is None:
        return None
    return cells_path_cost(path) * resolution


def oracle_path_points(scene: SceneGraph, task: Task, agent_radius: float,
                       resolution: float | None = None) -> list[Point] | None:
    if resolution is None:
        resolution = config.DEFAULTS["navigation.resolution"]
    grid = rasterize_cached(scene, resolution, agent_radius)
    s = grid.world_to_cell(task.start)
    if not grid.free(*s):
        return None
    path = _plan_to_goal_region(grid, scene, task, s)
    if path is None:
        return None
    return [grid.cell_center(ix, iy) for ix, iy in path]


# ---------------------------------------------------------------------------
# episodes
# ---------------------------------------------------------------------------

ACTION_FORWARD = "forward"
ACTION_LEFT = "rotate_left"
ACTION_RIGHT = "rotate_right"
ACTION_DONE = "done"

def _snap_heading(h: float) -> float:
    return (round(h / 45.0) * 45.0) % 360.0


def _heading_of(dx: int, dy: int) -> float:
    return math.degrees(math.atan2(dy, dx)) % 360.0


def _heading_vec(heading: float) -> tuple[int, int]:
    rad = math.radians(heading)
    return int(round(math.cos(rad))), int(round(math.sin(rad)))


@dataclass(frozen=True)
class Trajectory:
    task: Task
    profile_name: str
    seed: int
    poses: tuple[tuple[int, Point, float], ...]  # (t, point, heading)
    actions: tuple[str, ...]
    outcome: Outcome
    path_length: float
    min_clearance_along_path: float

    def to_doc(self) -> dict:
        return {
            "task": self.task.to_doc(),
            "profile": self.profile_name,
            "seed": self.seed,
            "poses": [
                [t, [quantize(p[0]), quantize(p[1])], quantize(h)]
                for t, p, h in self.poses
            ],
            "actions": list(self.actions),
            "outcome": self.outcome.value,
            "path_length": quantize(self.path_length),
            "min_clearance": quantize(self.min_clearance_along_path),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_doc(), separators=(",", ":"))

    @classmethod
    def from_doc(cls, doc: dict) -> "Trajectory":
        poses = tuple((int(t), (p[0], p[1]), float(h)) for t, p, h in doc["poses"])
        return cls(
            task=Task.from_doc(doc["task"]),
            profile_name=str(doc["profile"]),
            seed=int(doc["seed"]),
            poses=poses,
            actions=tuple(doc["actions"]),
            outcome=Outcome(doc["outcome"]),
            path_length=float(doc["path_length"]),
            min_clearance_along_path=float(doc["min_clearance"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "Trajectory":
        return cls.from_doc(json.loads(text))


def _poses_length(points: list[Point]) -> float:
    total = 0.0
    for a, b in zip(points, points[1:]):
        total += math.hypot(b[0] - a[0], b[1] - a[1])
    return total


def run_episode(scene: SceneGraph, task: Task, profile: AgentProfile,
                seed: int, resolution: float | None = None) -> Trajectory:
    """One navigation episode; deterministic for fixed inputs.

    The clearance-blind planner plans on the uninflated grid but the body
    still occupies its true radius, so a plan that squeezes past furniture
    ends in a stuck failure at the first colliding pose.
    """
    if resolution is None:
        resolution = config.DEFAULTS["navigation.resolution"]
    target = scene.get(task.target_object_id)
    if target is None:
        raise InvalidTask(f"unknown target object {task.target_object_id}")
    if not target.is_target_candidate:
        raise InvalidTask(f"{task.target_object_id} is not a target candidate")
    if not scene.bounds.contains_point(task.start):
        raise InvalidTask("start pose outside bounds")

    true_grid = rasterize_cached(scene, resolution, profile.agent_radius)
    if profile.planner is PlannerKind.CLEARANCE_BLIND:
        plan_grid = rasterize_cached(scene, resolution, 0.0)
    else:
        plan_grid = true_grid

    start_cell = true_grid.world_to_cell(task.start)
    if not true_grid.free(*start_cell):
        raise InvalidTask("start pose not in free space")

    rng = random.Random(seed)
    goal_mask = _goal_mask(plan_grid, scene, task)
    target_box = target.footprint

    cur = start_cell
    heading = _snap_heading(task.heading)
    t = 0
    poses: list[tuple[int, Point, float]] = [(0, true_grid.cell_center(*cur), heading)]
    actions: list[str] = []
    outcome: Outcome | None = None

    def at_goal(cell) -> bool:
        c = true_grid.cell_center(*cell)
        return float(point_obb_distance(np.array([c]), target_box)[0]) <= task.success_radius

    plan = None
    if profile.planner is not PlannerKind.GREEDY:
        plan = _plan_to_goal_region(plan_grid, scene, task, cur)
        if plan is None:
            outcome = Outcome.FAILURE_STUCK
    plan_pos = 1

    if profile.max_steps is not None:
        max_steps = profile.max_steps
    else:
        max_steps = max(500, 4 * (len(plan) if plan else 1))

    greedy_next: tuple[int, int] | None = None
    while outcome is None:
        if at_goal(cur):
            actions.append(ACTION_DONE)
            outcome = Outcome.SUCCESS
            break
        if t >= max_steps:
            outcome = Outcome.FAILURE_TIMEOUT
            break

        # pick the next waypoint
        if profile.planner is PlannerKind.GREEDY:
            if greedy_next is None or greedy_next == cur:
                here = np.array([true_grid.cell_center(*cur)])
                cur_d = float(point_obb_distance(here, target_box)[0])
                best = None
                for dx, dy in NEIGHBORS_8:
                    jx, jy = cur[0] + dx, cur[1] + dy
                    if jx < 0 or jy < 0 or jx >= plan_grid.width or jy >= plan_grid.height:
                        continue
                    if not plan_grid.free(jx, jy):
                        continue
                    c = np.array([true_grid.cell_center(jx, jy)])
                    d = float(point_obb_distance(c, target_box)[0])
                    if best is None or d < best[0]:
                        best = (d, (jx, jy))
                if best is None or best[0] >= cur_d:
                    outcome = Outcome.FAILURE_STUCK
                    break
                greedy_next = best[1]
            nxt = greedy_next
        else:
            if plan_pos >= len(plan):
                plan = _plan_to_goal_region(plan_grid, scene, task, cur)
                plan_pos = 1
                if plan is None or len(plan) < 2:
                    outcome = Outcome.FAILURE_STUCK
                    break
            nxt = plan[plan_pos]
            if nxt == cur:
                plan_pos += 1
                continue

        desired = _heading_of(nxt[0] - cur[0], nxt[1] - cur[1])
        if heading != desired:
            diff = (desired - heading) % 360.0
            action = ACTION_LEFT if diff <= 180.0 else ACTION_RIGHT
        else:
            action = ACTION_FORWARD

        if profile.action_noise_prob > 0 and rng.random() < profile.action_noise_prob:
            action = rng.choice((ACTION_FORWARD, ACTION_LEFT, ACTION_RIGHT))

        t += 1
        if action == ACTION_LEFT:
            heading = (heading + 45.0) % 360.0
        elif action == ACTION_RIGHT:
            heading = (heading - 45.0) % 360.0
        else:  # forward
            dx, dy = _heading_vec(heading)
            jx, jy = cur[0] + dx, cur[1] + dy
            hit = (
                jx < 0 or jy < 0 or jx >= true_grid.width or jy >= true_grid.height
                or not true_grid.free(jx, jy)
            )
            if hit:
                # first colliding pose ends the episode
                crash = (
                    true_grid.cell_center(*cur)
                    if jx < 0 or jy < 0 or jx >= true_grid.width or jy >= true_grid.height
                    else true_grid.cell_center(jx, jy)
                )
                poses.append((t, crash, heading))
                actions.append(action)
                outcome = Outcome.FAILURE_STUCK
                break
            cur = (jx, jy)
            if profile.planner is PlannerKind.GREEDY:
                if cur == greedy_next:
                    greedy_next = None
            elif plan_pos < len(plan) and cur == plan[plan_pos]:
                plan_pos += 1
            elif plan is not None and (plan_pos >= len(plan) or cur != plan[plan_pos - 1]):
                # knocked off plan (noise); replan from here
                plan = _plan_to_goal_region(plan_grid, scene, task, cur)
                plan_pos = 1
                if plan is None:
                    outcome = Outcome.FAILURE_STUCK
                    poses.append((t, true_grid.cell_center(*cur), heading))
                    actions.append(action)
                    break
        poses.append((t, true_grid.cell_center(*cur), heading))
        actions.append(action)

    points = [p for _, p, _ in poses]
    clear = float(min_clearance_batch(scene, np.array(points)).min())
    return Trajectory(
        task=task,
        profile_name=profile.name,
        seed=seed,
        poses=tuple(poses),
        actions=tuple(actions),
        outcome=outcome,
        path_length=_poses_length(points),
        min_clearance_along_path=clear,
    )
