"""Independent brute-force oracles used to pin expected test values.

These deliberately avoid the production code paths: collision via dense
point sampling, shortest paths via vectorized value iteration, reachability
via frontier dilation, clearance via a distance transform.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

SQRT2 = math.sqrt(2.0)


def point_in_obb(px, py, cx, cy, rotation_deg, hw, hd) -> bool:
    rad = math.radians(rotation_deg)
    c, s = math.cos(rad), math.sin(rad)
    dx, dy = px - cx, py - cy
    lx = dx * c + dy * s
    ly = -dx * s + dy * c
    return abs(lx) <= hw and abs(ly) <= hd


def obb_overlap_sampling(a, b, resolution=1e-3) -> bool:
    """Positive-area overlap by dense sampling of the AABB intersection."""
    (ax0, ay0, ax1, ay1) = a.footprint.aabb()
    (bx0, by0, bx1, by1) = b.footprint.aabb()
    x0, x1 = max(ax0, bx0), min(ax1, bx1)
    y0, y1 = max(ay0, by0), min(ay1, by1)
    if x0 >= x1 or y0 >= y1:
        return False
    xs = np.arange(x0 + resolution / 2, x1, resolution)
    ys = np.arange(y0 + resolution / 2, y1, resolution)
    if len(xs) == 0 or len(ys) == 0:
        return False
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])

    def inside(obj):
        rad = math.radians(obj.rotation)
        c, s = math.cos(rad), math.sin(rad)
        dx = pts[:, 0] - obj.position[0]
        dy = pts[:, 1] - obj.position[1]
        lx = dx * c + dy * s
        ly = -dx * s + dy * c
        return (np.abs(lx) < obj.extents[0]) & (np.abs(ly) < obj.extents[1])

    return bool((inside(a) & inside(b)).any())


def value_iteration_cost(occupied: np.ndarray, start: tuple[int, int],
                         goal_mask: np.ndarray) -> float | None:
    """Min 8-connected cost (1 / sqrt2 steps) via repeated relaxation sweeps.

    occupied: bool (ny, nx); start: (ix, iy); goal_mask: bool (ny, nx).
    Returns the cost as straight + sqrt2 * diagonal recovered from an exact
    integer step-count pair, or None when unreachable.
    """
    ny, nx = occupied.shape
    INF = np.inf
    # track cost as (straight_steps, diag_steps) to recover the exact pair;
    # relaxation compares the float combination
    cost = np.full((ny, nx), INF)
    straight = np.zeros((ny, nx), dtype=np.int64)
    diag = np.zeros((ny, nx), dtype=np.int64)
    sx, sy = start
    if occupied[sy, sx]:
        return None
    cost[sy, sx] = 0.0

    def shifted(arr, dx, dy, fill):
        out = np.full_like(arr, fill)
        src_y = slice(max(0, -dy), ny - max(0, dy))
        src_x = slice(max(0, -dx), nx - max(0, dx))
        dst_y = slice(max(0, dy), ny - max(0, -dy))
        dst_x = slice(max(0, dx), nx - max(0, -dx))
        out[dst_y, dst_x] = arr[src_y, src_x]
        return out

    moves = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]
    for _ in range(nx * ny):
        changed = False
        for dx, dy in moves:
            step = SQRT2 if dx and dy else 1.0
            cand = shifted(cost, dx, dy, INF) + step
            cand_s = shifted(straight, dx, dy, 0) + (0 if dx and dy else 1)
            cand_d = shifted(diag, dx, dy, 0) + (1 if dx and dy else 0)
            better = (cand < cost - 1e-12) & ~occupied
            if better.any():
                cost[better] = cand[better]
                straight[better] = cand_s[better]
                diag[better] = cand_d[better]
                changed = True
        if not changed:
            break
    reachable = goal_mask & np.isfinite(cost)
    if not reachable.any():
        return None
    flat = np.argmin(np.where(reachable, cost, INF))
    iy, ix = divmod(int(flat), nx)
    return float(straight[iy, ix]) + SQRT2 * float(diag[iy, ix])


def flood_fill_reachable(occupied: np.ndarray, start: tuple[int, int],
                         goal_mask: np.ndarray) -> bool:
    """8-connected reachability by frontier dilation."""
    ny, nx = occupied.shape
    sx, sy = start
    if occupied[sy, sx]:
        return False
    reached = np.zeros_like(occupied)
    reached[sy, sx] = True
    kernel = np.ones((3, 3), dtype=bool)
    free = ~occupied
    while True:
        grown = ndimage.binary_dilation(reached, structure=kernel) & free
        if (grown == reached).all():
            break
        reached = grown
    return bool((reached & goal_mask).any())


def clearance_distance_transform(scene, resolution=0.01) -> tuple[np.ndarray, float, tuple]:
    """Distance (m) from each free cell center to the nearest obstacle cell.

    Obstacle cells are those inside any footprint; the room boundary is
    padded as an obstacle ring so wall distance is included.
    """
    from curricula.geometry import point_obb_distance

    b = scene.bounds
    nx = int(round(b.width / resolution))
    ny = int(round(b.height / resolution))
    xs = b.min[0] + (np.arange(nx) + 0.5) * resolution
    ys = b.min[1] + (np.arange(ny) + 0.5) * resolution
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    occ = np.zeros(len(pts), dtype=bool)
    for obj in scene.objects:
        occ |= point_obb_distance(pts, obj.footprint) == 0.0
    grid = occ.reshape(ny, nx)
    padded = np.pad(grid, 1, constant_values=True)
    dist = ndimage.distance_transform_edt(~padded) * resolution
    return dist[1:-1, 1:-1], resolution, (b.min[0], b.min[1])


def sample_clearance(dist_grid, resolution, origin, point) -> float:
    ix = int((point[0] - origin[0]) / resolution)
    iy = int((point[1] - origin[1]) / resolution)
    iy = min(max(iy, 0), dist_grid.shape[0] - 1)
    ix = min(max(ix, 0), dist_grid.shape[1] - 1)
    return float(dist_grid[iy, ix])
