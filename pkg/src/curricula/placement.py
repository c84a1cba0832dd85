"""Collision detection and collision-aware incremental object placement.

Moving an object toward a proposed target walks the straight segment from
its original position in steps of size delta, testing each candidate pose
against every other footprint, the room bounds, and doorway passability.
The walk stops either by reaching the target (snapping exactly onto it) or
at the last collision-free pose before the first blocked step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import config
from .errors import NotMovable, OutOfBounds, StartPoseInvalid, UnknownObject
from .geometry import (
    Obb,
    Point,
    obb_collides,
    obb_inside_rect,
    obb_overlap,
    point_obb_distance,
    points_to_moving_box_distance,
    quantize_angle,
    quantize_point,
    sweep_bounds_exit,
    sweep_contact_interval,
)
from .scene import Doorway, SceneGraph, SceneObject

_CHUNK = 4096


@dataclass(frozen=True)
class PlacementRequest:
    scene: SceneGraph
    object_id: str
    target_position: Point
    target_rotation: float
    step_size_delta: float = config.DEFAULTS["placement.delta"]


@dataclass(frozen=True)
class PlacementResult:
    final_position: Point
    reached_target: bool
    steps_taken: int
    blocked_by: str | None = None


def overlaps(a: SceneObject, b: SceneObject) -> bool:
    """True iff the rotated footprints intersect with positive area."""
    return obb_overlap(a.footprint, b.footprint)


def min_clearance(scene: SceneGraph, point: Point) -> float:
    """Distance from a point to the nearest footprint boundary or wall."""
    if not scene.bounds.contains_point(point):
        raise OutOfBounds(f"point {point} outside scene bounds")
    return float(min_clearance_batch(scene, np.array([point], dtype=float))[0])


def min_clearance_batch(scene: SceneGraph, points: np.ndarray) -> np.ndarray:
    """Vectorized min_clearance for points (N,2) assumed inside bounds."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    walls = np.minimum.reduce([
        pts[:, 0] - scene.bounds.min[0],
        scene.bounds.max[0] - pts[:, 0],
        pts[:, 1] - scene.bounds.min[1],
        scene.bounds.max[1] - pts[:, 1],
    ])
    best = walls
    for obj in scene.objects:
        best = np.minimum(best, point_obb_distance(pts, obj.footprint))
    return best


def _pose_collides(scene: SceneGraph, mover_id: str, box: Obb,
                   doorway_min_width: float, closed: bool = True) -> str | None:
    """Collision test for one pose; returns the blocking body or None.

    closed=True counts touching footprints as collision (stepping rule);
    closed=False requires positive-area overlap (scene validity rule).
    """
    if not obb_inside_rect(box, scene.bounds):
        return "bounds"
    hit = obb_collides if closed else obb_overlap
    for other in sorted(scene.objects, key=lambda o: o.id):
        if other.id == mover_id:
            continue
        if hit(box, other.footprint):
            return other.id
    for d in sorted(scene.doorways, key=lambda d: d.id):
        if _doorway_width_with_box(scene, d, mover_id, box) < doorway_min_width:
            return d.id
    return None


def _doorway_samples(doorway: Doorway, step: float = 0.02):
    a = np.asarray(doorway.segment[0], dtype=float)
    b = np.asarray(doorway.segment[1], dtype=float)
    length = float(np.hypot(*(b - a)))
    n = max(2, int(length / step) + 1)
    ts = np.linspace(0.0, 1.0, n)
    pts = a + ts[:, None] * (b - a)
    end_dist = np.minimum(ts, 1.0 - ts) * length
    return pts, end_dist


def _doorway_width_with_box(scene: SceneGraph, doorway: Doorway, mover_id: str,
                            box: Obb) -> float:
    pts, end_dist = _doorway_samples(doorway)
    clearance = np.full(len(pts), np.inf)
    for obj in scene.objects:
        if obj.id == mover_id:
            continue
        clearance = np.minimum(clearance, point_obb_distance(pts, obj.footprint))
    clearance = np.minimum(clearance, point_obb_distance(pts, box))
    width = 2.0 * np.minimum(clearance, end_dist)
    return float(min(width.max(), doorway.clear_width))


def _first_contact(scene: SceneGraph, mover: SceneObject, rotation: float,
                   origin: np.ndarray, unit: np.ndarray) -> tuple[float, str | None]:
    """Ray parameter of the first obstruction along origin + t*unit.

    Uses exact swept-contact intervals, so grazing contacts between steps
    cannot be tunneled through. Touching an obstacle counts as contact;
    touching the room boundary does not (the wall blocks only beyond it).
    Returns (inf, None) for an unobstructed ray.
    """
    best_t = sweep_bounds_exit(tuple(origin), tuple(unit), rotation,
                               mover.extents, scene.bounds)
    best_who = "bounds" if best_t < math.inf else None
    for other in sorted(scene.objects, key=lambda o: o.id):
        if other.id == mover.id:
            continue
        span = sweep_contact_interval(tuple(origin), tuple(unit), rotation,
                                      mover.extents, other.footprint)
        if span is None:
            continue
        t_lo, t_hi = span
        if t_hi <= 1e-9:
            continue  # contact only behind or exactly at the start
        t_first = max(t_lo, 1e-12)
        if t_first < best_t:
            best_t, best_who = t_first, other.id
    return best_t, best_who


def _first_blocked_by_doorway(scene: SceneGraph, mover: SceneObject, rotation: float,
                              candidates: np.ndarray, doorway_min_width: float
                              ) -> tuple[int, str | None]:
    """Discrete scan of candidate poses for doorway-blocking, or (-1, None)."""
    if not scene.doorways:
        return -1, None
    others = [o for o in scene.objects if o.id != mover.id]
    best_idx, best_id = -1, None
    for d in sorted(scene.doorways, key=lambda d: d.id):
        pts, end_dist = _doorway_samples(d)
        base = np.full(len(pts), np.inf)
        for o in others:
            base = np.minimum(base, point_obb_distance(pts, o.footprint))
        limit = len(candidates) if best_idx < 0 else best_idx
        for lo in range(0, limit, _CHUNK):
            chunk = candidates[lo:lo + _CHUNK]
            dist = points_to_moving_box_distance(pts, chunk, rotation, mover.extents)
            clearance = np.minimum(base[:, None], dist)
            width = 2.0 * np.minimum(clearance, end_dist[:, None])
            eff = np.minimum(width.max(axis=0), d.clear_width)
            hit = eff < doorway_min_width
            if hit.any():
                idx = lo + int(np.argmax(hit))
                if best_idx < 0 or idx < best_idx:
                    best_idx, best_id = idx, d.id
                break
    return best_idx, best_id


def place_with_collision_awareness(
    req: PlacementRequest,
    doorway_min_width: float | None = None,
) -> tuple[SceneGraph, PlacementResult]:
    """Step an object toward its target, stopping at the last valid pose.

    The rotation (when it differs from the object's current one) is applied
    first at the original position and kept only if that pose alone is
    collision-free; translation stepping then proceeds at step size delta.
    Out-of-bounds poses and doorway-blocking poses count as collisions
    (blocked_by is "bounds" or the doorway id respectively).
    """
    if doorway_min_width is None:
        doorway_min_width = config.DEFAULTS["placement.doorway_min_width"]
    scene = req.scene
    mover = scene.get(req.object_id)
    if mover is None:
        raise UnknownObject(req.object_id)
    if not mover.movable:
        raise NotMovable(req.object_id)
    if req.step_size_delta <= 0:
        raise ValueError("step_size_delta must be positive")

    # start pose must not positively overlap anything (touching is fine)
    if not obb_inside_rect(mover.footprint, scene.bounds):
        raise StartPoseInvalid(f"{mover.id} starts outside bounds")
    for other in scene.objects:
        if other.id != mover.id and obb_overlap(mover.footprint, other.footprint):
            raise StartPoseInvalid(f"{mover.id} starts overlapping {other.id}")

    rotation = mover.rotation
    want_rot = quantize_angle(req.target_rotation)
    if want_rot != rotation:
        rotated = Obb(mover.position, want_rot, mover.extents)
        if _pose_collides(scene, mover.id, rotated, doorway_min_width) is None:
            rotation = want_rot

    origin = np.asarray(mover.position, dtype=float)
    target = np.asarray(quantize_point(req.target_position), dtype=float)
    d = target - origin
    length = float(np.hypot(*d))
    delta = req.step_size_delta

    if length == 0.0:
        out = scene.with_object_pose(mover.id, tuple(origin), rotation)
        return out, PlacementResult(tuple(origin), True, 0, None)

    unit = d / length
    n_steps = max(1, math.ceil(length / delta - 1e-12))
    ks = np.arange(1, n_steps + 1, dtype=float)
    dists = np.minimum(ks * delta, length)
    raw = origin + dists[:, None] * unit
    candidates = np.round(raw, 2) + 0.0  # canonical lattice, matches stored poses

    t_contact, blocker = _first_contact(scene, mover, rotation, origin, unit)
    # first step index whose exact travel reaches the contact (0-based)
    if t_contact <= length + 1e-9:
        j = int(np.searchsorted(dists, t_contact - 1e-12, side="left"))
        j = min(j, n_steps - 1)
    else:
        j = -1

    limit = n_steps if j < 0 else j
    dj, door_id = _first_blocked_by_doorway(scene, mover, rotation,
                                            candidates[:limit], doorway_min_width)
    if dj >= 0:
        j, blocker = dj, door_id

    reached = j < 0
    if reached:
        t_stop = float(length)
    else:
        t_stop = float(dists[j - 1]) if j > 0 else 0.0

    # lattice snap may nudge the stored pose off the exact ray into overlap:
    # retreat along the ray one lattice unit at a time until the stored
    # (quantized) pose is a valid scene pose (positive-area test)
    t = t_stop
    final = None
    static_hit: str | None = None
    while t > 1e-9:
        snapped = np.round(origin + t * unit, 2) + 0.0
        pose = (float(snapped[0]), float(snapped[1]))
        hit = _pose_collides(scene, mover.id, Obb(pose, rotation, mover.extents),
                             doorway_min_width, closed=False)
        if hit is None:
            final = pose
            break
        static_hit = static_hit or hit
        t -= 0.01
    if final is None:
        t = 0.0
        final = (float(origin[0]), float(origin[1]))

    reached = reached and t >= length - 1e-9
    if not reached and blocker is None:
        blocker = static_hit
    steps = n_steps if reached else int(t / delta + 1e-9)
    out = scene.with_object_pose(mover.id, final, rotation)
    return out, PlacementResult(final, reached, steps, None if reached else blocker)
