"""2D geometry primitives: axis-aligned rects and oriented bounding boxes.

All scene footprints are OBBs (center, rotation in degrees, half-extents).
Coordinates throughout the package live on a 0.01-unit lattice (the
serialization precision), enforced by :func:`quantize`; geometry here is
exact float math on those lattice values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

Point = tuple[float, float]


def quantize(x: float) -> float:
    """Snap a coordinate to the canonical 0.01 lattice."""
    return round(float(x), 2) + 0.0


def quantize_point(p) -> Point:
    return (quantize(p[0]), quantize(p[1]))


def quantize_angle(deg: float) -> float:
    """Normalize to [0, 360) on the 0.01-degree lattice."""
    r = round(float(deg) % 360.0, 2)
    if r >= 360.0:
        r -= 360.0
    return r + 0.0


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle given by min/max corners."""

    min: Point
    max: Point

    def __post_init__(self):
        object.__setattr__(self, "min", quantize_point(self.min))
        object.__setattr__(self, "max", quantize_point(self.max))
        if not (self.min[0] < self.max[0] and self.min[1] < self.max[1]):
            raise ValueError(f"degenerate rect {self.min}..{self.max}")

    @property
    def width(self) -> float:
        return self.max[0] - self.min[0]

    @property
    def height(self) -> float:
        return self.max[1] - self.min[1]

    @property
    def center(self) -> Point:
        return ((self.min[0] + self.max[0]) / 2.0, (self.min[1] + self.max[1]) / 2.0)

    def contains_point(self, p) -> bool:
        return self.min[0] <= p[0] <= self.max[0] and self.min[1] <= p[1] <= self.max[1]

    def wall_distance(self, p) -> float:
        """Distance from an interior point to the nearest boundary edge."""
        return min(
            p[0] - self.min[0],
            self.max[0] - p[0],
            p[1] - self.min[1],
            self.max[1] - p[1],
        )


@dataclass(frozen=True)
class Obb:
    """Oriented box: center, rotation (degrees CCW), half-extents (hw, hd)."""

    center: Point
    rotation: float
    extents: Point

    @cached_property
    def _axes(self) -> np.ndarray:
        rad = math.radians(self.rotation)
        c, s = math.cos(rad), math.sin(rad)
        return np.array([[c, s], [-s, c]])  # rows: local x axis, local y axis

    @cached_property
    def corners(self) -> np.ndarray:
        """4x2 world-space corners, CCW starting at local (+hw, +hd)."""
        hw, hd = self.extents
        local = np.array([[hw, hd], [-hw, hd], [-hw, -hd], [hw, -hd]])
        return np.asarray(self.center) + local @ self._axes

    @property
    def circumradius(self) -> float:
        return math.hypot(*self.extents)

    def to_local(self, points: np.ndarray) -> np.ndarray:
        """Map world points (N,2) into this box's frame."""
        return (np.atleast_2d(points) - np.asarray(self.center)) @ self._axes.T

    def aabb(self) -> tuple[float, float, float, float]:
        cs = self.corners
        return cs[:, 0].min(), cs[:, 1].min(), cs[:, 0].max(), cs[:, 1].max()


def _project_interval(corners: np.ndarray, axis: np.ndarray) -> tuple[float, float]:
    d = corners @ axis
    return d.min(), d.max()


def _sat_axes(a: Obb, b: Obb) -> np.ndarray:
    return np.vstack([a._axes, b._axes])


def obb_overlap(a: Obb, b: Obb) -> bool:
    """Positive-area intersection test (touching edges do NOT count)."""
    if _centers_far(a, b):
        return False
    for axis in _sat_axes(a, b):
        a0, a1 = _project_interval(a.corners, axis)
        b0, b1 = _project_interval(b.corners, axis)
        if a1 <= b0 or b1 <= a0:
            return False
    return True


def obb_collides(a: Obb, b: Obb) -> bool:
    """Closed intersection test (touching edges DO count)."""
    if _centers_far(a, b):
        return False
    for axis in _sat_axes(a, b):
        a0, a1 = _project_interval(a.corners, axis)
        b0, b1 = _project_interval(b.corners, axis)
        if a1 < b0 or b1 < a0:
            return False
    return True


def _centers_far(a: Obb, b: Obb) -> bool:
    dx = a.center[0] - b.center[0]
    dy = a.center[1] - b.center[1]
    r = a.circumradius + b.circumradius
    return dx * dx + dy * dy > r * r


def point_obb_distance(points, box: Obb) -> np.ndarray:
    """Distance from points (N,2) to the solid box (0 inside or on boundary)."""
    local = box.to_local(np.asarray(points, dtype=float))
    hw, hd = box.extents
    dx = np.maximum(np.abs(local[:, 0]) - hw, 0.0)
    dy = np.maximum(np.abs(local[:, 1]) - hd, 0.0)
    return np.hypot(dx, dy)


def _segment_segment_distance(p1, p2, q1, q2) -> float:
    """Min distance between two segments (assumes no intersection check done)."""

    def seg_point(a, b, p):
        ab = b - a
        denom = float(ab @ ab)
        if denom == 0.0:
            return float(np.hypot(*(p - a)))
        t = float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
        proj = a + t * ab
        return float(np.hypot(*(p - proj)))

    if _segments_intersect(p1, p2, q1, q2):
        return 0.0
    return min(
        seg_point(p1, p2, q1),
        seg_point(p1, p2, q2),
        seg_point(q1, q2, p1),
        seg_point(q1, q2, p2),
    )


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-12 else (1 if v > 0 else -1)

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True

    def on(a, b, c):
        return (
            orient(a, b, c) == 0
            and min(a[0], b[0]) - 1e-12 <= c[0] <= max(a[0], b[0]) + 1e-12
            and min(a[1], b[1]) - 1e-12 <= c[1] <= max(a[1], b[1]) + 1e-12
        )

    return on(p1, p2, q1) or on(p1, p2, q2) or on(q1, q2, p1) or on(q1, q2, p2)


def obb_gap(a: Obb, b: Obb) -> float:
    """Min distance between two box boundaries; 0 when they touch or overlap."""
    if obb_collides(a, b):
        return 0.0
    ca, cb = a.corners, b.corners
    best = math.inf
    for i in range(4):
        p1, p2 = ca[i], ca[(i + 1) % 4]
        for j in range(4):
            q1, q2 = cb[j], cb[(j + 1) % 4]
            best = min(best, _segment_segment_distance(p1, p2, q1, q2))
    return best


def obb_inside_rect(box: Obb, rect: Rect) -> bool:
    """True when the whole footprint lies inside the rect (boundary allowed)."""
    cs = box.corners
    return bool(
        (cs[:, 0] >= rect.min[0] - 1e-9).all()
        and (cs[:, 0] <= rect.max[0] + 1e-9).all()
        and (cs[:, 1] >= rect.min[1] - 1e-9).all()
        and (cs[:, 1] <= rect.max[1] + 1e-9).all()
    )


def point_segment_distance(points, a, b) -> np.ndarray:
    """Distance from points (N,2) to segment a-b."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.hypot(*(p - a).T)
    t = np.clip((p - a) @ ab / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.hypot(p[:, 0] - proj[:, 0], p[:, 1] - proj[:, 1])


# --- swept-box support (one box translating along a ray) ---------------------

def sweep_contact_interval(origin, direction, rotation: float, extents: Point,
                           obstacle: Obb) -> tuple[float, float] | None:
    """Closed-contact parameter interval [t_lo, t_hi] for a translating box.

    The moving box has fixed rotation; its center is origin + t * direction.
    Returns the t-interval over which it touches or overlaps the obstacle
    (touching counts), or None when the swept line never makes contact.
    """
    mover = Obb((0.0, 0.0), rotation, extents)
    axes = np.vstack([mover._axes, obstacle._axes])        # (4,2)
    corner_proj = mover.corners @ axes.T                   # (4 corners, 4 axes)
    cmin = corner_proj.min(axis=0)
    cmax = corner_proj.max(axis=0)
    obs_proj = obstacle.corners @ axes.T
    omin = obs_proj.min(axis=0)
    omax = obs_proj.max(axis=0)
    op = np.asarray(origin, dtype=float) @ axes.T          # (4,)
    v = np.asarray(direction, dtype=float) @ axes.T        # (4,)

    lo, hi = -math.inf, math.inf
    for i in range(4):
        # contact on axis i: omin <= op + t v + [cmin, cmax] overlap omax
        a = omax[i] - cmin[i] - op[i]   # need t*v <= a
        b = omin[i] - cmax[i] - op[i]   # need t*v >= b
        if v[i] > 1e-12:
            lo = max(lo, b / v[i])
            hi = min(hi, a / v[i])
        elif v[i] < -1e-12:
            lo = max(lo, a / v[i])
            hi = min(hi, b / v[i])
        else:
            if not (b <= 0.0 <= a):
                return None
    if lo > hi:
        return None
    return lo, hi


def sweep_bounds_exit(origin, direction, rotation: float, extents: Point,
                      rect: Rect) -> float:
    """Smallest t at which the translating box pokes outside the rect.

    Touching the boundary is allowed; returns inf when the box stays inside
    for all t >= 0.
    """
    mover = Obb((0.0, 0.0), rotation, extents)
    reach_min = mover.corners.min(axis=0)
    reach_max = mover.corners.max(axis=0)
    o = np.asarray(origin, dtype=float)
    u = np.asarray(direction, dtype=float)
    first = math.inf
    for axis in (0, 1):
        lo_gap = (o[axis] + reach_min[axis]) - rect.min[axis]  # >= 0 at start
        if u[axis] < -1e-12:
            first = min(first, (lo_gap + 1e-9) / -u[axis])
        hi_gap = rect.max[axis] - (o[axis] + reach_max[axis])
        if u[axis] > 1e-12:
            first = min(first, (hi_gap + 1e-9) / u[axis])
    return first


def points_to_moving_box_distance(points: np.ndarray, candidates: np.ndarray,
                                  rotation: float, extents: Point) -> np.ndarray:
    """Distances (S,N) from fixed points to the solid box at many centers."""
    mover = Obb((0.0, 0.0), rotation, extents)
    rel = points[:, None, :] - candidates[None, :, :]      # (S,N,2)
    local = rel @ mover._axes.T                            # (S,N,2)
    hw, hd = extents
    dx = np.maximum(np.abs(local[..., 0]) - hw, 0.0)
    dy = np.maximum(np.abs(local[..., 1]) - hd, 0.0)
    return np.hypot(dx, dy)
