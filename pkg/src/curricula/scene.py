"""Structured scene representation and its canonical file format.

A scene is a set of objects with attributes (position, rotation, extents,
material), pairwise relations, rectangular room bounds and doorway segments.
Scenes are immutable; edits produce new values. The on-disk format is
canonical JSON (fixed key order, objects sorted by id, coordinates at two
decimals) so identical scenes serialize byte-identically.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from . import config
from .errors import ParseError, ValidationError
from .geometry import (
    Obb,
    Point,
    Rect,
    obb_gap,
    obb_inside_rect,
    obb_overlap,
    point_obb_distance,
    quantize,
    quantize_angle,
    quantize_point,
)

GRID_UNITS = 100.0
GRID_TAG = "100x100"


class RelationKind(enum.Enum):
    ON = "on"
    NEXT_TO = "next_to"
    INSIDE = "inside"


@dataclass(frozen=True)
class Relation:
    subject: str
    predicate: RelationKind
    object: str


@dataclass(frozen=True)
class Doorway:
    """Opening on the room boundary; agents must keep it passable."""

    id: str
    segment: tuple[Point, Point]
    clear_width: float

    def __post_init__(self):
        a, b = self.segment
        object.__setattr__(self, "segment", (quantize_point(a), quantize_point(b)))
        object.__setattr__(self, "clear_width", quantize(self.clear_width))
        if self.clear_width <= 0:
            raise ValueError(f"doorway {self.id}: clear_width must be positive")


@dataclass(frozen=True)
class SceneObject:
    id: str
    category: str
    position: Point
    rotation: float
    extents: Point  # half-width, half-depth
    material: str = ""
    movable: bool = False
    is_target_candidate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "position", quantize_point(self.position))
        object.__setattr__(self, "rotation", quantize_angle(self.rotation))
        object.__setattr__(self, "extents", quantize_point(self.extents))
        if self.extents[0] <= 0 or self.extents[1] <= 0:
            raise ValueError(f"object {self.id}: extents must be strictly positive")

    @cached_property
    def footprint(self) -> Obb:
        return Obb(self.position, self.rotation, self.extents)


@dataclass(frozen=True)
class ValidationReport:
    """Every violated scene invariant, in canonical (sorted) order."""

    duplicate_ids: tuple[str, ...] = ()
    overlaps: tuple[tuple[str, str], ...] = ()
    out_of_bounds: tuple[str, ...] = ()
    blocked_doorways: tuple[str, ...] = ()
    bad_doorways: tuple[str, ...] = ()
    bad_relations: tuple[tuple[str, str], ...] = ()

    @property
    def empty(self) -> bool:
        return not (
            self.duplicate_ids
            or self.overlaps
            or self.out_of_bounds
            or self.blocked_doorways
            or self.bad_doorways
            or self.bad_relations
        )

    def issues(self) -> list[str]:
        out = []
        out += [f"duplicate_id({i})" for i in self.duplicate_ids]
        out += [f"overlap({a}, {b})" for a, b in self.overlaps]
        out += [f"out_of_bounds({i})" for i in self.out_of_bounds]
        out += [f"blocked_doorway({i})" for i in self.blocked_doorways]
        out += [f"bad_doorway({i})" for i in self.bad_doorways]
        out += [f"bad_relation({s}, {o})" for s, o in self.bad_relations]
        return out


@dataclass(frozen=True)
class SceneGraph:
    scene_id: str
    bounds: Rect
    objects: tuple[SceneObject, ...] = ()
    doorways: tuple[Doorway, ...] = ()
    relations: tuple[Relation, ...] = ()

    def __post_init__(self):
        # canonical ordering makes equality order-insensitive and output stable
        object.__setattr__(self, "objects",
                           tuple(sorted(self.objects, key=lambda o: o.id)))
        object.__setattr__(self, "doorways",
                           tuple(sorted(self.doorways, key=lambda d: d.id)))
        object.__setattr__(self, "relations",
                           tuple(sorted(self.relations,
                                        key=lambda r: (r.subject, r.predicate.value, r.object))))

    @cached_property
    def object_map(self) -> dict[str, SceneObject]:
        return {o.id: o for o in self.objects}

    def get(self, object_id: str) -> SceneObject | None:
        return self.object_map.get(object_id)

    @property
    def movable_ids(self) -> list[str]:
        return sorted(o.id for o in self.objects if o.movable)

    @property
    def grid_scale(self) -> Point:
        """World units per normalized grid unit, per axis (maps bounds to 100x100)."""
        return (self.bounds.width / GRID_UNITS, self.bounds.height / GRID_UNITS)

    def with_object_pose(self, object_id: str, position: Point,
                         rotation: float) -> "SceneGraph":
        objs = tuple(
            replace(o, position=position, rotation=rotation) if o.id == object_id else o
            for o in self.objects
        )
        return replace(self, objects=objs)

    def with_scene_id(self, scene_id: str) -> "SceneGraph":
        return replace(self, scene_id=scene_id)

    @cached_property
    def fingerprint(self) -> str:
        return hashlib.sha256(save_scene(self)).hexdigest()[:16]


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _object_doc(o: SceneObject) -> dict:
    return {
        "id": o.id,
        "category": o.category,
        "position": [quantize(o.position[0]), quantize(o.position[1])],
        "rotation": quantize_angle(o.rotation),
        "extents": [quantize(o.extents[0]), quantize(o.extents[1])],
        "material": o.material,
        "movable": o.movable,
        "is_target_candidate": o.is_target_candidate,
    }


def _doorway_doc(d: Doorway) -> dict:
    (x1, y1), (x2, y2) = d.segment
    return {
        "id": d.id,
        "segment": [[x1, y1], [x2, y2]],
        "clear_width": d.clear_width,
    }


def _relation_doc(r: Relation) -> dict:
    return {"subject": r.subject, "predicate": r.predicate.value, "object": r.object}


def scene_to_doc(scene: SceneGraph) -> dict:
    return {
        "scene_id": scene.scene_id,
        "bounds": {
            "min": [scene.bounds.min[0], scene.bounds.min[1]],
            "max": [scene.bounds.max[0], scene.bounds.max[1]],
        },
        "grid": GRID_TAG,
        "objects": [_object_doc(o) for o in sorted(scene.objects, key=lambda o: o.id)],
        "doorways": [_doorway_doc(d) for d in sorted(scene.doorways, key=lambda d: d.id)],
        "relations": [
            _relation_doc(r)
            for r in sorted(scene.relations, key=lambda r: (r.subject, r.predicate.value, r.object))
        ],
    }


def save_scene(scene: SceneGraph) -> bytes:
    """Canonical serialization: deterministic bytes for equal scenes."""
    return (json.dumps(scene_to_doc(scene), indent=2) + "\n").encode("utf-8")


def _require(doc: dict, key: str, ctx: str):
    if key not in doc:
        raise ParseError(f"{ctx}: missing key '{key}'")
    return doc[key]


def scene_from_doc(doc: dict) -> SceneGraph:
    if not isinstance(doc, dict):
        raise ParseError("scene document must be a JSON object")
    scene_id = _require(doc, "scene_id", "scene")
    bounds_doc = _require(doc, "bounds", "scene")
    grid = _require(doc, "grid", "scene")
    if grid != GRID_TAG:
        raise ParseError(f"scene: grid must be '{GRID_TAG}', got '{grid}'")
    try:
        bounds = Rect(tuple(bounds_doc["min"]), tuple(bounds_doc["max"]))
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"scene: bad bounds: {e}") from e

    objects = []
    for od in doc.get("objects", []):
        try:
            objects.append(
                SceneObject(
                    id=str(_require(od, "id", "object")),
                    category=str(_require(od, "category", "object")),
                    position=tuple(_require(od, "position", "object")),
                    rotation=float(_require(od, "rotation", "object")),
                    extents=tuple(_require(od, "extents", "object")),
                    material=str(od.get("material", "")),
                    movable=bool(od.get("movable", False)),
                    is_target_candidate=bool(od.get("is_target_candidate", False)),
                )
            )
        except (TypeError, ValueError) as e:
            raise ParseError(f"object {od.get('id', '?')}: {e}") from e

    doorways = []
    for dd in doc.get("doorways", []):
        try:
            seg = _require(dd, "segment", "doorway")
            doorways.append(
                Doorway(
                    id=str(_require(dd, "id", "doorway")),
                    segment=(tuple(seg[0]), tuple(seg[1])),
                    clear_width=float(_require(dd, "clear_width", "doorway")),
                )
            )
        except (TypeError, ValueError, IndexError) as e:
            raise ParseError(f"doorway {dd.get('id', '?')}: {e}") from e

    relations = []
    for rd in doc.get("relations", []):
        try:
            relations.append(
                Relation(
                    subject=str(_require(rd, "subject", "relation")),
                    predicate=RelationKind(_require(rd, "predicate", "relation")),
                    object=str(_require(rd, "object", "relation")),
                )
            )
        except ValueError as e:
            raise ParseError(f"relation: {e}") from e

    return SceneGraph(
        scene_id=str(scene_id),
        bounds=bounds,
        objects=tuple(objects),
        doorways=tuple(doorways),
        relations=tuple(relations),
    )


def load_scene(data: bytes | str) -> SceneGraph:
    """Parse and validate a scene document.

    Raises ParseError for malformed documents and ValidationError (carrying
    the offending ids) when a structural invariant is violated.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as e:
        raise ParseError(f"not valid JSON: {e}") from e
    scene = scene_from_doc(doc)
    report = validate(scene)
    if not report.empty:
        raise ValidationError(report)
    return scene


def load_scene_file(path) -> SceneGraph:
    with open(path, "rb") as f:
        return load_scene(f.read())


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def _segment_on_boundary(seg: tuple[Point, Point], bounds: Rect) -> bool:
    (x1, y1), (x2, y2) = seg
    for x_edge in (bounds.min[0], bounds.max[0]):
        if x1 == x_edge and x2 == x_edge:
            return all(bounds.min[1] <= y <= bounds.max[1] for y in (y1, y2))
    for y_edge in (bounds.min[1], bounds.max[1]):
        if y1 == y_edge and y2 == y_edge:
            return all(bounds.min[0] <= x <= bounds.max[0] for x in (x1, x2))
    return False


def doorway_clear_width(scene: SceneGraph, doorway: Doorway,
                        exclude_id: str | None = None,
                        sample_step: float = 0.02) -> float:
    """Widest circular passage centered on the doorway segment.

    For each sample point on the segment the passable width is twice the
    smaller of (distance to nearest footprint, distance to the segment
    ends); the doorway's clear width caps the result.
    """
    a = np.asarray(doorway.segment[0], dtype=float)
    b = np.asarray(doorway.segment[1], dtype=float)
    length = float(np.hypot(*(b - a)))
    n = max(2, int(length / sample_step) + 1)
    ts = np.linspace(0.0, 1.0, n)
    pts = a + ts[:, None] * (b - a)

    end_dist = np.minimum(ts, 1.0 - ts) * length
    clearance = np.full(n, np.inf)
    for obj in scene.objects:
        if obj.id == exclude_id:
            continue
        clearance = np.minimum(clearance, point_obb_distance(pts, obj.footprint))
    width = 2.0 * np.minimum(clearance, end_dist)
    return float(min(width.max(), doorway.clear_width))


def validate(scene: SceneGraph, agent_diameter: float | None = None) -> ValidationReport:
    """Report every violated invariant; pure and canonically ordered."""
    if agent_diameter is None:
        agent_diameter = 2.0 * config.DEFAULTS["navigation.agent_radius"]

    seen, dupes = set(), set()
    for o in scene.objects:
        if o.id in seen:
            dupes.add(o.id)
        seen.add(o.id)

    overlaps = []
    objs = sorted(scene.objects, key=lambda o: o.id)
    for i, a in enumerate(objs):
        for b in objs[i + 1:]:
            if obb_overlap(a.footprint, b.footprint):
                overlaps.append((a.id, b.id))

    out_of_bounds = sorted(
        o.id for o in scene.objects if not obb_inside_rect(o.footprint, scene.bounds)
    )

    blocked, bad_doors = [], []
    for d in sorted(scene.doorways, key=lambda d: d.id):
        if not _segment_on_boundary(d.segment, scene.bounds):
            bad_doors.append(d.id)
            continue
        if doorway_clear_width(scene, d) < agent_diameter:
            blocked.append(d.id)

    ids = {o.id for o in scene.objects}
    bad_rel = sorted(
        (r.subject, r.object)
        for r in scene.relations
        if r.subject not in ids or r.object not in ids
    )

    return ValidationReport(
        duplicate_ids=tuple(sorted(dupes)),
        overlaps=tuple(overlaps),
        out_of_bounds=tuple(out_of_bounds),
        blocked_doorways=tuple(blocked),
        bad_doorways=tuple(bad_doors),
        bad_relations=tuple(bad_rel),
    )


def infer_relations(scene: SceneGraph, next_to_threshold: float | None = None) -> list[Relation]:
    """Derive next_to/inside relations from geometry.

    ``on`` is never inferred: stacking is not observable top-down, so those
    relations are only ever carried through from input data.
    """
    if next_to_threshold is None:
        next_to_threshold = config.DEFAULTS["scene.next_to_threshold"]

    rels: list[Relation] = []
    objs = sorted(scene.objects, key=lambda o: o.id)
    for a in objs:
        for b in objs:
            if a.id == b.id:
                continue
            center = np.array([b.position])
            if float(point_obb_distance(center, a.footprint)[0]) == 0.0:
                rels.append(Relation(b.id, RelationKind.INSIDE, a.id))
    for i, a in enumerate(objs):
        for b in objs[i + 1:]:
            if obb_gap(a.footprint, b.footprint) < next_to_threshold:
                rels.append(Relation(a.id, RelationKind.NEXT_TO, b.id))
                rels.append(Relation(b.id, RelationKind.NEXT_TO, a.id))
    return sorted(rels, key=lambda r: (r.subject, r.predicate.value, r.object))
