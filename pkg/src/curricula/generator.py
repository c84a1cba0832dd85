"""Environment perturbation: propose, apply, verify single-object edits.

Edits are expressed as move instructions on the normalized 100x100 grid
(directional left/right/up/down displacements plus a rotation delta) and
applied through collision-aware placement, so every intermediate scene
stays physically valid. Each accepted edit must pass a mechanical effect
check (did the scene actually get harder in the intended way?) and must
keep the task solvable; steps that break solvability are rolled back and
re-proposed.

Axis convention: left/right map to -x/+x, up/down to +y/-y in world
coordinates (renders draw +y screen-up, so "up" on the image is "up" here).
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field

import numpy as np

from . import config, navigation, render
from .analysis import Analysis, Suggestion, SuggestionKind
from .errors import (
    BackendUnavailable,
    CurriculaError,
    NoMovableObjects,
    SchemaViolation,
)
from .geometry import Point
from .llm import LLMBackend
from .navigation import Task, Trajectory
from .placement import (
    PlacementRequest,
    PlacementResult,
    min_clearance_batch,
    place_with_collision_awareness,
)
from .prompts import perturb_prompt, verify_prompt
from .scene import SceneGraph, validate

logger = logging.getLogger(__name__)

PROPOSE_TOOL_NAME = "propose_move_instruction"

_FIELD_ORDER = ("object_id", "x_direction", "x_units", "y_direction", "y_units", "rotation")


def move_instruction_schema(allowed_object_ids: list[str]) -> dict:
    """Function-calling schema constraining one directional move proposal."""
    return {
        "type": "function",
        "name": PROPOSE_TOOL_NAME,
        "description": (
            "Propose the change in position for exactly one object. "
            "Movement must be expressed in a normalized 100x100 apartment grid "
            "as left/right and up/down units."
        ),
        "parameters": {
            "type": "object",
            "properties": {
                "object_id": {"type": "string", "enum": allowed_object_ids},
                "x_direction": {"type": "string", "enum": ["left", "right"]},
                "x_units": {"type": "number", "minimum": 0, "maximum": 100},
                "y_direction": {"type": "string", "enum": ["up", "down"]},
                "y_units": {"type": "number", "minimum": 0, "maximum": 100},
                "rotation": {"type": "number", "minimum": 0, "maximum": 360},
            },
            "required": ["object_id", "x_direction", "x_units",
                         "y_direction", "y_units", "rotation"],
            "additionalProperties": False,
        },
    }


def perturb_instruction_tools(allowed_object_ids: list[str]) -> list[dict]:
    return [move_instruction_schema(allowed_object_ids)]


@dataclass(frozen=True)
class MoveInstruction:
    object_id: str
    x_direction: str  # left | right
    x_units: float    # [0, 100] normalized grid units
    y_direction: str  # up | down
    y_units: float
    rotation: float   # degrees in [0, 360], relative turn (0 keeps rotation)

    def to_payload(self) -> dict:
        return {
            "object_id": self.object_id,
            "x_direction": self.x_direction,
            "x_units": self.x_units,
            "y_direction": self.y_direction,
            "y_units": self.y_units,
            "rotation": self.rotation,
        }

    @classmethod
    def from_payload(cls, payload: dict, allowed_ids: list[str]) -> "MoveInstruction":
        if not isinstance(payload, dict):
            raise SchemaViolation("instruction payload must be an object")
        extra = set(payload) - set(_FIELD_ORDER)
        if extra:
            raise SchemaViolation(f"additional properties not allowed: {sorted(extra)}")
        missing = set(_FIELD_ORDER) - set(payload)
        if missing:
            raise SchemaViolation(f"missing required fields: {sorted(missing)}")
        if payload["object_id"] not in allowed_ids:
            raise SchemaViolation(f"object_id '{payload['object_id']}' not in allowed set")
        if payload["x_direction"] not in ("left", "right"):
            raise SchemaViolation(f"x_direction '{payload['x_direction']}' invalid")
        if payload["y_direction"] not in ("up", "down"):
            raise SchemaViolation(f"y_direction '{payload['y_direction']}' invalid")
        for key, hi in (("x_units", 100.0), ("y_units", 100.0), ("rotation", 360.0)):
            v = payload[key]
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise SchemaViolation(f"{key} must be a number")
            if not 0.0 <= float(v) <= hi:
                raise SchemaViolation(f"{key}={v} outside [0, {hi:g}]")
        return cls(
            object_id=payload["object_id"],
            x_direction=payload["x_direction"],
            x_units=float(payload["x_units"]),
            y_direction=payload["y_direction"],
            y_units=float(payload["y_units"]),
            rotation=float(payload["rotation"]),
        )


@dataclass(frozen=True)
class EditStep:
    instruction: MoveInstruction
    placement_result: PlacementResult
    intended_effect: Suggestion
    verified: bool
    revision_of: int | None = None

    def to_doc(self) -> dict:
        r = self.placement_result
        return {
            "instruction": self.instruction.to_payload(),
            "placement": {
                "final_position": [round(r.final_position[0], 2), round(r.final_position[1], 2)],
                "reached_target": r.reached_target,
                "steps_taken": r.steps_taken,
                "blocked_by": r.blocked_by,
            },
            "intent": self.intended_effect.kind.value,
            "intent_anchor": (
                [round(self.intended_effect.anchor[0], 2), round(self.intended_effect.anchor[1], 2)]
                if self.intended_effect.anchor else None
            ),
            "verified": self.verified,
            "revision_of": self.revision_of,
        }


@dataclass
class GenerationConfig:
    max_steps: int = config.DEFAULTS["generator.max_steps"]
    max_revisions_per_step: int = config.DEFAULTS["generator.max_revisions_per_step"]
    seed: int = 0
    placement_delta: float = config.DEFAULTS["placement.delta"]
    agent_radius: float = config.DEFAULTS["navigation.agent_radius"]
    resolution: float = config.DEFAULTS["navigation.resolution"]
    fallback_units: float = config.DEFAULTS["generator.fallback_units"]


@dataclass
class GenerationSession:
    base_scene: SceneGraph
    analysis: Analysis
    steps: list[EditStep] = field(default_factory=list)
    final_scene: SceneGraph | None = None
    max_steps: int = config.DEFAULTS["generator.max_steps"]
    max_revisions_per_step: int = config.DEFAULTS["generator.max_revisions_per_step"]
    flags: list[str] = field(default_factory=list)

    @property
    def accepted_steps(self) -> list[EditStep]:
        return [s for s in self.steps if s.verified]

    def to_doc(self) -> dict:
        return {
            "base_scene": self.base_scene.scene_id,
            "max_steps": self.max_steps,
            "max_revisions_per_step": self.max_revisions_per_step,
            "steps": [s.to_doc() for s in self.steps],
            "accepted": len(self.accepted_steps),
            "flags": list(self.flags),
        }


# ---------------------------------------------------------------------------
# proposing
# ---------------------------------------------------------------------------

def _displacement_to_instruction(scene: SceneGraph, object_id: str,
                                 disp: Point, rotation: float = 0.0) -> MoveInstruction:
    gx, gy = scene.grid_scale
    ux = abs(disp[0]) / gx
    uy = abs(disp[1]) / gy
    return MoveInstruction(
        object_id=object_id,
        x_direction="right" if disp[0] >= 0 else "left",
        x_units=min(round(ux, 2), 100.0),
        y_direction="up" if disp[1] >= 0 else "down",
        y_units=min(round(uy, 2), 100.0),
        rotation=rotation,
    )


def instruction_displacement(scene: SceneGraph, instr: MoveInstruction) -> Point:
    """World-unit displacement for an instruction (left/right = -/+x, up/down = +/-y)."""
    gx, gy = scene.grid_scale
    dx = instr.x_units * gx * (1.0 if instr.x_direction == "right" else -1.0)
    dy = instr.y_units * gy * (1.0 if instr.y_direction == "up" else -1.0)
    return (dx, dy)


def choose_suggestion(analysis: Analysis, rng_seed: int) -> Suggestion | None:
    if not analysis.suggestions:
        return None
    rng = random.Random(rng_seed)
    return analysis.suggestions[rng.randrange(len(analysis.suggestions))]


def _nearest_movable(scene: SceneGraph, point: Point, farthest: bool = False) -> str:
    ids = scene.movable_ids
    if not ids:
        raise NoMovableObjects(f"scene {scene.scene_id} has no movable objects")
    key = lambda i: (math.dist(scene.get(i).position, point), i)
    return (max if farthest else min)(ids, key=key)


def _fallback_anchor(scene: SceneGraph, path_hint: list[Point] | None) -> tuple[str, Point]:
    """Movable object nearest the reference path, and its closest path point."""
    ids = scene.movable_ids
    if not ids:
        raise NoMovableObjects(f"scene {scene.scene_id} has no movable objects")
    pts = np.asarray(path_hint if path_hint else [scene.bounds.center], dtype=float)
    best = None
    for oid in ids:
        pos = np.asarray(scene.get(oid).position)
        d = np.linalg.norm(pts - pos, axis=1)
        j = int(d.argmin())
        if best is None or d[j] < best[0]:
            best = (float(d[j]), oid, (float(pts[j][0]), float(pts[j][1])))
    return best[1], best[2]


def propose_heuristic(scene: SceneGraph, analysis: Analysis, rng_seed: int,
                      path_hint: list[Point] | None = None,
                      fallback_units: float | None = None) -> MoveInstruction:
    """Deterministic suggestion-to-edit mapping.

    Anchored suggestions move the movable object nearest the anchor straight
    at it (collision-aware placement will park it at the last free pose).
    With no suggestions, the movable object nearest the reference path moves
    a fixed number of grid units toward its closest path point.
    """
    if fallback_units is None:
        fallback_units = config.DEFAULTS["generator.fallback_units"]
    suggestion = choose_suggestion(analysis, rng_seed)
    if suggestion is not None and suggestion.anchor is not None:
        anchor = suggestion.anchor
        oid = _nearest_movable(scene, anchor,
                               farthest=suggestion.kind is SuggestionKind.RELOCATE_LANDMARK)
        pos = scene.get(oid).position
        disp = (anchor[0] - pos[0], anchor[1] - pos[1])
        return _displacement_to_instruction(scene, oid, disp)

    # no usable anchor: nudge the object nearest the trajectory toward it
    oid, near_pt = _fallback_anchor(scene, path_hint)
    pos = scene.get(oid).position
    dx, dy = near_pt[0] - pos[0], near_pt[1] - pos[1]
    gx, gy = scene.grid_scale
    ux, uy = abs(dx) / gx, abs(dy) / gy
    l1 = ux + uy
    if l1 == 0:
        ux_f, uy_f = fallback_units, 0.0
    else:
        ux_f = round(fallback_units * ux / l1, 2)
        uy_f = round(fallback_units - ux_f, 2)
    return MoveInstruction(
        object_id=oid,
        x_direction="right" if dx >= 0 else "left",
        x_units=ux_f,
        y_direction="up" if dy >= 0 else "down",
        y_units=uy_f,
        rotation=0.0,
    )


def proposal_intent(scene: SceneGraph, analysis: Analysis, rng_seed: int,
                    path_hint: list[Point] | None = None) -> Suggestion:
    """The suggestion a proposal at this seed is serving (fallback included)."""
    suggestion = choose_suggestion(analysis, rng_seed)
    if suggestion is not None and suggestion.anchor is not None:
        return suggestion
    _, near_pt = _fallback_anchor(scene, path_hint)
    return Suggestion(SuggestionKind.NARROW_PATHWAYS, anchor=near_pt,
                      detail="squeeze free space around the reference route")


def propose_external(render_bytes: bytes, analysis: Analysis, allowed_ids: list[str],
                     backend: LLMBackend, max_retries: int | None = None) -> MoveInstruction:
    """One move proposal from the external backend, schema-validated.

    Invalid replies are retried; after ``max_retries`` extra attempts the
    last schema violation propagates (callers fall back to the heuristic).
    """
    if not allowed_ids:
        raise NoMovableObjects("no movable objects to offer the backend")
    if max_retries is None:
        max_retries = config.DEFAULTS["generator.max_revisions_per_step"]
    prompt = perturb_prompt(analysis.to_text())
    schema = move_instruction_schema(allowed_ids)
    last: Exception | None = None
    for attempt in range(1 + max_retries):
        reply = backend.complete(prompt, image=render_bytes, schema=schema)
        try:
            start = reply.find("{")
            end = reply.rfind("}")
            if start < 0 or end <= start:
                raise SchemaViolation("reply contains no JSON object")
            payload = json.loads(reply[start:end + 1])
        except json.JSONDecodeError as e:
            last = SchemaViolation(f"unparseable reply: {e}")
            logger.warning("proposal reply unparseable (attempt %d)", attempt + 1)
            continue
        try:
            return MoveInstruction.from_payload(payload, allowed_ids)
        except SchemaViolation as e:
            last = e
            logger.warning("proposal reply rejected (attempt %d): %s", attempt + 1, e)
    raise last if last else SchemaViolation("no valid proposal")


# ---------------------------------------------------------------------------
# applying and verifying
# ---------------------------------------------------------------------------

def apply_edit(scene: SceneGraph, instr: MoveInstruction,
               delta: float | None = None) -> tuple[SceneGraph, PlacementResult]:
    """Convert grid units to world units and place collision-aware."""
    if delta is None:
        delta = config.DEFAULTS["placement.delta"]
    obj = scene.get(instr.object_id)
    disp = instruction_displacement(scene, instr)
    req = PlacementRequest(
        scene=scene,
        object_id=instr.object_id,
        target_position=(obj.position[0] + disp[0], obj.position[1] + disp[1]),
        target_rotation=(obj.rotation + instr.rotation) % 360.0,
        step_size_delta=delta,
    )
    return place_with_collision_awareness(req)


_ANCHOR_WINDOW = 1.0  # clearance checks localize to poses this close to the anchor


def _corridor_clearance(scene: SceneGraph, traj: Trajectory,
                        anchor: Point | None) -> float:
    pts = np.array([p for _, p, _ in traj.poses], dtype=float)
    if anchor is not None:
        d = np.linalg.norm(pts - np.asarray(anchor), axis=1)
        mask = d <= _ANCHOR_WINDOW
        if mask.any():
            pts = pts[mask]
    return float(min_clearance_batch(scene, pts).min())


def verify_edit(before: SceneGraph, after: SceneGraph, intended: Suggestion,
                traj_before: Trajectory,
                cfg: GenerationConfig | None = None,
                backend: LLMBackend | None = None,
                render_after: bytes | None = None) -> bool:
    """Mechanical check that an edit produced its intended effect.

    Narrowing intents require the corridor clearance along the reference
    trajectory (near the anchor when one is set) to strictly decrease;
    obstruction/detour intents require the shortest feasible route to get
    strictly costlier while staying solvable. When a backend is supplied its
    yes/no judgment must agree with the mechanical check.
    """
    cfg = cfg or GenerationConfig()
    kind = intended.kind
    task = traj_before.task

    if kind in (SuggestionKind.NARROW_PATHWAYS, SuggestionKind.INCREASE_CLUTTER_NEAR):
        ok = (_corridor_clearance(after, traj_before, intended.anchor)
              < _corridor_clearance(before, traj_before, intended.anchor) - 1e-9)
    elif kind in (SuggestionKind.OBSTRUCT_SHORTCUT, SuggestionKind.ADD_DETOUR):
        cost_before = navigation.oracle_cost(before, task, cfg.agent_radius, cfg.resolution)
        cost_after = navigation.oracle_cost(after, task, cfg.agent_radius, cfg.resolution)
        ok = (cost_before is not None and cost_after is not None
              and cost_after > cost_before + 1e-9)
    else:  # RELOCATE_LANDMARK: any strict difficulty change counts
        cost_before = navigation.oracle_cost(before, task, cfg.agent_radius, cfg.resolution)
        cost_after = navigation.oracle_cost(after, task, cfg.agent_radius, cfg.resolution)
        cost_up = (cost_before is not None and cost_after is not None
                   and cost_after > cost_before + 1e-9)
        clear_down = (_corridor_clearance(after, traj_before, intended.anchor)
                      < _corridor_clearance(before, traj_before, intended.anchor) - 1e-9)
        ok = cost_up or clear_down

    if backend is not None:
        if render_after is None:
            render_after = render.render_scene(after, target=task.target_object_id)
        reply = backend.complete(verify_prompt(kind.value), image=render_after)
        agrees = reply.strip().lower().startswith("yes")
        return ok and agrees
    return ok


# ---------------------------------------------------------------------------
# the propose -> apply -> verify loop
# ---------------------------------------------------------------------------

def generate(scene: SceneGraph, analysis: Analysis, task: Task, traj: Trajectory,
             cfg: GenerationConfig | None = None,
             backend: LLMBackend | None = None) -> GenerationSession:
    """Run up to max_steps single-object edits with verify/revise.

    Every candidate scene must validate cleanly and keep the task solvable;
    otherwise the step is rolled back and re-proposed. A step whose
    revisions are exhausted is dropped and flagged, leaving the session
    with fewer accepted edits.
    """
    cfg = cfg or GenerationConfig()
    session = GenerationSession(
        base_scene=scene,
        analysis=analysis,
        max_steps=cfg.max_steps,
        max_revisions_per_step=cfg.max_revisions_per_step,
    )
    current = scene
    path_hint = [p for _, p, _ in traj.poses]

    for step_idx in range(cfg.max_steps):
        first_attempt_index: int | None = None
        accepted = False
        for attempt in range(1 + cfg.max_revisions_per_step):
            seed = cfg.seed * 1_000_003 + step_idx * 101 + attempt
            instr = None
            if backend is not None:
                try:
                    image = render.render_scene(current, target=task.target_object_id)
                    instr = propose_external(image, analysis, current.movable_ids,
                                             backend, max_retries=cfg.max_revisions_per_step)
                except (SchemaViolation, BackendUnavailable) as e:
                    logger.warning("external proposal failed (%s); using heuristic", e)
            if instr is None:
                instr = propose_heuristic(current, analysis, seed, path_hint,
                                          cfg.fallback_units)
            intent = proposal_intent(current, analysis, seed, path_hint)

            try:
                candidate, result = apply_edit(current, instr, cfg.placement_delta)
            except CurriculaError as e:
                logger.warning("edit failed to apply: %s", e)
                continue

            step = EditStep(
                instruction=instr,
                placement_result=result,
                intended_effect=intent,
                verified=False,
                revision_of=first_attempt_index,
            )
            session.steps.append(step)
            if first_attempt_index is None:
                first_attempt_index = len(session.steps) - 1

            if not validate(candidate).empty:
                logger.warning("edit produced an invalid scene; rolled back")
                continue
            if not navigation.solvable(candidate, task, cfg.agent_radius, cfg.resolution):
                logger.info("edit broke solvability; rolled back")
                continue
            if not verify_edit(current, candidate, intent, traj, cfg, backend=backend):
                continue

            session.steps[-1] = EditStep(
                instruction=step.instruction,
                placement_result=step.placement_result,
                intended_effect=step.intended_effect,
                verified=True,
                revision_of=step.revision_of,
            )
            current = candidate
            accepted = True
            break
        if not accepted:
            session.flags.append(f"exhausted_revisions@step{step_idx}")

    session.final_scene = current
    return session
