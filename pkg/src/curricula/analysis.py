"""Trajectory analysis: outcome, behavioral concerns, abstract suggestions.

The deterministic heuristic backend derives concerns from clearance minima,
path-efficiency ratios, heading oscillation and stuck endings, then maps
them to abstract what-to-change suggestions (never naming objects or
placement coordinates). An external chat-completion backend can replace it;
replies that fail to parse or contradict the trajectory outcome fall back
to the heuristic result.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass

import numpy as np

from . import config, navigation
from .errors import TrajectorySceneMismatch
from .geometry import Point, quantize
from .llm import LLMBackend
from .navigation import Outcome, Trajectory
from .placement import min_clearance_batch
from .prompts import ANALYSIS_PROMPT
from .scene import SceneGraph

logger = logging.getLogger(__name__)


class AnalysisOutcome(enum.Enum):
    SUCCESS = "success"
    FAILURE = "failure"


class ConcernKind(enum.Enum):
    UNSAFE_CLEARANCE = "unsafe_clearance"
    INEFFICIENT_PATH = "inefficient_path"
    NEAR_COLLISION = "near_collision"
    OSCILLATION = "oscillation"
    STUCK = "stuck"


class SuggestionKind(enum.Enum):
    NARROW_PATHWAYS = "narrow_pathways"
    ADD_DETOUR = "add_detour"
    OBSTRUCT_SHORTCUT = "obstruct_shortcut"
    INCREASE_CLUTTER_NEAR = "increase_clutter_near"
    RELOCATE_LANDMARK = "relocate_landmark"


@dataclass(frozen=True)
class Concern:
    kind: ConcernKind
    location: Point
    severity: float
    detail: str = ""


@dataclass(frozen=True)
class Suggestion:
    kind: SuggestionKind
    anchor: Point | None = None
    detail: str = ""


@dataclass(frozen=True)
class Analysis:
    outcome: AnalysisOutcome
    concerns: tuple[Concern, ...] = ()
    suggestions: tuple[Suggestion, ...] = ()

    @property
    def succeeded(self) -> bool:
        return self.outcome is AnalysisOutcome.SUCCESS

    def to_doc(self) -> dict:
        return {
            "outcome": "success" if self.succeeded else "failure",
            "concerns": [
                {
                    "kind": c.kind.value,
                    "location": [quantize(c.location[0]), quantize(c.location[1])],
                    "severity": round(c.severity, 3),
                    "detail": c.detail,
                }
                for c in self.concerns
            ],
            "suggestions": [
                {
                    "kind": s.kind.value,
                    "anchor": [quantize(s.anchor[0]), quantize(s.anchor[1])] if s.anchor else None,
                    "detail": s.detail,
                }
                for s in self.suggestions
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_doc(), separators=(",", ":"))

    def to_text(self) -> str:
        """Readable rendering used to fill the perturbation prompt."""
        lines = [f"outcome: {'success' if self.succeeded else 'failure'}"]
        if self.concerns:
            lines.append("concerns:")
            for c in self.concerns:
                lines.append(
                    f"- {c.kind.value} at ({c.location[0]:.2f}, {c.location[1]:.2f})"
                    f" severity {c.severity:.2f}: {c.detail}"
                )
        else:
            lines.append("concerns: none")
        if self.suggestions:
            lines.append("suggestions:")
            for s in self.suggestions:
                anchor = f" near ({s.anchor[0]:.2f}, {s.anchor[1]:.2f})" if s.anchor else ""
                lines.append(f"- {s.kind.value}{anchor}: {s.detail}")
        else:
            lines.append("suggestions: none")
        return "\n".join(lines)

    @classmethod
    def from_doc(cls, doc: dict) -> "Analysis":
        outcome = AnalysisOutcome(doc["outcome"])
        concerns = tuple(
            Concern(
                kind=ConcernKind(c["kind"]),
                location=tuple(c["location"]),
                severity=float(c["severity"]),
                detail=str(c.get("detail", "")),
            )
            for c in doc.get("concerns", [])
        )
        suggestions = tuple(
            Suggestion(
                kind=SuggestionKind(s["kind"]),
                anchor=tuple(s["anchor"]) if s.get("anchor") else None,
                detail=str(s.get("detail", "")),
            )
            for s in doc.get("suggestions", [])
        )
        for c in concerns:
            if not 0.0 < c.severity <= 1.0:
                raise ValueError(f"severity out of range: {c.severity}")
        return cls(outcome=outcome, concerns=concerns, suggestions=suggestions)

    @classmethod
    def from_json(cls, text: str) -> "Analysis":
        return cls.from_doc(json.loads(text))


@dataclass(frozen=True)
class AnalysisConfig:
    agent_radius: float = config.DEFAULTS["navigation.agent_radius"]
    clearance_margin: float = config.DEFAULTS["analysis.clearance_margin"]
    near_collision_margin: float = config.DEFAULTS["analysis.near_collision_margin"]
    inefficiency_ratio: float = config.DEFAULTS["analysis.inefficiency_ratio"]
    oscillation_window: float = config.DEFAULTS["analysis.oscillation_window"]
    oscillation_reversals: int = config.DEFAULTS["analysis.oscillation_reversals"]
    resolution: float = config.DEFAULTS["navigation.resolution"]


def _local_minima(values: np.ndarray) -> list[int]:
    """Indices of local minima; only the first index of any flat run."""
    n = len(values)
    out = []
    for i in range(n):
        if i > 0 and values[i] == values[i - 1]:
            continue  # not the start of its plateau
        j = i
        while j + 1 < n and values[j + 1] == values[i]:
            j += 1
        left_ok = i == 0 or values[i] <= values[i - 1]
        right_ok = j == n - 1 or values[i] <= values[j + 1]
        if left_ok and right_ok:
            out.append(i)
    return out


def _sort_key_concern(c: Concern):
    return (c.kind.value, c.location[0], c.location[1], -c.severity)


def _sort_key_suggestion(s: Suggestion):
    anchor = s.anchor if s.anchor is not None else (-1e9, -1e9)
    return (s.kind.value, anchor[0], anchor[1])


def analyze_heuristic(scene: SceneGraph, traj: Trajectory,
                      thresholds: AnalysisConfig | None = None) -> Analysis:
    """Deterministic rule-based analysis of a trajectory in its scene."""
    cfg = thresholds or AnalysisConfig()
    if scene.get(traj.task.target_object_id) is None:
        raise TrajectorySceneMismatch(
            f"target {traj.task.target_object_id} not in scene {scene.scene_id}")
    if not scene.bounds.contains_point(traj.poses[0][1]):
        raise TrajectorySceneMismatch("trajectory start outside scene bounds")

    points = np.array([p for _, p, _ in traj.poses], dtype=float)
    clearances = min_clearance_batch(scene, points)
    radius = cfg.agent_radius

    concerns: list[Concern] = []
    for i in _local_minima(clearances):
        margin = float(clearances[i]) - radius
        if margin < cfg.clearance_margin:
            severity = min(1.0, (cfg.clearance_margin - margin) / cfg.clearance_margin)
            loc = tuple(points[i])
            concerns.append(Concern(
                kind=ConcernKind.UNSAFE_CLEARANCE,
                location=loc,
                severity=max(severity, 1e-3),
                detail=f"clearance {clearances[i]:.2f} m, margin {margin:.2f} m beyond body radius",
            ))
            if margin < cfg.near_collision_margin:
                concerns.append(Concern(
                    kind=ConcernKind.NEAR_COLLISION,
                    location=loc,
                    severity=1.0,
                    detail=f"body within {max(margin, 0.0):.2f} m of an obstacle",
                ))

    # inefficiency against the shortest feasible route
    best = navigation.oracle_cost(scene, traj.task, radius, cfg.resolution)
    oracle_pts = None
    if best is not None and best > 0:
        ratio = traj.path_length / best
        if ratio > cfg.inefficiency_ratio:
            oracle_pts = navigation.oracle_path_points(scene, traj.task, radius, cfg.resolution)
            loc = _farthest_from(points, np.array(oracle_pts))
            concerns.append(Concern(
                kind=ConcernKind.INEFFICIENT_PATH,
                location=loc,
                severity=min(1.0, max(1e-3, (ratio - cfg.inefficiency_ratio) / cfg.inefficiency_ratio)),
                detail=f"path {ratio:.2f}x longer than the best route",
            ))

    concerns.extend(_oscillation_concerns(traj, points, cfg))

    if traj.outcome is Outcome.FAILURE_STUCK:
        concerns.append(Concern(
            kind=ConcernKind.STUCK,
            location=tuple(points[-1]),
            severity=1.0,
            detail="episode ended wedged against an obstacle",
        ))

    suggestions: dict[tuple, Suggestion] = {}
    for c in concerns:
        s = None
        if c.kind is ConcernKind.UNSAFE_CLEARANCE:
            s = Suggestion(SuggestionKind.NARROW_PATHWAYS, anchor=c.location,
                           detail="tighten the passage the route squeezes through")
        elif c.kind is ConcernKind.INEFFICIENT_PATH:
            if oracle_pts is None:
                oracle_pts = navigation.oracle_path_points(scene, traj.task, radius, cfg.resolution)
            mid = oracle_pts[len(oracle_pts) // 2] if oracle_pts else c.location
            s = Suggestion(SuggestionKind.OBSTRUCT_SHORTCUT, anchor=tuple(mid),
                           detail="block the most direct route so efficiency matters")
        elif c.kind is ConcernKind.STUCK:
            s = Suggestion(SuggestionKind.ADD_DETOUR, anchor=c.location,
                           detail="force a longer way around the blocked region")
        if s is not None:
            key = (s.kind.value, s.anchor)
            suggestions.setdefault(key, s)

    return Analysis(
        outcome=AnalysisOutcome.SUCCESS if traj.outcome is Outcome.SUCCESS else AnalysisOutcome.FAILURE,
        concerns=tuple(sorted(concerns, key=_sort_key_concern)),
        suggestions=tuple(sorted(suggestions.values(), key=_sort_key_suggestion)),
    )


def _farthest_from(points: np.ndarray, reference: np.ndarray) -> Point:
    """Trajectory point farthest from the reference polyline's vertices."""
    d = np.linalg.norm(points[:, None, :] - reference[None, :, :], axis=2).min(axis=1)
    i = int(d.argmax())
    return tuple(points[i])


def _oscillation_concerns(traj: Trajectory, points: np.ndarray,
                          cfg: AnalysisConfig) -> list[Concern]:
    # arc-length position of each action, and the sign of each rotation
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(points, axis=0), axis=1))])
    reversals = []  # (arc position, pose point)
    prev_sign = 0
    for i, action in enumerate(traj.actions):
        sign = 1 if action == navigation.ACTION_LEFT else (-1 if action == navigation.ACTION_RIGHT else 0)
        if sign == 0:
            continue
        if prev_sign and sign != prev_sign:
            pose_idx = min(i + 1, len(points) - 1)
            reversals.append((arc[pose_idx], tuple(points[pose_idx])))
        prev_sign = sign

    out = []
    i = 0
    while i < len(reversals):
        j = i
        while j + 1 < len(reversals) and reversals[j + 1][0] <= reversals[i][0] + cfg.oscillation_window:
            j += 1
        count = j - i + 1
        if count >= cfg.oscillation_reversals:
            mid = reversals[i + count // 2]
            out.append(Concern(
                kind=ConcernKind.OSCILLATION,
                location=mid[1],
                severity=min(1.0, count / (2.0 * cfg.oscillation_reversals)),
                detail=f"{count} heading reversals within {cfg.oscillation_window:.1f} m",
            ))
            i = j + 1
        else:
            i += 1
    return out


def trajectory_summary(traj: Trajectory) -> str:
    """One-line context sent to external analyzers alongside the render."""
    return (
        f"outcome={traj.outcome.value} path_length={traj.path_length:.2f}m "
        f"min_clearance={traj.min_clearance_along_path:.2f}m "
        f"steps={len(traj.actions)} target={traj.task.target_object_id}"
    )


def _parse_external_reply(text: str, traj_outcome: Outcome) -> Analysis:
    start = text.find("{")
    end = text.rfind("}")
    if start < 0 or end <= start:
        raise ValueError("no JSON object in reply")
    parsed = Analysis.from_doc(json.loads(text[start:end + 1]))
    expected = "success" if traj_outcome is Outcome.SUCCESS else "failure"
    got = "success" if parsed.succeeded else "failure"
    if got != expected:
        raise ValueError(f"outcome mismatch: reply says {got}, trajectory says {expected}")
    return Analysis(
        outcome=parsed.outcome,
        concerns=tuple(sorted(parsed.concerns, key=_sort_key_concern)),
        suggestions=tuple(sorted(parsed.suggestions, key=_sort_key_suggestion)),
    )


def analyze_external(render: bytes, traj_summary: str, backend: LLMBackend,
                     scene: SceneGraph | None = None,
                     traj: Trajectory | None = None,
                     thresholds: AnalysisConfig | None = None,
                     max_attempts: int = 3) -> Analysis:
    """Analysis via an external backend, falling back to the heuristic.

    The analyzer prompt is sent unmodified; the rendered view and the
    trajectory summary travel as separate message parts. Replies must parse
    into the structured analysis contract and agree with the trajectory
    outcome; after ``max_attempts`` bad replies the heuristic result is
    returned instead (requires ``scene`` and ``traj``).
    """
    if traj is None:
        raise ValueError("traj is required (outcome consistency and fallback)")
    last_err: Exception | None = None
    for attempt in range(max_attempts):
        reply = backend.complete(ANALYSIS_PROMPT, image=render, extra_text=traj_summary)
        try:
            return _parse_external_reply(reply, traj.outcome)
        except (ValueError, KeyError, TypeError, json.JSONDecodeError) as e:
            last_err = e
            logger.warning("external analysis reply rejected (attempt %d): %s", attempt + 1, e)
    logger.warning("external analysis failed after %d attempts (%s); using heuristic fallback",
                   max_attempts, last_err)
    if scene is None:
        raise ValueError("scene is required for the heuristic fallback")
    return analyze_heuristic(scene, traj, thresholds)
