"""Closed-loop orchestration: run, analyze, perturb, evaluate, repeat.

Each iteration runs the agent profile on the current training scene,
analyzes a representative trajectory, generates the next (harder but still
solvable) scene, and scores the profile on fixed held-out scenes; the
change in held-out composite score between iterations is recorded as the
per-iteration improvement estimate. Everything is seeded and serialized at
two decimals so a rerun of the same config is byte-identical.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from . import analysis as analysis_mod
from . import config as config_mod
from . import generator as generator_mod
from . import navigation, render
from .errors import BackendUnavailable, ParseError
from .generator import GenerationConfig
from .llm import HttpChatBackend, LLMBackend, make_scripted_stub
from .navigation import AgentProfile, Outcome, PROFILES, PlannerKind, Task, Trajectory
from .scene import SceneGraph, load_scene_file, save_scene, validate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HeldoutCase:
    scene_path: str
    task: Task


@dataclass
class CurriculumConfig:
    base_scene_path: str
    task: Task
    profiles: list[AgentProfile]          # per iteration; last one repeats
    backend: str = "heuristic"            # heuristic | external | stub
    iterations: int = 5
    episodes_per_eval: int = 3
    heldout: list[HeldoutCase] = field(default_factory=list)
    seed: int = 0
    out_dir: str = "run"
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    resolution: float = config_mod.DEFAULTS["navigation.resolution"]
    source_doc: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.episodes_per_eval < 1:
            raise ValueError("episodes_per_eval must be >= 1")

    def profile_for(self, iteration: int) -> AgentProfile:
        idx = min(iteration, len(self.profiles) - 1)
        return self.profiles[idx]


def _profile_from(value) -> AgentProfile:
    if isinstance(value, str):
        if value not in PROFILES:
            raise ParseError(f"unknown agent profile '{value}'")
        return PROFILES[value]
    return AgentProfile(
        name=str(value["name"]),
        planner=PlannerKind(value.get("planner", "optimal")),
        action_noise_prob=float(value.get("action_noise_prob", 0.0)),
        max_steps=value.get("max_steps"),
        agent_radius=float(value.get("agent_radius",
                                     config_mod.DEFAULTS["navigation.agent_radius"])),
    )


def load_config(path) -> CurriculumConfig:
    """Parse a run config; relative paths resolve against the config file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"config is not valid JSON: {e}") from e
    base_dir = path.parent

    def resolve(p: str) -> str:
        q = Path(p)
        return str(q if q.is_absolute() else base_dir / q)

    try:
        task = Task.from_doc(doc["task"])
        if "profile_schedule" in doc:
            profiles = [_profile_from(p) for p in doc["profile_schedule"]]
        else:
            profiles = [_profile_from(doc.get("profile", "optimal"))]
        heldout = [
            HeldoutCase(resolve(h["scene"]),
                        Task.from_doc(h["task"]) if "task" in h else task)
            for h in doc.get("heldout", [])
        ]
        gen_doc = doc.get("generator", {})
        overrides = config_mod.merged(doc.get("overrides", {}))
        generation = GenerationConfig(
            max_steps=int(gen_doc.get("max_steps", overrides["generator.max_steps"])),
            max_revisions_per_step=int(gen_doc.get(
                "max_revisions_per_step", overrides["generator.max_revisions_per_step"])),
            seed=int(doc.get("seed", 0)),
            placement_delta=float(overrides["placement.delta"]),
            agent_radius=float(overrides["navigation.agent_radius"]),
            resolution=float(overrides["navigation.resolution"]),
            fallback_units=float(overrides["generator.fallback_units"]),
        )
        cfg = CurriculumConfig(
            base_scene_path=resolve(doc["base_scene"]),
            task=task,
            profiles=profiles,
            backend=str(doc.get("backend", "heuristic")),
            iterations=int(doc.get("iterations", 5)),
            episodes_per_eval=int(doc.get("episodes_per_eval", 3)),
            heldout=heldout,
            seed=int(doc.get("seed", 0)),
            out_dir=resolve(doc.get("out_dir", "run")),
            generation=generation,
            resolution=float(overrides["navigation.resolution"]),
            source_doc=doc,
        )
    except KeyError as e:
        raise ParseError(f"config missing key: {e}") from e
    if cfg.backend not in ("heuristic", "external", "stub"):
        raise ParseError(f"unknown backend '{cfg.backend}'")
    return cfg


@dataclass(frozen=True)
class CurriculumRecord:
    iteration: int
    scene_id: str
    success_rate: float
    mean_path_cost: float
    mean_min_clearance: float
    heldout_score: float
    delta_r: float
    session_summary: dict

    def to_doc(self) -> dict:
        return {
            "iteration": self.iteration,
            "scene_id": self.scene_id,
            "success_rate": round(self.success_rate, 2),
            "mean_path_cost": round(self.mean_path_cost, 2),
            "mean_min_clearance": round(self.mean_min_clearance, 2),
            "heldout_score": round(self.heldout_score, 2),
            "delta_R": round(self.delta_r, 2),
            "session": self.session_summary,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_doc(), separators=(",", ":"))


def evaluate(profile: AgentProfile, cases: list[tuple[SceneGraph, Task]],
             episodes: int, seed: int,
             resolution: float | None = None) -> float:
    """Composite held-out score: mean of success minus a path-cost penalty.

    Per episode the contribution is 1.0 - 0.1 * (path length / best cost)
    on success and 0.0 on failure (no cost term).
    """
    if resolution is None:
        resolution = config_mod.DEFAULTS["navigation.resolution"]
    if not cases:
        return 0.0
    total = 0.0
    count = 0
    for idx, (scene, task) in enumerate(cases):
        best = navigation.oracle_cost(scene, task, profile.agent_radius, resolution)
        for j in range(episodes):
            traj = navigation.run_episode(scene, task, profile,
                                          seed + idx * 100 + j, resolution)
            if traj.outcome is Outcome.SUCCESS and best:
                total += 1.0 - 0.1 * (traj.path_length / best)
            count += 1
    return total / count


def _representative(trajectories: list[Trajectory]) -> Trajectory:
    """Median-path-cost failure if any failure exists, else median success."""
    failures = [t for t in trajectories if t.outcome is not Outcome.SUCCESS]
    pool = failures or list(trajectories)
    pool.sort(key=lambda t: (t.path_length, t.seed))
    return pool[len(pool) // 2]


def _make_backend(cfg: CurriculumConfig, base: SceneGraph) -> LLMBackend | None:
    if cfg.backend == "heuristic":
        return None
    if cfg.backend == "stub":
        ids = base.movable_ids
        return make_scripted_stub(ids[0] if ids else "none")
    try:
        return HttpChatBackend.from_env()
    except BackendUnavailable as e:
        logger.warning("external backend unavailable (%s); degrading to heuristic", e)
        return None


def run_curriculum(cfg: CurriculumConfig) -> list[CurriculumRecord]:
    """Run the full closed loop and persist every artifact under out_dir."""
    out = Path(cfg.out_dir)
    for sub in ("scenes", "trajectories", "analyses", "sessions"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    base = load_scene_file(cfg.base_scene_path)
    report = validate(base)
    if not report.empty:
        raise ParseError(f"base scene invalid: {report.issues()}")
    for h in cfg.heldout:
        held = load_scene_file(h.scene_path)
        if held.scene_id == base.scene_id:
            raise ParseError("held-out scene ids must differ from the training scene")
    if not navigation.solvable(base, cfg.task, cfg.profile_for(0).agent_radius,
                               cfg.resolution):
        raise ParseError("task is unsolvable in the base scene")

    (out / "config.json").write_text(json.dumps(cfg.source_doc, indent=2) + "\n")

    heldout_cases = [(load_scene_file(h.scene_path), h.task) for h in cfg.heldout]
    backend = _make_backend(cfg, base)
    analysis_cfg = analysis_mod.AnalysisConfig(
        agent_radius=cfg.profile_for(0).agent_radius, resolution=cfg.resolution)

    scene = base.with_scene_id("e_0000")
    (out / "scenes" / "e_0000.json").write_bytes(save_scene(scene))

    records: list[CurriculumRecord] = []
    prev_heldout: float | None = None
    episode_log = (out / "trajectories" / "episodes.log").open("w")

    try:
        for t in range(cfg.iterations):
            profile = cfg.profile_for(t)
            seed_base = cfg.seed * 1_000_000 + t * 1_000

            trajectories = []
            for i in range(cfg.episodes_per_eval):
                traj = navigation.run_episode(scene, cfg.task, profile,
                                              seed_base + i, cfg.resolution)
                trajectories.append(traj)
                (out / "trajectories" / f"t_{t:04d}_{i:02d}.json").write_text(
                    traj.to_json() + "\n")
                episode_log.write(traj.to_json() + "\n")

            rep = _representative(trajectories)
            if backend is not None:
                image = render.render_scene_png(scene, rep)
                try:
                    a = analysis_mod.analyze_external(
                        image, analysis_mod.trajectory_summary(rep), backend,
                        scene=scene, traj=rep, thresholds=analysis_cfg)
                except BackendUnavailable:
                    logger.warning("analysis backend unavailable; using heuristic")
                    a = analysis_mod.analyze_heuristic(scene, rep, analysis_cfg)
            else:
                a = analysis_mod.analyze_heuristic(scene, rep, analysis_cfg)
            (out / "analyses" / f"a_{t:04d}.json").write_text(a.to_json() + "\n")

            gen_cfg = GenerationConfig(
                max_steps=cfg.generation.max_steps,
                max_revisions_per_step=cfg.generation.max_revisions_per_step,
                seed=cfg.seed * 10_000 + t,
                placement_delta=cfg.generation.placement_delta,
                agent_radius=profile.agent_radius,
                resolution=cfg.resolution,
                fallback_units=cfg.generation.fallback_units,
            )
            session = generator_mod.generate(scene, a, cfg.task, rep, gen_cfg, backend)
            (out / "sessions" / f"s_{t:04d}.json").write_text(
                json.dumps(session.to_doc(), separators=(",", ":")) + "\n")

            next_scene = session.final_scene.with_scene_id(f"e_{t + 1:04d}")
            (out / "scenes" / f"e_{t + 1:04d}.json").write_bytes(save_scene(next_scene))

            heldout_seed = cfg.seed * 1_000_000 + 777_000
            heldout_score = evaluate(profile, heldout_cases, cfg.episodes_per_eval,
                                     heldout_seed, cfg.resolution)
            heldout_score = round(heldout_score, 2)
            delta_r = 0.0 if prev_heldout is None else round(heldout_score - prev_heldout, 2)
            prev_heldout = heldout_score

            successes = sum(1 for tr in trajectories if tr.outcome is Outcome.SUCCESS)
            record = CurriculumRecord(
                iteration=t,
                scene_id=scene.scene_id,
                success_rate=successes / len(trajectories),
                mean_path_cost=sum(tr.path_length for tr in trajectories) / len(trajectories),
                mean_min_clearance=sum(tr.min_clearance_along_path for tr in trajectories)
                / len(trajectories),
                heldout_score=heldout_score,
                delta_r=delta_r,
                session_summary={
                    "accepted": len(session.accepted_steps),
                    "attempts": len(session.steps),
                    "flags": list(session.flags),
                },
            )
            records.append(record)
            scene = next_scene
    finally:
        episode_log.close()

    with (out / "records.log").open("w") as f:
        for r in records:
            f.write(r.to_json() + "\n")
    return records
