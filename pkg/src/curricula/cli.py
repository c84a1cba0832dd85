"""Operator CLI: validate, episode, analyze, perturb, loop, render.

Exit codes: 0 ok, 1 validation/domain failure, 2 usage error, 3 backend
unavailable. Errors go to stderr as one-line JSON records.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from . import analysis as analysis_mod
from . import curriculum as curriculum_mod
from . import generator as generator_mod
from . import navigation, render
from .errors import AuthError, BackendUnavailable, CurriculaError, ValidationError
from .generator import GenerationConfig
from .llm import HttpChatBackend, make_scripted_stub
from .navigation import PROFILES, Task, Trajectory
from .scene import load_scene_file, save_scene, validate


def _fail(kind: str, detail: str, code: int):
    click.echo(json.dumps({"error": kind, "detail": detail}), err=True)
    sys.exit(code)


def _guard(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (BackendUnavailable, AuthError) as e:
        _fail(type(e).__name__, str(e), 3)
    except ValidationError as e:
        _fail("ValidationError", str(e), 1)
    except CurriculaError as e:
        _fail(type(e).__name__, str(e), 1)


def _load_task(path: str) -> Task:
    return Task.from_doc(json.loads(Path(path).read_text()))


def _load_profile(name: str):
    if name in PROFILES:
        return PROFILES[name]
    _fail("UnknownProfile", f"no agent profile named '{name}'", 2)


def _backend_for(name: str, scene):
    if name == "heuristic":
        return None
    if name == "stub":
        ids = scene.movable_ids
        return make_scripted_stub(ids[0] if ids else "none")
    return HttpChatBackend.from_env()


@click.group()
@click.version_option(version=__version__, prog_name="curricula")
def main():
    """Closed-loop environment curriculum tools."""


@main.command("validate")
@click.argument("scene_path", type=click.Path(exists=True))
def cmd_validate(scene_path):
    """Check a scene file; exit 0 only when the report is empty."""
    scene = _guard(load_scene_file, scene_path)
    report = validate(scene)
    if report.empty:
        click.echo("ok: no violations")
        sys.exit(0)
    for issue in report.issues():
        click.echo(issue)
    sys.exit(1)


@main.command("episode")
@click.argument("scene_path", type=click.Path(exists=True))
@click.option("--task", "task_path", required=True, type=click.Path(exists=True),
              help="Task JSON: start, heading, target_object_id, success_radius.")
@click.option("--profile", default="optimal", show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_dir", default="episode_out", show_default=True)
def cmd_episode(scene_path, task_path, profile, seed, out_dir):
    """Run one episode; write the trajectory and its top-down render."""
    scene = _guard(load_scene_file, scene_path)
    task = _load_task(task_path)
    prof = _load_profile(profile)
    traj = _guard(navigation.run_episode, scene, task, prof, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trajectory.json").write_text(traj.to_json() + "\n")
    (out / "render.svg").write_bytes(render.render_scene(scene, traj))
    click.echo(f"outcome={traj.outcome.value} path_length={traj.path_length:.2f} -> {out}")


@main.command("analyze")
@click.argument("scene_path", type=click.Path(exists=True))
@click.argument("traj_path", type=click.Path(exists=True))
@click.option("--backend", default="heuristic", show_default=True,
              type=click.Choice(["heuristic", "external", "stub"]))
@click.option("--out", "out_path", default="analysis.json", show_default=True)
def cmd_analyze(scene_path, traj_path, backend, out_path):
    """Analyze a trajectory into outcome, concerns and suggestions."""
    scene = _guard(load_scene_file, scene_path)
    traj = Trajectory.from_json(Path(traj_path).read_text())
    be = _guard(_backend_for, backend, scene)
    if be is None:
        result = _guard(analysis_mod.analyze_heuristic, scene, traj)
    else:
        image = render.render_scene_png(scene, traj)
        result = _guard(analysis_mod.analyze_external, image,
                        analysis_mod.trajectory_summary(traj), be,
                        scene=scene, traj=traj)
    Path(out_path).write_text(result.to_json() + "\n")
    click.echo(f"{result.to_text()}")


@main.command("perturb")
@click.argument("scene_path", type=click.Path(exists=True))
@click.argument("analysis_path", type=click.Path(exists=True))
@click.option("--traj", "traj_path", required=True, type=click.Path(exists=True),
              help="Reference trajectory (supplies the task and corridor).")
@click.option("--backend", default="heuristic", show_default=True,
              type=click.Choice(["heuristic", "external", "stub"]))
@click.option("--steps", default=None, type=int, help="Max single-object edits.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_dir", default="perturb_out", show_default=True)
def cmd_perturb(scene_path, analysis_path, traj_path, backend, steps, seed, out_dir):
    """Generate a harder-but-solvable variant via single-object edits."""
    scene = _guard(load_scene_file, scene_path)
    a = analysis_mod.Analysis.from_json(Path(analysis_path).read_text())
    traj = Trajectory.from_json(Path(traj_path).read_text())
    cfg = GenerationConfig(seed=seed)
    if steps is not None:
        cfg.max_steps = steps
    be = _guard(_backend_for, backend, scene)
    session = _guard(generator_mod.generate, scene, a, traj.task, traj, cfg, be)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "session.json").write_text(
        json.dumps(session.to_doc(), separators=(",", ":")) + "\n")
    (out / "final_scene.json").write_bytes(save_scene(session.final_scene))
    current = scene
    (out / "step_00.svg").write_bytes(render.render_scene(scene, target=traj.task.target_object_id))
    idx = 1
    for step in session.steps:
        if not step.verified:
            continue
        current, _ = generator_mod.apply_edit(current, step.instruction, cfg.placement_delta)
        (out / f"step_{idx:02d}.svg").write_bytes(
            render.render_scene(current, target=traj.task.target_object_id))
        idx += 1
    click.echo(f"accepted {len(session.accepted_steps)} of {len(session.steps)} attempts -> {out}")


@main.command("loop")
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--out", "out_dir", default=None, help="Override the run directory.")
@click.option("--jobs", default=1, show_default=True, type=int,
              help="Worker cap for episode evaluation.")
def cmd_loop(config_path, out_dir, jobs):
    """Run the closed curriculum loop from a config file."""
    cfg = _guard(curriculum_mod.load_config, config_path)
    if out_dir is not None:
        cfg.out_dir = out_dir
    records = _guard(curriculum_mod.run_curriculum, cfg)
    click.echo(f"{len(records)} iterations -> {Path(cfg.out_dir) / 'records.log'}")
    for r in records:
        d = r.to_doc()
        click.echo(f"t={d['iteration']} success_rate={d['success_rate']:.2f} "
                   f"delta_R={d['delta_R']:.2f}")


@main.command("render")
@click.argument("scene_path", type=click.Path(exists=True))
@click.option("--traj", "traj_path", default=None, type=click.Path(exists=True))
@click.option("--target", default=None, help="Object id to mark with a cross.")
@click.option("--out", "out_path", default="scene.svg", show_default=True)
def cmd_render(scene_path, traj_path, target, out_path):
    """Draw the top-down view of a scene (optionally with a trajectory)."""
    scene = _guard(load_scene_file, scene_path)
    traj = Trajectory.from_json(Path(traj_path).read_text()) if traj_path else None
    data = render.render_scene(scene, traj, target)
    Path(out_path).write_bytes(data)
    click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    main()
