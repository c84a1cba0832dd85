import json

import pytest
from click.testing import CliRunner

from curricula.cli import main
from curricula.scene import load_scene_file


@pytest.fixture()
def runner():
    return CliRunner()


def test_validate_golden_scene_exits_zero(runner, data_dir):
    result = runner.invoke(main, ["validate", str(data_dir / "apartment_a.json")])
    assert result.exit_code == 0
    assert "no violations" in result.output


def test_validate_bad_scene_exits_one(runner, tmp_path, data_dir):
    doc = json.loads((data_dir / "apartment_a.json").read_text())
    doc["objects"][1]["position"] = doc["objects"][0]["position"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    result = runner.invoke(main, ["validate", str(bad)])
    assert result.exit_code == 1


def test_usage_error_exits_two(runner):
    result = runner.invoke(main, ["episode"])  # missing required args
    assert result.exit_code == 2


def test_episode_writes_artifacts(runner, data_dir, tmp_path):
    out = tmp_path / "ep"
    result = runner.invoke(main, [
        "episode", str(data_dir / "apartment_a.json"),
        "--task", str(data_dir / "task_fridge.json"),
        "--profile", "optimal", "--seed", "3", "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    assert (out / "trajectory.json").exists()
    assert (out / "render.svg").read_bytes().startswith(b"<svg")
    assert "outcome=success" in result.output


def test_analyze_heuristic_writes_analysis(runner, data_dir, tmp_path):
    out = tmp_path / "ep"
    runner.invoke(main, [
        "episode", str(data_dir / "apartment_a.json"),
        "--task", str(data_dir / "task_fridge.json"),
        "--profile", "clearance_blind", "--seed", "0", "--out", str(out),
    ])
    apath = tmp_path / "analysis.json"
    result = runner.invoke(main, [
        "analyze", str(data_dir / "apartment_a.json"), str(out / "trajectory.json"),
        "--backend", "heuristic", "--out", str(apath),
    ])
    assert result.exit_code == 0, result.output
    doc = json.loads(apath.read_text())
    assert doc["outcome"] in ("success", "failure")


def test_perturb_zero_steps_is_identity(runner, data_dir, tmp_path):
    out = tmp_path / "ep"
    runner.invoke(main, [
        "episode", str(data_dir / "apartment_a.json"),
        "--task", str(data_dir / "task_fridge.json"),
        "--profile", "clearance_blind", "--seed", "0", "--out", str(out),
    ])
    apath = tmp_path / "analysis.json"
    runner.invoke(main, [
        "analyze", str(data_dir / "apartment_a.json"), str(out / "trajectory.json"),
        "--out", str(apath),
    ])
    pout = tmp_path / "perturb"
    result = runner.invoke(main, [
        "perturb", str(data_dir / "apartment_a.json"), str(apath),
        "--traj", str(out / "trajectory.json"), "--steps", "0", "--out", str(pout),
    ])
    assert result.exit_code == 0, result.output
    final = (pout / "final_scene.json").read_bytes()
    assert final == (data_dir / "apartment_a.json").read_bytes()


def test_perturb_produces_valid_harder_scene(runner, data_dir, tmp_path):
    out = tmp_path / "ep"
    runner.invoke(main, [
        "episode", str(data_dir / "apartment_a.json"),
        "--task", str(data_dir / "task_fridge.json"),
        "--profile", "clearance_blind", "--seed", "0", "--out", str(out),
    ])
    apath = tmp_path / "analysis.json"
    runner.invoke(main, [
        "analyze", str(data_dir / "apartment_a.json"), str(out / "trajectory.json"),
        "--out", str(apath),
    ])
    pout = tmp_path / "perturb"
    result = runner.invoke(main, [
        "perturb", str(data_dir / "apartment_a.json"), str(apath),
        "--traj", str(out / "trajectory.json"), "--steps", "3",
        "--seed", "1", "--out", str(pout),
    ])
    assert result.exit_code == 0, result.output
    session = json.loads((pout / "session.json").read_text())
    assert (pout / "step_00.svg").exists()
    assert session["accepted"] >= 1
    from curricula.scene import validate

    final = load_scene_file(pout / "final_scene.json")
    assert validate(final).empty


def test_loop_matches_golden_records(runner, data_dir, tmp_path):
    out = tmp_path / "loop"
    result = runner.invoke(main, [
        "loop", str(data_dir / "loop_config.json"), "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    got = (out / "records.log").read_bytes()
    assert got == (data_dir / "golden_records.log").read_bytes()


def test_render_command(runner, data_dir, tmp_path):
    out_path = tmp_path / "scene.svg"
    result = runner.invoke(main, [
        "render", str(data_dir / "apartment_a.json"),
        "--target", "fridge_1", "--out", str(out_path),
    ])
    assert result.exit_code == 0
    assert out_path.read_bytes().startswith(b"<svg")


def test_external_backend_without_env_exits_three(runner, data_dir, tmp_path, monkeypatch):
    from curricula.llm import ENV_URL

    monkeypatch.delenv(ENV_URL, raising=False)
    out = tmp_path / "ep"
    runner.invoke(main, [
        "episode", str(data_dir / "apartment_a.json"),
        "--task", str(data_dir / "task_fridge.json"), "--out", str(out),
    ])
    result = runner.invoke(main, [
        "analyze", str(data_dir / "apartment_a.json"), str(out / "trajectory.json"),
        "--backend", "external", "--out", str(tmp_path / "a.json"),
    ])
    assert result.exit_code == 3
