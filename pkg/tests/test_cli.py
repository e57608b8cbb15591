"""Tests for the command-line interface and the run artifacts it writes."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from rcbf_sim.cli import OUT_ENV, main, parse_sweep
from rcbf_sim.mesh import load_mesh
from rcbf_sim.scenario import load_scenario
from rcbf_sim.sim import CSV_HEADER, validate_summary


def toy_args(fixtures_dir: Path, *extra: str) -> list[str]:
    return ["--quiet", "run", "--scenario", str(fixtures_dir / "scenario_toy.json"), "--duration", "2", "--no-progress", *extra]


def write_inside_scenario(fixtures_dir: Path, tmp_path: Path) -> Path:
    mapping = json.loads((fixtures_dir / "scenario_toy.json").read_text(encoding="utf-8"))
    mapping["x0"] = [5.0, 0.0, 0.0, 0.0, 0.0, 0.0]
    path = tmp_path / "inside.json"
    path.write_text(json.dumps(mapping), encoding="utf-8")
    return path


def test_run_writes_artifacts(fixtures_dir: Path, tmp_path: Path) -> None:
    out = tmp_path / "out"

    code = main(toy_args(fixtures_dir, "--out", str(out)))

    assert code == 0
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert validate_summary(summary) == []
    assert summary["steps"] == 20
    with (out / "trajectory.csv").open(newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) == 1 + 21
    assert "fixture-toy" in (out / "report.html").read_text(encoding="utf-8")


def test_run_uses_output_directory_from_environment(
    monkeypatch: pytest.MonkeyPatch, fixtures_dir: Path, tmp_path: Path
) -> None:
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env-out"))

    assert main(toy_args(fixtures_dir)) == 0
    assert (tmp_path / "env-out" / "summary.json").exists()


def test_seed_override_is_recorded(fixtures_dir: Path, tmp_path: Path) -> None:
    out = tmp_path / "out"

    assert main(toy_args(fixtures_dir, "--out", str(out), "--seed", "42")) == 0

    assert json.loads((out / "summary.json").read_text(encoding="utf-8"))["seed"] == 42


def test_unsafe_run_exits_with_two(fixtures_dir: Path, tmp_path: Path) -> None:
    path = write_inside_scenario(fixtures_dir, tmp_path)
    base = ["--quiet", "run", "--scenario", str(path), "--duration", "1", "--no-progress", "--out", str(tmp_path / "o")]

    assert main(base) == 2
    assert main([*base, "--strict"]) == 2


def test_errors_exit_with_one(tmp_path: Path) -> None:
    bad = tmp_path / "scenario.txt"
    bad.write_text("noop", encoding="utf-8")

    assert main(["--quiet", "run", "--scenario", str(tmp_path / "missing.json")]) == 1
    assert main(["--quiet", "run", "--scenario", str(bad)]) == 1
    assert main(["run", "--preset", "mission-z"]) == 1
    assert main(["run"]) == 1


def test_invalid_scenario_content_exits_with_one(tmp_path: Path) -> None:
    path = tmp_path / "broken.json"
    path.write_text(json.dumps({"name": "broken", "duration": -1}), encoding="utf-8")

    assert main(["--quiet", "run", "--scenario", str(path)]) == 1


def test_preset_list_and_write(capsys: pytest.CaptureFixture[str], tmp_path: Path) -> None:
    assert main(["preset"]) == 0
    listed = capsys.readouterr().out.split()
    assert "mission-a-1" in listed and "mission-b" in listed

    target = tmp_path / "a2.json"
    assert main(["preset", "mission-a-2", "--write", str(target)]) == 0
    assert load_scenario(target).rcbf.kind == "variable"


def test_mesh_subcommand(capsys: pytest.CaptureFixture[str], tmp_path: Path) -> None:
    target = tmp_path / "ellipsoid.txt"

    assert main(["mesh", "--n-points", "100", "--rho", "10", "--out", str(target)]) == 0

    assert load_mesh(target).shape == (100, 3)
    captured = capsys.readouterr()
    assert "wrote 100 vertices" in captured.out
    assert "spacing >= 2*rho" in captured.err


def test_oracle_subcommand(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["oracle", "band"]) == 0

    assert "ok" in capsys.readouterr().out


def test_sweep_runs_each_seed(fixtures_dir: Path, tmp_path: Path) -> None:
    out = tmp_path / "sweep"

    code = main(toy_args(fixtures_dir, "--out", str(out), "--sweep", "seeds=0..1", "--workers", "2"))

    assert code == 0
    sweep = json.loads((out / "sweep.json").read_text(encoding="utf-8"))
    assert sweep["seeds"] == [0, 1]
    assert sweep["violated_seeds"] == []
    assert (out / "seed-0" / "summary.json").exists()
    assert (out / "seed-1" / "trajectory.csv").exists()


def test_parse_sweep() -> None:
    assert parse_sweep("seeds=3..5") == [3, 4, 5]
    with pytest.raises(ValueError):
        parse_sweep("seeds=5..3")
    with pytest.raises(ValueError):
        parse_sweep("0..9")
