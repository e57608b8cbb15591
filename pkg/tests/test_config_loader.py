"""Tests for scenario file loading and the scenario schema."""

from __future__ import annotations

import dataclasses
import json
from importlib import util as importlib_util
from pathlib import Path

import pytest

from rcbf_sim import (
    UnsupportedConfigFormatError,
    build_scenario,
    deep_merge,
    load_scenario,
    load_scenario_file,
    scenario_from_mapping,
    scenario_to_mapping,
)
from rcbf_sim.errors import ScenarioError
from rcbf_sim.presets import get_preset
from rcbf_sim.scenario import with_overrides


def write_temp_file(tmp_path: Path, name: str, contents: str) -> Path:
    path = tmp_path / name
    path.write_text(contents, encoding="utf-8")
    return path


def minimal_mapping() -> dict:
    return {
        "name": "minimal",
        "duration": 10.0,
        "dt": 0.5,
        "x0": [20.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        "gravity": {"model": "zero"},
        "constraints": {"points": [{"rho": 5.0}]},
        "hysteresis": {"eps1": 1.0, "eps2": 3.0},
    }


def test_load_scenario_file_from_json(tmp_path: Path) -> None:
    path = write_temp_file(tmp_path, "scenario.json", json.dumps(minimal_mapping()))

    loaded = load_scenario_file(path)

    assert loaded["constraints"]["points"][0]["rho"] == 5.0


def test_load_scenario_file_from_yaml_without_dependency(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
    path = write_temp_file(tmp_path, "scenario.yml", "name: minimal\nduration: 10\n")

    def fake_find_spec(name: str, package: str | None = None) -> None:
        if name == "yaml":
            return None
        return importlib_util.find_spec(name, package)

    monkeypatch.setattr("rcbf_sim.config_loader.find_spec", fake_find_spec)

    with pytest.raises(ModuleNotFoundError):
        load_scenario_file(path)


def test_load_scenario_file_unsupported_extension(tmp_path: Path) -> None:
    path = write_temp_file(tmp_path, "scenario.txt", "noop")

    with pytest.raises(UnsupportedConfigFormatError):
        load_scenario_file(path)


def test_load_scenario_file_requires_mapping(tmp_path: Path) -> None:
    path = write_temp_file(tmp_path, "scenario.json", "[1, 2, 3]")

    with pytest.raises(ScenarioError):
        load_scenario_file(path)


def test_missing_scenario_file(tmp_path: Path) -> None:
    with pytest.raises(FileNotFoundError):
        load_scenario_file(tmp_path / "nope.json")


def test_deep_merge_merges_nested_sections() -> None:
    base = {"a": 1, "nested": {"x": 1, "y": 2}, "items": [1, 2]}

    merged = deep_merge(base, {"nested": {"y": 3}, "items": [9]})

    assert merged == {"a": 1, "nested": {"x": 1, "y": 3}, "items": [9]}
    assert base["nested"]["y"] == 2


def test_scenario_defaults_fill_missing_sections() -> None:
    config = scenario_from_mapping(minimal_mapping())

    assert config.schema == 1
    assert config.steps == 20
    assert config.rcbf.kind == "constant"
    assert config.constraints.points[0].center == (0.0, 0.0, 0.0)
    assert config.x0 == (20.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def test_scenario_rejects_unknown_keys() -> None:
    mapping = minimal_mapping()
    mapping["rcbf"] = {"kind": "constant", "flavour": "vanilla"}

    with pytest.raises(ScenarioError, match="flavour"):
        scenario_from_mapping(mapping)


@pytest.mark.parametrize(
    "change",
    [
        {"schema": 2},
        {"dt": 0.0},
        {"x0": [1.0, 2.0, 3.0]},
        {"constraints": {}},
        {"rcbf": {"kind": "quadratic"}},
        {"safety": {"mode": "panic"}},
        {"disturbance": {"w_x_max": 0.1}, "rcbf": {"kind": "predictive", "horizon": 10.0, "ode_dt": 1.0}},
        {"constraints": {"points": {"rho": 1.0}}},
    ],
)
def test_scenario_validation_errors(change: dict) -> None:
    with pytest.raises(ScenarioError):
        scenario_from_mapping({**minimal_mapping(), **change})


def test_mapping_round_trip_of_preset() -> None:
    config = get_preset("mission-b")

    assert scenario_from_mapping(json.loads(json.dumps(scenario_to_mapping(config)))) == config


def test_load_scenario_applies_base_preset(tmp_path: Path) -> None:
    path = write_temp_file(
        tmp_path, "short.json", json.dumps({"base": "mission-a-2", "duration": 3600.0, "seed": 9})
    )

    config = load_scenario(path)

    assert config.name == "mission-a-2"
    assert config.duration == 3600.0
    assert config.seed == 9
    assert config.rcbf.kind == "variable"


def test_load_yaml_override_with_relative_mesh(fixtures_dir: Path) -> None:
    pytest.importorskip("yaml")

    config = load_scenario(fixtures_dir / "override.yml")

    assert config.name == "mission-b-fixture"
    assert config.disturbance.mode == "worst"
    assert config.disturbance.w_u_max == 0.005
    assert Path(config.constraints.mesh.path) == fixtures_dir / "tiny_mesh.txt"
    assert build_scenario(config).n_constraints == 7


def test_build_scenario_wraps_construction_errors() -> None:
    mapping = minimal_mapping()
    mapping["rcbf"] = {"kind": "variable", "phi": "gravity"}
    mapping["gravity"] = {"model": "point_mass", "mu": 1e6}

    with pytest.raises(ScenarioError):
        build_scenario(scenario_from_mapping(mapping))


def test_with_overrides_ignores_none() -> None:
    config = scenario_from_mapping(minimal_mapping())

    assert with_overrides(config, seed=None, dt=None) is config
    assert with_overrides(config, seed=4).seed == 4
    assert dataclasses.replace(config, seed=4) == with_overrides(config, seed=4)
