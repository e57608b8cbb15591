"""Closed-loop runs of small scenarios and the mission presets."""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np
import pytest

from rcbf_sim import load_scenario, run
from rcbf_sim.errors import SafetyViolationError, StepError
from rcbf_sim.presets import CERES_RHO, mission_a_preset, mission_b_preset
from rcbf_sim.scenario import DisturbanceSection, NominalSection, SafetySection, with_overrides
from rcbf_sim.sim import CSV_HEADER, validate_summary


@pytest.fixture
def toy(fixtures_dir: Path):
    return load_scenario(fixtures_dir / "scenario_toy.json")


def test_log_has_one_record_per_step_plus_final_state(toy) -> None:
    log = run(toy)

    assert len(log) == toy.steps + 1
    assert log.times[0] == 0.0
    assert log.times[-1] == pytest.approx(toy.duration)
    assert log.states().shape == (toy.steps + 1, 6)


def test_toy_scenario_stays_outside_keep_out(toy) -> None:
    log = run(toy)

    assert log.safety_held
    assert log.started_in_restricted_set
    assert log.min_distance >= 10.0 * (1 - 1e-6)
    assert log.switches_on >= 1
    assert np.all(np.abs(log.controls()) <= 1.0 + 1e-9)


@pytest.mark.parametrize("mode", ["worst", "helpful", "zero"])
def test_toy_scenario_safe_under_each_disturbance_mode(toy, mode: str) -> None:
    config = with_overrides(toy, disturbance=dataclasses.replace(toy.disturbance, mode=mode))

    log = run(config)

    # sampled-data overshoot at the boundary stays far below a millimetre
    assert log.min_distance >= 10.0 - 1e-3


def test_far_away_without_disturbance_never_activates(toy) -> None:
    config = with_overrides(
        toy,
        x0=(30.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        nominal=NominalSection(law="zero"),
        disturbance=DisturbanceSection(mode="zero"),
    )

    log = run(config)

    assert log.switches_on == 0
    assert not np.any(log.controls())
    assert np.all(log.states() == log.states()[0])


def test_active_barrier_averages_inside_hysteresis_band(toy) -> None:
    # nominal pulls toward the keep-out center, so the constraint stays engaged
    config = with_overrides(
        toy,
        duration=60.0,
        nominal=NominalSection(law="prox", k_p=0.01, k_d=0.2, target=(0.0, 0.0, 0.0)),
    )

    log = run(config)

    engaged = [float(rec.H[0]) for rec in log.records if 0 in rec.active]
    assert engaged
    eps1 = config.hysteresis.eps1
    assert -2.0 * eps1 <= float(np.mean(engaged)) <= 0.0


def test_runs_are_deterministic(toy) -> None:
    first = run(toy)
    second = run(toy)

    assert np.array_equal(first.states(), second.states())
    assert np.array_equal(first.controls(), second.controls())
    assert [r.solver_status for r in first.records] == [r.solver_status for r in second.records]


def test_seed_changes_random_disturbances(toy) -> None:
    first = run(toy)
    other = run(with_overrides(toy, seed=toy.seed + 1))

    assert not np.array_equal(first.states(), other.states())


def test_summary_matches_schema(toy) -> None:
    log = run(toy)

    summary = log.summary()

    assert validate_summary(summary) == []
    assert summary["steps"] == toy.steps
    assert summary["rcbf"]["a_max"] == pytest.approx(0.99)
    assert sum(summary["active_histogram"].values()) == len(log)
    rows = log.to_rows()
    assert list(rows[0]) == list(CSV_HEADER)


def test_validate_summary_reports_problems() -> None:
    problems = validate_summary({"schema": 2, "seed": "zero"})

    assert "schema must be 1" in problems
    assert "seed has type str" in problems
    assert "missing config" in problems


def test_violation_is_flagged_or_raised(toy) -> None:
    inside = with_overrides(toy, x0=(5.0, 0.0, 0.0, 0.0, 0.0, 0.0), duration=1.0)

    flagged = run(inside)
    assert not flagged.safety_held
    assert not flagged.started_in_restricted_set

    with pytest.raises(SafetyViolationError):
        run(with_overrides(inside, safety=SafetySection(mode="assert")))


def test_evaluation_failure_reports_step(toy) -> None:
    at_center = with_overrides(toy, x0=(0.0, 0.0, 0.0, 0.0, 0.0, 0.0))

    with pytest.raises(StepError) as info:
        run(at_center)

    assert info.value.step == 0


def test_mission_b_short_run_is_safe() -> None:
    log = run(mission_b_preset(duration_hours=20.0 / 3600.0, seed=1))

    assert log.safety_held
    assert log.rcbf["constraints"] == 500
    assert log.min_distance > 500.0


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(5))
def test_mission_b_two_hours_safe(seed: int) -> None:
    log = run(mission_b_preset(seed=seed))

    summary = log.summary()
    assert summary["safety"]["held"]
    assert summary["max_active"] <= 10


@pytest.mark.slow
@pytest.mark.parametrize("variant", [1, 2, 3, 4])
@pytest.mark.parametrize("seed", range(10))
def test_mission_a_ten_days_safe(variant: int, seed: int) -> None:
    log = run(mission_a_preset(variant, seed=seed, dt=300.0))

    assert log.safety_held
    assert log.min_distance >= CERES_RHO[variant] * (1 - 1e-6)
    assert float(log.max_H_series().max()) <= 1e-6 * CERES_RHO[variant]


@pytest.mark.slow
def test_mission_a_worst_case_disturbance_safe() -> None:
    log = run(mission_a_preset(1, disturbance="worst", dt=300.0))

    assert log.safety_held


@pytest.mark.slow
def test_prograde_maneuver_allows_closer_approach() -> None:
    constant = run(mission_a_preset(1, dt=300.0))
    prograde = run(mission_a_preset(4, dt=300.0))

    assert prograde.min_distance < constant.min_distance
