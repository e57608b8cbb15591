"""Robust control barrier function safety filters for low-thrust spacecraft."""

from .config_loader import UnsupportedConfigFormatError, deep_merge, load_scenario_file
from .errors import RcbfSimError, SafetyViolationError, ScenarioError, StepError
from .presets import get_preset, mission_a_preset, mission_b_preset
from .scenario import ScenarioConfig, build_scenario, load_scenario, scenario_from_mapping, scenario_to_mapping
from .sim import TrajectoryLog, run

__all__ = [
    "RcbfSimError",
    "SafetyViolationError",
    "ScenarioConfig",
    "ScenarioError",
    "StepError",
    "TrajectoryLog",
    "UnsupportedConfigFormatError",
    "build_scenario",
    "deep_merge",
    "get_preset",
    "load_scenario",
    "load_scenario_file",
    "mission_a_preset",
    "mission_b_preset",
    "run",
    "scenario_from_mapping",
    "scenario_to_mapping",
]
