"""Scenario file loading for the RCBF simulator."""

from __future__ import annotations

import json
from importlib.util import find_spec
from pathlib import Path
from typing import Any, Mapping

from .errors import ScenarioError


class UnsupportedConfigFormatError(RuntimeError):
    """Raised when a scenario file uses an unsupported format."""


def load_scenario_file(path: str | Path) -> Mapping[str, Any]:
    """Load a scenario mapping from JSON or YAML.

    JSON is the preferred format. YAML is read with :mod:`PyYAML` when it is
    installed; a YAML file without the dependency produces a friendly error.
    """

    path_obj = Path(path)
    if not path_obj.exists():
        raise FileNotFoundError(f"Scenario file not found: {path_obj}")

    suffix = path_obj.suffix.lower()
    text = path_obj.read_text(encoding="utf-8")

    if suffix == ".json":
        data = json.loads(text)
    elif suffix in {".yml", ".yaml"}:
        if find_spec("yaml") is None:
            raise ModuleNotFoundError(
                "PyYAML is required to read YAML scenario files. "
                "Install it with 'pip install PyYAML' or convert the file to JSON."
            )
        import yaml  # type: ignore[import-untyped]

        data = yaml.safe_load(text)
    else:
        raise UnsupportedConfigFormatError(
            f"Unsupported scenario format: {path_obj.suffix or '(no extension)'}"
        )

    if not isinstance(data, Mapping):
        raise ScenarioError(f"{path_obj}: top level must be a mapping, got {type(data).__name__}")
    return data


def deep_merge(base: Mapping[str, Any], overrides: Mapping[str, Any]) -> dict[str, Any]:
    """Merge ``overrides`` into ``base``; nested mappings merge, everything else replaces."""

    merged: dict[str, Any] = dict(base)
    for key, value in overrides.items():
        current = merged.get(key)
        if isinstance(current, Mapping) and isinstance(value, Mapping):
            merged[key] = deep_merge(current, value)
        else:
            merged[key] = value
    return merged
