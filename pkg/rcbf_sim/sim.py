"""Closed-loop scenario runner.

Each control step evaluates every barrier, updates the hysteresis states,
filters the nominal control through the QP and integrates the plant over one
zero-order-hold interval. The state at the end of the run is evaluated and
recorded too, so a run of ``steps`` intervals yields ``steps + 1`` records.
"""

from __future__ import annotations

import logging
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Optional, Union

import numpy as np
from tqdm import tqdm

from .dynamics import SimState, rk4_step
from .errors import RcbfSimError, SafetyViolationError, StepError
from .predictive import Predictive, predictive_bank
from .qpfilter import QpProblem, solve, solve_least_violation
from .rcbf import BankEvaluation, ConstantAuthority, VariableAuthority, constant_authority_bank, variable_authority_bank
from .scenario import ConstraintGroup, Scenario, ScenarioConfig, build_scenario, scenario_to_mapping
from .switching import HysteresisBank, active_halfspaces

logger = logging.getLogger(__name__)

CSV_HEADER = (
    "t", "rx", "ry", "rz", "vx", "vy", "vz", "ux", "uy", "uz",
    "maxH", "active_count", "solver_status", "step_ms",
)
# Per-constraint barrier values are kept only for small constraint counts.
MAX_RECORDED_H = 64
SUMMARY_SCHEMA = 1


@dataclass(frozen=True)
class StepRecord:
    t: float
    r: np.ndarray
    v: np.ndarray
    u: np.ndarray
    max_H: float
    max_h: float
    min_distance: float
    active: np.ndarray
    solver_status: str
    step_ms: float
    H: Optional[np.ndarray] = None
    violated: bool = False

    @property
    def active_count(self) -> int:
        return len(self.active)


@dataclass
class TrajectoryLog:
    """Per-step records plus the counters needed for the run summary."""

    config: ScenarioConfig
    records: list[StepRecord] = field(default_factory=list)
    switches_on: int = 0
    switches_off: int = 0
    infeasible_steps: int = 0
    violations: int = 0
    started_in_restricted_set: bool = False
    rcbf: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def times(self) -> np.ndarray:
        return np.array([rec.t for rec in self.records])

    def states(self) -> np.ndarray:
        """``(K, 6)`` array of logged states."""

        return np.array([np.concatenate((rec.r, rec.v)) for rec in self.records])

    def controls(self) -> np.ndarray:
        return np.array([rec.u for rec in self.records])

    def max_H_series(self) -> np.ndarray:
        return np.array([rec.max_H for rec in self.records])

    @property
    def min_distance(self) -> float:
        return float(min(rec.min_distance for rec in self.records))

    @property
    def safety_held(self) -> bool:
        return self.violations == 0

    def to_rows(self) -> list[dict[str, Any]]:
        rows = []
        for rec in self.records:
            values = (rec.t, *rec.r, *rec.v, *rec.u, rec.max_H, rec.active_count, rec.solver_status, round(rec.step_ms, 3))
            rows.append(dict(zip(CSV_HEADER, values)))
        return rows

    def summary(self) -> dict[str, Any]:
        step_ms = np.array([rec.step_ms for rec in self.records])
        histogram = Counter(rec.active_count for rec in self.records)
        return {
            "schema": SUMMARY_SCHEMA,
            "scenario": self.config.name,
            "seed": self.config.seed,
            "steps": len(self.records) - 1,
            "duration": self.config.duration,
            "min_distance": self.min_distance,
            "max_H": float(max(rec.max_H for rec in self.records)),
            "max_h": float(max(rec.max_h for rec in self.records)),
            "switches": {"on": self.switches_on, "off": self.switches_off},
            "active_histogram": {str(k): histogram[k] for k in sorted(histogram)},
            "max_active": int(max(histogram)),
            "step_ms": {
                "p50": float(np.quantile(step_ms, 0.5)),
                "p90": float(np.quantile(step_ms, 0.9)),
                "p99": float(np.quantile(step_ms, 0.99)),
                "max": float(step_ms.max()),
            },
            "infeasible_steps": self.infeasible_steps,
            "safety": {
                "held": self.safety_held,
                "violations": self.violations,
                "started_in_restricted_set": self.started_in_restricted_set,
            },
            "rcbf": dict(self.rcbf),
            "config": scenario_to_mapping(self.config),
        }


SUMMARY_FIELDS: dict[str, type | tuple[type, ...]] = {
    "schema": int,
    "scenario": str,
    "seed": int,
    "steps": int,
    "duration": (int, float),
    "min_distance": (int, float),
    "max_H": (int, float),
    "max_h": (int, float),
    "switches": dict,
    "active_histogram": dict,
    "max_active": int,
    "step_ms": dict,
    "infeasible_steps": int,
    "safety": dict,
    "rcbf": dict,
    "config": dict,
}


def validate_summary(summary: dict[str, Any]) -> list[str]:
    """Problems found in a summary mapping; empty when it matches the schema."""

    problems = []
    for key, kind in SUMMARY_FIELDS.items():
        if key not in summary:
            problems.append(f"missing {key}")
        elif not isinstance(summary[key], kind) or isinstance(summary[key], bool):
            problems.append(f"{key} has type {type(summary[key]).__name__}")
    if summary.get("schema") != SUMMARY_SCHEMA:
        problems.append("schema must be 1")
    for key, sub in (("switches", ("on", "off")), ("step_ms", ("p50", "p90", "p99", "max"))):
        if isinstance(summary.get(key), dict):
            problems.extend(f"missing {key}.{s}" for s in sub if s not in summary[key])
    safety = summary.get("safety")
    if isinstance(safety, dict):
        problems.extend(
            f"missing safety.{s}" for s in ("held", "violations", "started_in_restricted_set") if s not in safety
        )
    return problems


def evaluate_group(group: ConstraintGroup, t: float, x: np.ndarray, scn: Scenario) -> BankEvaluation:
    spec = group.spec
    if isinstance(spec, ConstantAuthority):
        return constant_authority_bank(group.bank, spec.a_max, t, x, scn.gravity, scn.bounds, scn.alpha)
    if isinstance(spec, VariableAuthority):
        return variable_authority_bank(group.bank, spec, t, x, scn.gravity, scn.bounds, scn.alpha)
    if isinstance(spec, Predictive):
        return predictive_bank(group.bank, spec, t, x, scn.gravity, scn.control, scn.bounds, scn.alpha)
    raise TypeError(f"unsupported barrier spec {type(spec).__name__}")


def evaluate_all(scn: Scenario, t: float, x: np.ndarray) -> BankEvaluation:
    return BankEvaluation.concatenate([evaluate_group(g, t, x, scn) for g in scn.groups])


def _rcbf_info(scn: Scenario) -> dict[str, Any]:
    section = scn.config.rcbf
    info: dict[str, Any] = {"kind": section.kind, "constraints": scn.n_constraints}
    if scn.a_max is not None:
        info["a_max"] = scn.a_max
    if section.kind == "variable":
        info["phi"] = section.phi
    if section.kind == "predictive":
        info.update(maneuver=section.maneuver, horizon=section.horizon, ode_dt=section.ode_dt, method=section.method)
    if scn.mesh_spacing is not None:
        info["mesh_spacing"] = scn.mesh_spacing
    return info


def _filter(scn: Scenario, t: float, x: np.ndarray, halfspaces) -> tuple[np.ndarray, str]:
    problem = QpProblem(scn.nominal(t, x), scn.control, halfspaces)
    solution = solve(problem)
    if solution.status == "optimal":
        return solution.u, "optimal"
    logger.warning("QP infeasible at t=%.6g with %d active constraints; using least-violation control", t, len(halfspaces))
    return solve_least_violation(problem), "fallback"


def run(config: Union[ScenarioConfig, Scenario], progress: bool = False) -> TrajectoryLog:
    """Simulate ``config`` and return the trajectory log.

    Barrier evaluation failures abort the run with :class:`StepError`. In
    ``safety.mode="assert"`` a violated keep-out constraint raises
    :class:`SafetyViolationError`; in ``"flag"`` mode it is logged and counted.
    """

    scn = config if isinstance(config, Scenario) else build_scenario(config)
    cfg = scn.config
    n = scn.n_constraints
    rho = scn.rho
    slack = cfg.safety.slack * rho
    hysteresis = HysteresisBank(n, scn.hysteresis)
    log = TrajectoryLog(cfg, rcbf=_rcbf_info(scn))
    state = SimState.from_vector(cfg.t0, np.asarray(cfg.x0, dtype=float))
    steps = cfg.steps
    logger.info("running %s: %d steps of %g s, %d constraints", cfg.name, steps, cfg.dt, n)

    for k in tqdm(range(steps + 1), desc=cfg.name, unit="step", dynamic_ncols=True, disable=not progress):
        started = time.perf_counter()
        t, x = state.t, state.x
        try:
            evals = evaluate_all(scn, t, x)
        except (RcbfSimError, ValueError, FloatingPointError) as exc:
            raise StepError(k, t, exc) from exc

        violated = bool(np.any(evals.h > slack))
        if k == 0:
            log.started_in_restricted_set = bool(np.all(evals.H <= 0) and np.all(evals.h <= 0))
            if not log.started_in_restricted_set:
                logger.warning("%s starts outside the restricted safe set", cfg.name)
        if violated:
            log.violations += 1
            worst = int(np.argmax(evals.h - slack))
            message = f"keep-out constraint {worst} violated at t={t:.6g}: h={evals.h[worst]:.6g} m"
            if cfg.safety.mode == "assert":
                raise SafetyViolationError(message)
            logger.warning(message)

        switched_on, switched_off = hysteresis.update(evals.H)
        for i in switched_on:
            if evals.H[i] > 0:
                logger.warning("constraint %d activated with H=%.6g > 0 at t=%.6g", i, evals.H[i], t)

        halfspaces = active_halfspaces(hysteresis, evals)
        try:
            u, status = _filter(scn, t, x, halfspaces)
        except ValueError as exc:
            raise StepError(k, t, exc) from exc
        if status != "optimal":
            log.infeasible_steps += 1
        step_ms = (time.perf_counter() - started) * 1e3

        worst = int(np.argmax(evals.H))
        log.records.append(
            StepRecord(
                t=t,
                r=state.r,
                v=state.v,
                u=np.asarray(u, dtype=float),
                max_H=float(evals.H[worst]),
                max_h=float(evals.h.max()),
                min_distance=float(np.min(rho - evals.h)),
                active=hysteresis.active.copy(),
                solver_status=status,
                step_ms=step_ms,
                H=evals.H.copy() if n <= MAX_RECORDED_H else None,
                violated=violated,
            )
        )
        if k == steps:
            break
        w_u, w_x = scn.disturbance.draw(toward_u=evals.rows[worst], toward_x=evals.grad_H[worst, :3])
        try:
            state = rk4_step(state, cfg.dt, u, w_u, w_x, scn.gravity)
        except RcbfSimError as exc:
            raise StepError(k, t, exc) from exc

    log.switches_on = hysteresis.switches_on
    log.switches_off = hysteresis.switches_off
    logger.info(
        "finished %s: min distance %.6g m, max H %.6g m, %d violations",
        cfg.name,
        log.min_distance,
        float(log.max_H_series().max()),
        log.violations,
    )
    return log
