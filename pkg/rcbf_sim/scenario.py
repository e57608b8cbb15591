"""Declarative scenario schema and its translation into runtime objects.

A scenario file is a mapping with ``schema: 1``. Sections mirror the
dataclasses below; omitted keys take the dataclass defaults. A file may name
a ``base`` preset, in which case its keys override the preset field by field.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Union

import numpy as np

from .config_loader import deep_merge, load_scenario_file
from .constraints import FixedCenter, KeepOutBank, KeepOutConstraint, RotatingCenter, bank_from_mesh
from .dynamics import DISTURBANCE_MODES, ControlBounds, DisturbanceBounds, DisturbanceProcess, GravityModel
from .errors import RcbfSimError, ScenarioError
from .mesh import estimate_semi_axes, generate_ellipsoid_mesh, load_mesh, report_spacing, shell_samples
from .predictive import Predictive
from .qpfilter import nominal_flyby, nominal_prox
from .rcbf import Alpha, ConstantAuthority, VariableAuthority, compute_a_max0, gravity_phi, linear_phi
from .switching import HysteresisParams, make_alpha

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
RCBF_KINDS = ("constant", "variable", "predictive")
NOMINAL_LAWS = ("zero", "flyby", "prox")
SAFETY_MODES = ("flag", "assert")

Vector3 = tuple[float, float, float]


@dataclass(frozen=True)
class GravitySection:
    model: str = "point_mass"
    mu: float = 0.0
    center: Vector3 = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class ControlSection:
    u_max: float = 1.0


@dataclass(frozen=True)
class DisturbanceSection:
    """Disturbance bounds; ``mode="random"`` draws uniformly in each ball."""

    w_u_max: float = 0.0
    w_x_max: float = 0.0
    mode: str = "random"


@dataclass(frozen=True)
class PointConstraint:
    rho: float
    center: Vector3 = (0.0, 0.0, 0.0)
    omega: Optional[Vector3] = None
    t0: float = 0.0


@dataclass(frozen=True)
class MeshSource:
    """Vertices from ``path`` or a synthetic ellipsoid; each becomes a keep-out center."""

    rho: float
    omega: Vector3 = (0.0, 0.0, 0.0)
    path: Optional[str] = None
    n_points: int = 500
    semi_axes: Optional[Vector3] = None
    t0: float = 0.0


@dataclass(frozen=True)
class ConstraintSection:
    points: tuple[PointConstraint, ...] = ()
    mesh: Optional[MeshSource] = None


@dataclass(frozen=True)
class SampleSpec:
    """Shell of positions over which a shared a_max is bounded."""

    r_min: float
    r_max: float
    n_radii: int = 8
    n_directions: int = 200
    times: tuple[float, ...] = (0.0,)


@dataclass(frozen=True)
class RcbfSection:
    kind: str = "constant"
    a_max: Union[float, str] = "auto"
    a_max_method: str = "bound"
    a_max_samples: Optional[SampleSpec] = None
    phi: str = "gravity"
    maneuver: str = "rad"
    horizon: float = 0.0
    ode_dt: float = 0.0
    refine_tol: float = 1e-3
    ambiguity_tol: float = 1e-3
    method: str = "rk4"


@dataclass(frozen=True)
class HysteresisSection:
    eps1: float = 0.0
    eps2: float = 0.0
    mode: str = "hysteresis"


@dataclass(frozen=True)
class AlphaSection:
    kind: str = "alpha_r"
    gain: float = 1.0


@dataclass(frozen=True)
class NominalSection:
    law: str = "zero"
    k_p: float = 0.0
    k_d: float = 0.0
    target: Vector3 = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class SafetySection:
    """``assert`` raises on the first violated step, ``flag`` logs and continues."""

    mode: str = "flag"
    slack: float = 1e-6


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    duration: float
    dt: float
    x0: tuple[float, ...]
    constraints: ConstraintSection
    hysteresis: HysteresisSection
    seed: int = 0
    t0: float = 0.0
    gravity: GravitySection = field(default_factory=GravitySection)
    control: ControlSection = field(default_factory=ControlSection)
    disturbance: DisturbanceSection = field(default_factory=DisturbanceSection)
    rcbf: RcbfSection = field(default_factory=RcbfSection)
    alpha: AlphaSection = field(default_factory=AlphaSection)
    nominal: NominalSection = field(default_factory=NominalSection)
    safety: SafetySection = field(default_factory=SafetySection)
    schema: int = SCHEMA_VERSION

    def __post_init__(self) -> None:
        if self.schema != SCHEMA_VERSION:
            raise ScenarioError(f"unsupported scenario schema {self.schema!r}; expected {SCHEMA_VERSION}")
        if not (self.duration > 0 and self.dt > 0):
            raise ScenarioError("duration and dt must be positive")
        if len(self.x0) != 6:
            raise ScenarioError("x0 must have six entries [rx, ry, rz, vx, vy, vz]")
        if not self.constraints.points and self.constraints.mesh is None:
            raise ScenarioError("a scenario needs at least one constraint")
        if self.rcbf.kind not in RCBF_KINDS:
            raise ScenarioError(f"rcbf.kind must be one of {RCBF_KINDS}")
        if self.nominal.law not in NOMINAL_LAWS:
            raise ScenarioError(f"nominal.law must be one of {NOMINAL_LAWS}")
        if self.safety.mode not in SAFETY_MODES:
            raise ScenarioError(f"safety.mode must be one of {SAFETY_MODES}")
        if self.disturbance.mode not in DISTURBANCE_MODES:
            raise ScenarioError(f"disturbance.mode must be one of {DISTURBANCE_MODES}")
        if self.rcbf.kind == "predictive" and self.disturbance.w_x_max != 0:
            raise ScenarioError("the predictive barrier requires disturbance.w_x_max = 0")

    @property
    def steps(self) -> int:
        return int(math.ceil(self.duration / self.dt - 1e-9))


# ---------- mapping <-> dataclasses ----------

_NESTED: dict[tuple[type, str], type] = {
    (ScenarioConfig, "gravity"): GravitySection,
    (ScenarioConfig, "control"): ControlSection,
    (ScenarioConfig, "disturbance"): DisturbanceSection,
    (ScenarioConfig, "constraints"): ConstraintSection,
    (ScenarioConfig, "rcbf"): RcbfSection,
    (ScenarioConfig, "hysteresis"): HysteresisSection,
    (ScenarioConfig, "alpha"): AlphaSection,
    (ScenarioConfig, "nominal"): NominalSection,
    (ScenarioConfig, "safety"): SafetySection,
    (ConstraintSection, "mesh"): MeshSource,
    (RcbfSection, "a_max_samples"): SampleSpec,
}
_NESTED_LISTS: dict[tuple[type, str], type] = {(ConstraintSection, "points"): PointConstraint}


def _freeze(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


def _build(cls: type, mapping: Any, where: str) -> Any:
    if not isinstance(mapping, Mapping):
        raise ScenarioError(f"{where}: expected a mapping, got {type(mapping).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(mapping) - names)
    if unknown:
        raise ScenarioError(f"{where}: unknown keys {', '.join(unknown)}")
    kwargs: dict[str, Any] = {}
    for key, value in mapping.items():
        path = f"{where}.{key}" if where else key
        if value is not None and (cls, key) in _NESTED:
            kwargs[key] = _build(_NESTED[(cls, key)], value, path)
        elif value is not None and (cls, key) in _NESTED_LISTS:
            if not isinstance(value, list):
                raise ScenarioError(f"{path}: expected a list")
            kwargs[key] = tuple(_build(_NESTED_LISTS[(cls, key)], v, f"{path}[{i}]") for i, v in enumerate(value))
        else:
            kwargs[key] = _freeze(value)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ScenarioError(f"{where or 'scenario'}: {exc}") from exc
    except ValueError as exc:
        raise ScenarioError(f"{where or 'scenario'}: {exc}") from exc


def scenario_from_mapping(mapping: Mapping[str, Any]) -> ScenarioConfig:
    """Validate a plain mapping and build the config tree."""

    data = dict(mapping)
    data.pop("base", None)
    return _build(ScenarioConfig, data, "")


def scenario_to_mapping(config: ScenarioConfig) -> dict[str, Any]:
    """Plain JSON-compatible mapping of ``config``."""

    def convert(value: Any) -> Any:
        if isinstance(value, tuple):
            return [convert(v) for v in value]
        if isinstance(value, dict):
            return {k: convert(v) for k, v in value.items()}
        return value

    return convert(dataclasses.asdict(config))


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Read a scenario file, applying its ``base`` preset when one is named.

    A relative mesh path is resolved against the file's directory.
    """

    from .presets import get_preset

    path = Path(path)
    data: Mapping[str, Any] = load_scenario_file(path)
    base = data.get("base")
    if base is not None:
        data = deep_merge(scenario_to_mapping(get_preset(str(base))), data)
    constraints = data.get("constraints")
    mesh = constraints.get("mesh") if isinstance(constraints, Mapping) else None
    if isinstance(mesh, Mapping) and mesh.get("path") and not Path(mesh["path"]).is_absolute():
        data = deep_merge(data, {"constraints": {"mesh": {"path": str(path.parent / mesh["path"])}}})
    return scenario_from_mapping(data)


# ---------- runtime objects ----------

BarrierSpec = Union[ConstantAuthority, VariableAuthority, Predictive]
NominalLaw = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ConstraintGroup:
    """Constraints evaluated together with one barrier construction."""

    bank: KeepOutBank
    spec: BarrierSpec


@dataclass
class Scenario:
    config: ScenarioConfig
    gravity: GravityModel
    control: ControlBounds
    bounds: DisturbanceBounds
    groups: list[ConstraintGroup]
    alpha: Alpha
    hysteresis: HysteresisParams
    nominal: NominalLaw
    disturbance: DisturbanceProcess
    a_max: Optional[float] = None
    mesh_spacing: Optional[float] = None

    @property
    def n_constraints(self) -> int:
        return sum(len(g.bank) for g in self.groups)

    @property
    def rho(self) -> np.ndarray:
        return np.concatenate([g.bank.rho for g in self.groups])


def _gravity(section: GravitySection) -> GravityModel:
    if section.model == "zero":
        return GravityModel.zero()
    if section.model == "point_mass":
        return GravityModel.point_mass(section.mu, section.center)
    raise ScenarioError(f"gravity.model must be 'point_mass' or 'zero', got {section.model!r}")


def _point_constraint(p: PointConstraint, w_x_max: float) -> KeepOutConstraint:
    center = FixedCenter(p.center) if p.omega is None else RotatingCenter(p.center, p.omega, p.t0)
    return KeepOutConstraint(float(p.rho), center, w_x_max)


def _banks(config: ScenarioConfig) -> tuple[list[KeepOutBank], Optional[float]]:
    w_x = config.disturbance.w_x_max
    banks: list[KeepOutBank] = []
    spacing = None
    # Points sharing a center motion form one bank.
    grouped: dict[tuple, list[KeepOutConstraint]] = {}
    for p in config.constraints.points:
        key = ("fixed",) if p.omega is None else ("rotating", tuple(p.omega), p.t0)
        grouped.setdefault(key, []).append(_point_constraint(p, w_x))
    banks.extend(KeepOutBank.from_constraints(items) for items in grouped.values())
    mesh = config.constraints.mesh
    if mesh is not None:
        if mesh.path:
            vertices = load_mesh(mesh.path)
        elif mesh.semi_axes is not None:
            vertices = generate_ellipsoid_mesh(mesh.semi_axes, mesh.n_points)
        else:
            raise ScenarioError("constraints.mesh needs either a path or semi_axes")
        spacing = report_spacing(vertices, mesh.rho)
        banks.append(bank_from_mesh(vertices, mesh.rho, mesh.omega, w_x, mesh.t0))
    return banks, spacing


def default_samples(config: ScenarioConfig, banks: list[KeepOutBank]) -> SampleSpec:
    """Shell from the smallest keep-out radius out to the start distance."""

    r_min = float(min(b.rho.min() for b in banks))
    if config.constraints.mesh is not None and config.constraints.mesh.semi_axes is not None:
        r_min = 0.55 * min(config.constraints.mesh.semi_axes)
    start = float(np.linalg.norm(np.asarray(config.x0[:3]) - np.asarray(config.gravity.center)))
    return SampleSpec(r_min=r_min, r_max=max(start, r_min))


def resolve_a_max(config: ScenarioConfig, banks: list[KeepOutBank], gravity, control, bounds) -> float:
    section = config.rcbf
    if section.a_max != "auto":
        try:
            return float(section.a_max)
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"rcbf.a_max must be a number or 'auto', got {section.a_max!r}") from exc
    spec = section.a_max_samples or default_samples(config, banks)
    samples = shell_samples(spec.r_min, spec.r_max, spec.n_radii, spec.n_directions, spec.times, config.gravity.center)
    values = [compute_a_max0(b, gravity, control, bounds, samples, method=section.a_max_method) for b in banks]
    if any(v is None for v in values):
        raise ScenarioError("no positive a_max exists over the sampled safe set; enlarge rho or the sample floor")
    a_max = min(values)
    logger.info("resolved a_max = %.6g m/s^2 over %d samples", a_max, len(samples))
    return a_max


def _nominal(config: ScenarioConfig) -> NominalLaw:
    nominal = config.nominal
    if nominal.law == "flyby":
        mu = config.gravity.mu
        return lambda t, x: nominal_flyby(t, x, mu, nominal.k_p, nominal.k_d)
    if nominal.law == "prox":
        target = np.asarray(nominal.target, dtype=float)
        return lambda t, x: nominal_prox(t, x, target, nominal.k_p, nominal.k_d)
    return lambda t, x: np.zeros(3)


def _groups(config: ScenarioConfig, banks, gravity, control, bounds) -> tuple[list[ConstraintGroup], Optional[float]]:
    section = config.rcbf
    if section.kind == "constant":
        a_max = resolve_a_max(config, banks, gravity, control, bounds)
        return [ConstraintGroup(b, ConstantAuthority(a_max)) for b in banks], a_max
    if section.kind == "predictive":
        spec = Predictive(
            maneuver=section.maneuver,
            horizon=section.horizon,
            ode_dt=section.ode_dt,
            refine_tol=section.refine_tol,
            ambiguity_tol=section.ambiguity_tol,
            method=section.method,
        )
        return [ConstraintGroup(b, spec) for b in banks], None
    # variable authority: one authority function per constraint radius
    groups: list[ConstraintGroup] = []
    a_max = None
    if section.phi == "linear":
        a_max = resolve_a_max(config, banks, gravity, control, bounds)
    for b in banks:
        for i in range(len(b)):
            c = b.constraint(i)
            if section.phi == "gravity":
                phi = gravity_phi(gravity.mu, c.rho, control.u_max, bounds.w_u_max)
            elif section.phi == "linear":
                phi = linear_phi(a_max)
            else:
                raise ScenarioError(f"rcbf.phi must be 'gravity' or 'linear', got {section.phi!r}")
            groups.append(ConstraintGroup(KeepOutBank.from_constraints([c]), phi))
    return groups, a_max


def build_scenario(config: ScenarioConfig) -> Scenario:
    """Construct constraint banks, barrier specs, alpha and the nominal law."""

    try:
        gravity = _gravity(config.gravity)
        control = ControlBounds(config.control.u_max)
        bounds = DisturbanceBounds(config.disturbance.w_u_max, config.disturbance.w_x_max)
        banks, spacing = _banks(config)
        groups, a_max = _groups(config, banks, gravity, control, bounds)
        hysteresis = HysteresisParams(config.hysteresis.eps1, config.hysteresis.eps2, config.hysteresis.mode)
        alpha = make_alpha(config.alpha.kind, eps1=config.hysteresis.eps1, gain=config.alpha.gain)
    except ScenarioError:
        raise
    except (RcbfSimError, ValueError) as exc:
        raise ScenarioError(f"{config.name}: {exc}") from exc
    return Scenario(
        config=config,
        gravity=gravity,
        control=control,
        bounds=bounds,
        groups=groups,
        alpha=alpha,
        hysteresis=hysteresis,
        nominal=_nominal(config),
        disturbance=DisturbanceProcess(bounds, config.disturbance.mode, config.seed),
        a_max=a_max,
        mesh_spacing=spacing,
    )


def with_overrides(config: ScenarioConfig, **changes: Any) -> ScenarioConfig:
    """Copy of ``config`` with top-level fields replaced; ``None`` values are ignored."""

    changes = {k: v for k, v in changes.items() if v is not None}
    return dataclasses.replace(config, **changes) if changes else config
