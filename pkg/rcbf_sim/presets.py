"""Built-in mission scenarios: a low-thrust Ceres flyby and Eros proximity operations."""

from __future__ import annotations

import dataclasses
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .errors import ScenarioError
from .mesh import ellipsoid_mu, estimate_semi_axes, load_mesh
from .scenario import (
    AlphaSection,
    ConstraintSection,
    ControlSection,
    DisturbanceSection,
    GravitySection,
    HysteresisSection,
    MeshSource,
    NominalSection,
    PointConstraint,
    RcbfSection,
    SampleSpec,
    SafetySection,
    ScenarioConfig,
)

DAY = 86400.0
HOUR = 3600.0

# Ceres flyby
CERES_MU = 6.26325e10
CERES_U_MAX = 1e-4
CERES_W_U_MAX = 5e-6
CERES_W_X_MAX = 2e-6
CERES_RHO = {1: 3.63e7, 2: 3.21e7, 3: 2.50e7, 4: 4.76e5}
CERES_X0 = (-6e7, -1e6, 0.0, 20.0, -2.0, 0.0)
CERES_EPS1 = 5e4
CERES_EPS2 = 1.5e5
CERES_LINEAR_ALPHA_GAIN = 3.42e-5
CERES_PREDICTIVE = {
    3: {"maneuver": "rad", "horizon": 2.0e6, "ode_dt": 2000.0},
    4: {"maneuver": "prograde", "horizon": 6.0e6, "ode_dt": 5000.0},
}

# Eros proximity operations
EROS_OMEGA = (3.101e-4, 6.232e-5, 9.810e-5)
EROS_SEMI_AXES = (16000.0, 8000.0, 8000.0)
EROS_U_MAX = 0.1
EROS_W_U_MAX = 0.005
EROS_W_X_MAX = 0.001
EROS_RHO = 500.0
EROS_EPS1 = 100.0
EROS_EPS2 = 300.0
EROS_TARGET = (2e4, 0.0, 0.0)
EROS_X0 = (-2e4, -4e3, 0.0, 1.0, 1.0, 0.0)
EROS_KP = 3e-5
EROS_KD = 0.03
EROS_MESH_POINTS = 500
EROS_FINE_MESH_POINTS = 2000
# Interior floor of the a_max sample shell, as a fraction of the smallest semi-axis.
EROS_SAMPLE_FLOOR = 0.55


def mission_a_preset(
    variant: int,
    duration_days: float = 10.0,
    dt: float = 60.0,
    seed: int = 0,
    disturbance: str = "random",
    switching: str = "hysteresis",
    alpha: str = "alpha_r",
) -> ScenarioConfig:
    """Ceres flyby with barrier variant 1 (constant), 2 (variable), 3 (rad) or 4 (prograde)."""

    if variant not in CERES_RHO:
        raise ScenarioError(f"mission A has variants 1-4, got {variant!r}")
    rho = CERES_RHO[variant]
    if variant == 1:
        rcbf = RcbfSection(
            kind="constant",
            a_max_samples=SampleSpec(r_min=rho, r_max=float(np.linalg.norm(CERES_X0[:3])), n_radii=16, n_directions=64),
        )
    elif variant == 2:
        rcbf = RcbfSection(kind="variable", phi="gravity")
    else:
        rcbf = RcbfSection(kind="predictive", method="adaptive", **CERES_PREDICTIVE[variant])
    return ScenarioConfig(
        name=f"mission-a-{variant}",
        seed=seed,
        duration=duration_days * DAY,
        dt=dt,
        x0=CERES_X0,
        gravity=GravitySection(model="point_mass", mu=CERES_MU),
        control=ControlSection(u_max=CERES_U_MAX),
        disturbance=DisturbanceSection(
            w_u_max=CERES_W_U_MAX,
            w_x_max=CERES_W_X_MAX if variant in (1, 2) else 0.0,
            mode=disturbance,
        ),
        constraints=ConstraintSection(points=(PointConstraint(rho=rho),)),
        rcbf=rcbf,
        hysteresis=HysteresisSection(eps1=CERES_EPS1, eps2=CERES_EPS2, mode=switching),
        alpha=AlphaSection(kind=alpha, gain=CERES_LINEAR_ALPHA_GAIN),
        nominal=NominalSection(law="flyby", k_p=1.2e-11, k_d=6e-5),
        safety=SafetySection(mode="flag"),
    )


def mission_b_preset(
    mesh_path: Optional[str] = None,
    n_points: int = EROS_MESH_POINTS,
    semi_axes: Sequence[float] = EROS_SEMI_AXES,
    duration_hours: float = 2.0,
    dt: float = 0.5,
    seed: int = 0,
    disturbance: str = "random",
) -> ScenarioConfig:
    """Eros proximity operations around a mesh of rotating keep-out centers.

    Gravity is a point mass with the mass of a uniform ellipsoid; for a mesh
    file the ellipsoid is the vertices' bounding box.
    """

    if mesh_path is not None:
        axes = tuple(float(a) for a in estimate_semi_axes(load_mesh(mesh_path)))
        mesh = MeshSource(rho=EROS_RHO, omega=EROS_OMEGA, path=str(mesh_path))
    else:
        axes = tuple(float(a) for a in semi_axes)
        mesh = MeshSource(rho=EROS_RHO, omega=EROS_OMEGA, n_points=n_points, semi_axes=axes)
    period = 2.0 * np.pi / float(np.linalg.norm(EROS_OMEGA))
    samples = SampleSpec(
        r_min=EROS_SAMPLE_FLOOR * min(axes),
        r_max=1.5 * max(axes),
        n_radii=6,
        n_directions=400,
        times=tuple(float(t) for t in np.linspace(0.0, period, 4, endpoint=False)),
    )
    return ScenarioConfig(
        name="mission-b",
        seed=seed,
        duration=duration_hours * HOUR,
        dt=dt,
        x0=EROS_X0,
        gravity=GravitySection(model="point_mass", mu=ellipsoid_mu(axes)),
        control=ControlSection(u_max=EROS_U_MAX),
        disturbance=DisturbanceSection(w_u_max=EROS_W_U_MAX, w_x_max=EROS_W_X_MAX, mode=disturbance),
        constraints=ConstraintSection(mesh=mesh),
        rcbf=RcbfSection(kind="constant", a_max_samples=samples),
        hysteresis=HysteresisSection(eps1=EROS_EPS1, eps2=EROS_EPS2),
        alpha=AlphaSection(kind="alpha_r"),
        nominal=NominalSection(law="prox", k_p=EROS_KP, k_d=EROS_KD, target=EROS_TARGET),
        safety=SafetySection(mode="flag"),
    )


PRESETS: dict[str, Callable[..., ScenarioConfig]] = {
    "mission-a-1": lambda **kw: mission_a_preset(1, **kw),
    "mission-a-2": lambda **kw: mission_a_preset(2, **kw),
    "mission-a-3": lambda **kw: mission_a_preset(3, **kw),
    "mission-a-4": lambda **kw: mission_a_preset(4, **kw),
    "mission-a-1-always": lambda **kw: mission_a_preset(1, switching="always", **kw),
    "mission-a-1-linear": lambda **kw: mission_a_preset(1, switching="always", alpha="linear", **kw),
    "mission-b": mission_b_preset,
    "mission-b-fine": lambda **kw: mission_b_preset(n_points=EROS_FINE_MESH_POINTS, **kw),
}


def get_preset(name: str, **options: Any) -> ScenarioConfig:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ScenarioError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}") from None
    return factory(**options)


RCBF_VARIANTS = ("constant", "variable", "predictive-rad", "predictive-orth", "predictive-prograde", "predictive-opt")


def with_rcbf_variant(config: ScenarioConfig, variant: str) -> ScenarioConfig:
    """Swap the barrier construction, keeping every other setting.

    Predictive variants reuse the configured horizon when one is set and clear
    the unmatched disturbance bound, which they do not support.
    """

    if variant not in RCBF_VARIANTS:
        raise ScenarioError(f"unknown rcbf variant {variant!r}; choose from {', '.join(RCBF_VARIANTS)}")
    rcbf = config.rcbf
    disturbance = config.disturbance
    if variant == "constant":
        rcbf = dataclasses.replace(rcbf, kind="constant")
    elif variant == "variable":
        rcbf = dataclasses.replace(rcbf, kind="variable")
    else:
        maneuver = variant.split("-", 1)[1]
        defaults = CERES_PREDICTIVE[4 if maneuver in ("orth", "prograde") else 3]
        rcbf = dataclasses.replace(
            rcbf,
            kind="predictive",
            maneuver=maneuver,
            horizon=rcbf.horizon or defaults["horizon"],
            ode_dt=rcbf.ode_dt or defaults["ode_dt"],
            method="adaptive" if rcbf.kind != "predictive" else rcbf.method,
        )
        disturbance = dataclasses.replace(disturbance, w_x_max=0.0)
    return dataclasses.replace(config, rcbf=rcbf, disturbance=disturbance)

# Published a_max values, reported next to the computed ones.
REFERENCE_A_MAX = {"mission-a-1": 4.55e-5, "mission-b": 0.0523}
