"""Self-checks with known answers, shared by the ``oracle`` CLI subcommand and the tests.

* ``double-integrator``: the predictive barrier under full braking equals the
  closed-form braking-distance barrier.
* ``sensitivity``: the sensitivities integrated with the trajectory match
  central finite differences on a thrusting two-body problem.
* ``band``: under the alpha_r rate, a filter held at equality settles at
  ``0``, ``-eps1`` or ``-2 eps1`` for worst-case, zero or helpful disturbance.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .constraints import FixedCenter, KeepOutConstraint
from .dynamics import ControlBounds, DisturbanceBounds, GravityModel, gravity_accel, gravity_jacobian, rk4
from .predictive import Predictive, eval_predictive, propagate
from .qpfilter import QpProblem, solve
from .rcbf import piecewise_constant_authority_H
from .switching import HysteresisBank, HysteresisParams, alpha_r, make_alpha

logger = logging.getLogger(__name__)

ORACLES = ("double-integrator", "sensitivity", "band")


@dataclass(frozen=True)
class OracleResult:
    name: str
    max_error: float
    tolerance: float
    elapsed_s: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance


def double_integrator_oracle(
    n: int = 21,
    u_max: float = 1.0,
    p_range: tuple[float, float] = (-20.0, 0.0),
    v_range: tuple[float, float] = (-5.0, 5.0),
    rho: float = 100.0,
    horizon: float = 12.0,
    ode_dt: float = 0.5,
    tolerance: float = 1e-6,
) -> OracleResult:
    """Compare the predictive barrier with ``p + max(v, 0)**2 / (2 u_max)`` on a grid.

    The 1-D system ``p'' = u`` with constraint ``p <= 0`` is embedded as a
    keep-out sphere of radius ``rho`` at the origin, approached along x.
    """

    started = time.perf_counter()
    constraint = KeepOutConstraint(rho, FixedCenter(np.zeros(3)))
    spec = Predictive("rad", horizon=horizon, ode_dt=ode_dt, refine_tol=1e-5)
    control = ControlBounds(u_max)
    bounds = DisturbanceBounds()
    alpha = make_alpha("linear", gain=1.0)
    gravity = GravityModel.zero()
    worst = (0.0, 0.0, 0.0)
    for p in np.linspace(*p_range, n):
        for v in np.linspace(*v_range, n):
            x = np.array([rho - p, 0.0, 0.0, -v, 0.0, 0.0])
            predicted = eval_predictive(constraint, spec, 0.0, x, gravity, control, bounds, alpha).H
            expected = float(piecewise_constant_authority_H(p, v, u_max))
            err = abs(predicted - expected)
            if err > worst[0]:
                worst = (err, float(p), float(v))
    elapsed = time.perf_counter() - started
    logger.info("double-integrator oracle: max |dH| = %.3g over %d states", worst[0], n * n)
    return OracleResult(
        "double-integrator", worst[0], tolerance, elapsed, {"worst_p": worst[1], "worst_v": worst[2], "states": n * n}
    )


@dataclass(frozen=True)
class ThrustingTwoBody:
    """Point-mass gravity plus a slowly rotating in-plane thrust ``a [cos wt, sin wt, 0]``."""

    mu: float
    thrust: float
    rate: float

    def _thrust(self, t: float) -> np.ndarray:
        return self.thrust * np.array([math.cos(self.rate * t), math.sin(self.rate * t), 0.0])

    def field(self, t: float, y: np.ndarray) -> np.ndarray:
        return np.concatenate((y[3:6], gravity_accel(GravityModel.point_mass(self.mu), t, y[:3]) + self._thrust(t)))

    def jacobian_y(self, t: float, y: np.ndarray) -> np.ndarray:
        jac = np.zeros((6, 6))
        jac[:3, 3:] = np.eye(3)
        jac[3:, :3] = gravity_jacobian(GravityModel.point_mass(self.mu), t, y[:3])
        return jac

    def jacobian_t(self, t: float, y: np.ndarray) -> np.ndarray:
        w = self.rate
        return np.concatenate((np.zeros(3), self.thrust * w * np.array([-math.sin(w * t), math.cos(w * t), 0.0])))

    def constraint(self, t: float, y: np.ndarray) -> tuple[float, float, np.ndarray]:
        dist = float(np.linalg.norm(y[:3]))
        return -dist, 0.0, np.concatenate((-y[:3] / dist, np.zeros(3)))


def _flow(model: ThrustingTwoBody, t0: float, x0: np.ndarray, horizon: float, ode_dt: float) -> np.ndarray:
    y = np.asarray(x0, dtype=float)
    n_steps = max(1, math.ceil(horizon / ode_dt - 1e-9))
    beta = 0.0
    for _ in range(n_steps):
        step = min(ode_dt, horizon - beta)
        y = rk4(lambda b, z: model.field(t0 + b, z), beta, y, step)
        beta += step
    return y


def sensitivity_oracle(
    mu: float = 6.26325e10,
    radius: float = 1.0e6,
    steps_per_quarter: int = 500,
    tolerance: float = 1e-4,
) -> OracleResult:
    """Relative error of the propagated sensitivities at a quarter orbit.

    Entries are compared as ``|a - b| / max(|b|, 1e-6 * max|column|)`` so that
    structurally tiny entries do not dominate.
    """

    started = time.perf_counter()
    speed = math.sqrt(mu / radius)
    period = 2.0 * math.pi * math.sqrt(radius**3 / mu)
    model = ThrustingTwoBody(mu, thrust=1e-3, rate=6.0 * math.pi / period)
    t0 = 1000.0
    x0 = np.array([radius, 0.0, 0.02 * radius, 0.0, speed, 0.05 * speed])
    horizon = period / 4.0
    ode_dt = horizon / steps_per_quarter

    pr = propagate(model, t0, x0, horizon, ode_dt, method="rk4")
    theta, Theta = pr.theta[-1], pr.Theta[-1]

    steps = np.array([1.0, 1.0, 1.0, 1e-3, 1e-3, 1e-3])
    fd_Theta = np.empty((6, 6))
    for j in range(6):
        dx = np.zeros(6)
        dx[j] = steps[j]
        fd_Theta[:, j] = (_flow(model, t0, x0 + dx, horizon, ode_dt) - _flow(model, t0, x0 - dx, horizon, ode_dt)) / (
            2.0 * steps[j]
        )
    dt0 = 1.0
    fd_theta = (_flow(model, t0 + dt0, x0, horizon, ode_dt) - _flow(model, t0 - dt0, x0, horizon, ode_dt)) / (2.0 * dt0)

    def relative(a: np.ndarray, b: np.ndarray) -> float:
        a, b = np.atleast_2d(a.T).T, np.atleast_2d(b.T).T
        floor = 1e-6 * np.abs(b).max(axis=0, keepdims=True)
        return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), floor)))

    err_Theta = relative(Theta, fd_Theta)
    err_theta = relative(theta, fd_theta)
    elapsed = time.perf_counter() - started
    logger.info("sensitivity oracle: Theta %.3g, theta %.3g", err_Theta, err_theta)
    return OracleResult(
        "sensitivity", max(err_Theta, err_theta), tolerance, elapsed, {"Theta": err_Theta, "theta": err_theta}
    )


BAND_TARGETS = {"worst": 0.0, "zero": -1.0, "helpful": -2.0}


def disturbance_band(
    mode: str,
    eps1: float = 1.0,
    eps2: float = 3.0,
    w_max: float = 0.2,
    u_max: float = 5.0,
    dt: float = 0.01,
    duration: float = 100.0,
    h0: float = -0.5,
) -> tuple[float, int]:
    """Steady barrier value and deactivation count for ``r' = u + w`` with ``H = r_x``.

    The nominal control pushes toward the boundary, so the filter runs at
    equality once the constraint activates. The steady value is the mean over
    the last tenth of the run.
    """

    if mode not in BAND_TARGETS:
        raise ValueError(f"mode must be one of {tuple(BAND_TARGETS)}")
    row = np.array([1.0, 0.0, 0.0])
    sign = {"worst": 1.0, "zero": 0.0, "helpful": -1.0}[mode]
    w = sign * w_max * row
    u_nom = u_max * 0.2 * row
    box = ControlBounds(u_max)
    bank = HysteresisBank(1, HysteresisParams(eps1, eps2))
    r = np.array([h0, 0.0, 0.0])
    steps = int(round(duration / dt))
    tail = []
    for k in range(steps):
        H = float(r[0])
        bank.update(np.array([H]))
        halfspaces = []
        if bank.sigma[0] == 1:
            # Hdot = row . (u + w) <= alpha_r(-H) - W
            halfspaces.append((row, float(alpha_r(-H, w_max, eps1)) - w_max))
        u = solve(QpProblem(u_nom, box, halfspaces)).u
        r = rk4(lambda t, y: u + w, k * dt, r, dt)
        if k >= steps - steps // 10:
            tail.append(r[0])
    return float(np.mean(tail)), bank.switches_off


def band_oracle(eps1: float = 1.0, tolerance: float = 0.05) -> OracleResult:
    """Largest deviation from the expected band, in units of ``eps1``."""

    started = time.perf_counter()
    details = {}
    worst = 0.0
    for mode, target in BAND_TARGETS.items():
        steady, switches_off = disturbance_band(mode, eps1=eps1, eps2=3.0 * eps1)
        details[mode] = {"steady_H": steady, "expected": target * eps1, "switches_off": switches_off}
        worst = max(worst, abs(steady - target * eps1) / eps1)
    return OracleResult("band", worst, tolerance, time.perf_counter() - started, details)


def run_oracle(name: str) -> OracleResult:
    if name == "double-integrator":
        return double_integrator_oracle()
    if name == "sensitivity":
        return sensitivity_oracle()
    if name == "band":
        return band_oracle()
    raise ValueError(f"unknown oracle {name!r}; choose from {', '.join(ORACLES)}")
