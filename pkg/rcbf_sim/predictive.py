"""Predictive barrier: the largest future constraint value along an evading maneuver.

``H(t, x) = max_{beta >= 0} h(t + beta, chi(beta))`` where ``chi`` follows the
closed loop under a fixed evading maneuver ``u*``. The gradient of ``H``
comes from the sensitivities of ``chi`` with respect to the initial time
(``theta``) and the initial state (``Theta``), integrated jointly with the
trajectory:

    y'     = Y(t0 + beta, y)
    theta' = dY/dt + dY/dy theta
    Theta' = dY/dy Theta

with ``y(0) = x0``, ``theta(0) = 0`` and ``Theta(0) = I``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from .constraints import SINGULAR_RADIUS, KeepOutBank, KeepOutConstraint, center_state
from .dynamics import ControlBounds, DisturbanceBounds, GravityModel, gravity_accel, gravity_jacobian, rk4
from .errors import (
    AmbiguousMaximizerError,
    ManeuverSingularityError,
    NoMaximizerError,
    PreconditionError,
    PropagationError,
)
from .rcbf import SPACECRAFT_E, SPACECRAFT_G, Alpha, BankEvaluation, RcbfEvaluation, disturbance_margin_W

logger = logging.getLogger(__name__)

MANEUVERS = ("opt", "rad", "orth", "prograde")
METHODS = ("rk4", "adaptive")
ORTH_SINGULAR_TOL = 1e-6


@dataclass(frozen=True)
class Predictive:
    """Predictive barrier settings.

    ``method="rk4"`` integrates at the fixed step ``ode_dt``; ``"adaptive"``
    uses DOP853 with dense output and samples it every ``ode_dt``.
    """

    maneuver: str
    horizon: float
    ode_dt: float
    refine_tol: float = 1e-3
    ambiguity_tol: float = 1e-3
    method: str = "rk4"
    rtol: float = 1e-9
    atol: float = 1e-6

    def __post_init__(self) -> None:
        if self.maneuver not in MANEUVERS:
            raise ValueError(f"unknown maneuver {self.maneuver!r}; expected one of {MANEUVERS}")
        if self.method not in METHODS:
            raise ValueError(f"unknown propagation method {self.method!r}")
        if not (self.horizon > 0 and self.ode_dt > 0 and self.refine_tol > 0):
            raise ValueError("horizon, ode_dt and refine_tol must be positive")
        if self.ambiguity_tol < 0:
            raise ValueError("ambiguity_tol must be nonnegative")


def margin_semi_axis(control: ControlBounds, bounds: DisturbanceBounds) -> float:
    """Per-axis limit of the shrunken box that leaves room for ``w_u``."""

    u_bar = control.u_max - bounds.w_u_max
    if not u_bar > 0:
        raise PreconditionError("w_u_max leaves no control authority for the evading maneuver")
    return u_bar


def u_star(
    maneuver: str,
    t: float,
    x: np.ndarray,
    c: KeepOutConstraint,
    control: ControlBounds,
    bounds: DisturbanceBounds,
) -> np.ndarray:
    """Evading maneuver in the shrunken box.

    rad       thrust away from the center on every axis (argmax of (r - r_c) . u)
    opt       argmin of the control row of the second derivative, (-unit(r - r_c)) . u
    orth      argmin of v_orth . u, braking the tangential relative velocity
    prograde  thrust along the tangential relative velocity, raising angular momentum
    """

    u_bar = margin_semi_axis(control, bounds)
    x = np.asarray(x, dtype=float)
    r_c, v_c, _ = center_state(c.center, t)
    d = x[:3] - r_c
    if maneuver == "rad":
        return u_bar * np.sign(d)
    dist = float(np.linalg.norm(d))
    if dist < SINGULAR_RADIUS:
        raise ManeuverSingularityError("maneuver evaluated at the keep-out center")
    e = d / dist
    if maneuver == "opt":
        return -u_bar * np.sign(-e)
    if maneuver in ("orth", "prograde"):
        dv = x[3:6] - v_c
        v_orth = dv - (dv @ e) * e
        if np.linalg.norm(v_orth) < ORTH_SINGULAR_TOL:
            raise ManeuverSingularityError(f"tangential relative speed vanished at t={t}")
        sign = -1.0 if maneuver == "orth" else 1.0
        return sign * u_bar * np.sign(v_orth)
    raise ValueError(f"unknown maneuver {maneuver!r}")


class PropagationModel(Protocol):
    """Closed-loop system under an evading maneuver plus the constraint it guards."""

    def field(self, t: float, y: np.ndarray) -> np.ndarray: ...

    def jacobian_y(self, t: float, y: np.ndarray) -> np.ndarray: ...

    def jacobian_t(self, t: float, y: np.ndarray) -> np.ndarray: ...

    def constraint(self, t: float, y: np.ndarray) -> tuple[float, float, np.ndarray]:
        """Return ``h``, its explicit time partial and its state gradient."""
        ...


@dataclass(frozen=True)
class SpacecraftFlow:
    """Spacecraft under a sign-type evading maneuver.

    The maneuvers are piecewise constant, so their Jacobians vanish almost
    everywhere and only gravity contributes to ``dY/dy``. Gravity is centered
    on a fixed point, so ``dY/dt`` is zero.
    """

    constraint_: KeepOutConstraint
    maneuver: str
    gravity: GravityModel
    control: ControlBounds
    bounds: DisturbanceBounds

    def field(self, t: float, y: np.ndarray) -> np.ndarray:
        u = u_star(self.maneuver, t, y, self.constraint_, self.control, self.bounds)
        return np.concatenate((y[3:6], gravity_accel(self.gravity, t, y[:3]) + u))

    def jacobian_y(self, t: float, y: np.ndarray) -> np.ndarray:
        jac = np.zeros((6, 6))
        jac[:3, 3:] = np.eye(3)
        jac[3:, :3] = gravity_jacobian(self.gravity, t, y[:3])
        return jac

    def jacobian_t(self, t: float, y: np.ndarray) -> np.ndarray:
        return np.zeros(6)

    def constraint(self, t: float, y: np.ndarray) -> tuple[float, float, np.ndarray]:
        r_c, v_c, _ = center_state(self.constraint_.center, t)
        d = y[:3] - r_c
        dist = float(np.linalg.norm(d))
        if dist < SINGULAR_RADIUS:
            raise PropagationError("evading trajectory reached the keep-out center")
        e = d / dist
        return self.constraint_.rho - dist, float(e @ v_c), np.concatenate((-e, np.zeros(3)))


@dataclass(frozen=True)
class PropagationResult:
    """Samples of the evading trajectory and its sensitivities on the ``betas`` grid.

    ``beta_c`` and ``H`` hold the best sample; :func:`find_maximizer` refines
    them between samples through ``state_at``.
    """

    t0: float
    betas: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    Theta: np.ndarray
    h: np.ndarray
    dh_dbeta: np.ndarray
    beta_c: float
    H: float
    model: PropagationModel
    state_at: Callable[[float], np.ndarray]

    @property
    def n(self) -> int:
        return self.y.shape[1]

    def split(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = self.n
        return z[:n], z[n : 2 * n], z[2 * n :].reshape(n, n)

    def h_at(self, beta: float) -> float:
        y, _, _ = self.split(self.state_at(beta))
        return self.model.constraint(self.t0 + beta, y)[0]


def _beta_grid(horizon: float, ode_dt: float) -> np.ndarray:
    n_steps = max(1, math.ceil(horizon / ode_dt - 1e-9))
    return np.minimum(np.arange(n_steps + 1) * ode_dt, horizon)


def propagate(
    model: PropagationModel,
    t0: float,
    x0: np.ndarray,
    horizon: float,
    ode_dt: float,
    method: str = "rk4",
    rtol: float = 1e-9,
    atol: float = 1e-6,
) -> PropagationResult:
    """Integrate the trajectory and its sensitivities over ``[0, horizon]``."""

    x0 = np.asarray(x0, dtype=float)
    n = len(x0)
    z0 = np.concatenate((x0, np.zeros(n), np.eye(n).ravel()))

    def joint_field(beta: float, z: np.ndarray) -> np.ndarray:
        t = t0 + beta
        y = z[:n]
        theta = z[n : 2 * n]
        Theta = z[2 * n :].reshape(n, n)
        A = model.jacobian_y(t, y)
        return np.concatenate((model.field(t, y), model.jacobian_t(t, y) + A @ theta, (A @ Theta).ravel()))

    betas = _beta_grid(horizon, ode_dt)
    if method == "rk4":
        zs = np.empty((len(betas), len(z0)))
        zs[0] = z0
        for k in range(len(betas) - 1):
            zs[k + 1] = rk4(joint_field, betas[k], zs[k], betas[k + 1] - betas[k])

        def state_at(beta: float) -> np.ndarray:
            k = int(np.clip(np.searchsorted(betas, beta, side="right") - 1, 0, len(betas) - 1))
            step = beta - betas[k]
            return zs[k] if step <= 0 else rk4(joint_field, betas[k], zs[k], step)

    elif method == "adaptive":
        sol = solve_ivp(joint_field, (0.0, float(betas[-1])), z0, method="DOP853", dense_output=True, rtol=rtol, atol=atol)
        if not sol.success:
            raise PropagationError(f"adaptive propagation failed: {sol.message}")
        zs = sol.sol(betas).T
        zs[0] = z0

        def state_at(beta: float) -> np.ndarray:
            return sol.sol(beta)

    else:
        raise ValueError(f"unknown propagation method {method!r}")

    h = np.empty(len(betas))
    dh = np.empty(len(betas))
    for k, beta in enumerate(betas):
        y = zs[k, :n]
        hk, dh_dt, dh_dy = model.constraint(t0 + beta, y)
        h[k] = hk
        dh[k] = dh_dt + dh_dy @ model.field(t0 + beta, y)
    best = int(np.argmax(h))
    return PropagationResult(
        t0=float(t0),
        betas=betas,
        y=zs[:, :n],
        theta=zs[:, n : 2 * n],
        Theta=zs[:, 2 * n :].reshape(len(betas), n, n),
        h=h,
        dh_dbeta=dh,
        beta_c=float(betas[best]),
        H=float(h[best]),
        model=model,
        state_at=state_at,
    )


def propagate_chi(
    t0: float,
    x0: np.ndarray,
    maneuver: str,
    c: KeepOutConstraint,
    gravity: GravityModel,
    control: ControlBounds,
    bounds: DisturbanceBounds,
    horizon: float,
    ode_dt: float,
    method: str = "rk4",
) -> PropagationResult:
    """Propagate the spacecraft under ``maneuver`` for the keep-out constraint ``c``."""

    flow = SpacecraftFlow(c, maneuver, gravity, control, bounds)
    return propagate(flow, t0, x0, horizon, ode_dt, method)


def _refine(pr: PropagationResult, lo: float, hi: float, refine_tol: float) -> tuple[float, float]:
    res = minimize_scalar(lambda b: -pr.h_at(b), bounds=(lo, hi), method="bounded", options={"xatol": refine_tol})
    return float(res.x), float(-res.fun)


def find_maximizer(pr: PropagationResult, refine_tol: float, ambiguity_tol: float = 1e-3) -> float:
    """Time of the global maximum of ``h`` along the trajectory.

    Local maxima are bracketed where the sampled ``dh/dbeta`` changes sign
    from positive to nonpositive, then refined with bounded Brent search.
    Returns 0 when the start of the trajectory is the global maximum.
    """

    h, d, betas = pr.h, pr.dh_dbeta, pr.betas
    last = len(betas) - 1
    if int(np.argmax(h)) == last and d[last] > 0:
        raise NoMaximizerError(f"h still increasing at the horizon ({betas[last]:.6g} s)")

    peaks: list[tuple[float, float]] = []
    for k in np.flatnonzero((d[:-1] > 0) & (d[1:] <= 0)):
        peaks.append(_refine(pr, float(betas[k]), float(betas[k + 1]), refine_tol))
    if not peaks and int(np.argmax(h)) != 0:
        k = int(np.argmax(h))
        peaks.append(_refine(pr, float(betas[k - 1]), float(betas[min(k + 1, last)]), refine_tol))

    best = max([h[0]] + [value for _, value in peaks])
    contenders = [(beta, value) for beta, value in peaks if value >= best - ambiguity_tol and beta > 0]
    if len(contenders) > 1:
        raise AmbiguousMaximizerError(
            f"{len(contenders)} maximizers within {ambiguity_tol:g} of max h = {best:.6g}: "
            + ", ".join(f"{beta:.6g}" for beta, _ in contenders)
        )
    if contenders:
        return contenders[0][0]
    return 0.0


def suggest_horizon(hdot: float, a_max: float, factor: float = 3.0, floor: float = 0.0) -> float:
    """``factor`` times the braking time ``hdot / a_max``, never below ``floor``."""

    return max(floor, factor * max(hdot, 0.0) / a_max)


def eval_predictive(
    c: KeepOutConstraint,
    spec: Predictive,
    t: float,
    x: np.ndarray,
    gravity: GravityModel,
    control: ControlBounds,
    bounds: DisturbanceBounds,
    alpha: Alpha,
) -> RcbfEvaluation:
    if bounds.w_x_max != 0 or c.w_x_max != 0:
        raise PreconditionError("the predictive barrier requires w_x_max = 0")
    x = np.asarray(x, dtype=float)
    flow = SpacecraftFlow(c, spec.maneuver, gravity, control, bounds)
    pr = propagate(flow, t, x, spec.horizon, spec.ode_dt, spec.method, spec.rtol, spec.atol)
    beta_c = find_maximizer(pr, spec.refine_tol, spec.ambiguity_tol)

    h0, dh_dt0, dh_dx0 = flow.constraint(t, x)
    if beta_c == 0.0:
        H, dH_dt, grad_H = h0, dh_dt0, dh_dx0
    else:
        y, theta, Theta = pr.split(pr.state_at(beta_c))
        H, dh_dt, dh_dy = flow.constraint(t + beta_c, y)
        grad_H = dh_dy @ Theta
        dH_dt = dh_dt + dh_dy @ theta

    row = grad_H @ SPACECRAFT_G
    W = disturbance_margin_W(grad_H, SPACECRAFT_G, bounds, SPACECRAFT_E)
    f = np.concatenate((x[3:6], gravity_accel(gravity, t, x[:3])))
    bound = float(alpha(np.array([-H]), np.array([W]))[0]) - W - dH_dt - grad_H @ f
    logger.debug("predictive %s: beta_c=%.6g H=%.6g", spec.maneuver, beta_c, H)
    return RcbfEvaluation(
        H=float(H),
        dH_dt=float(dH_dt),
        grad_H=grad_H,
        W=float(W),
        constraint_row=row,
        constraint_bound=float(bound),
        h=float(h0),
        control_independent=beta_c == 0.0,
        beta_c=float(beta_c),
    )


def predictive_bank(
    bank: KeepOutBank,
    spec: Predictive,
    t: float,
    x: np.ndarray,
    gravity: GravityModel,
    control: ControlBounds,
    bounds: DisturbanceBounds,
    alpha: Alpha,
) -> BankEvaluation:
    items = [eval_predictive(bank.constraint(i), spec, t, x, gravity, control, bounds, alpha) for i in range(len(bank))]
    return BankEvaluation.from_items(items)
