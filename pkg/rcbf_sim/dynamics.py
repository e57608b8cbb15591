"""Control-affine spacecraft model, bounded disturbances and the RK4 integrator.

The state is ``x = [r, v]`` with

    r' = v + w_x
    v' = f_mu(t, r) + u + w_u

where ``u`` lies in the infinity-norm box of :class:`ControlBounds` and the
disturbances are bounded in Euclidean norm by :class:`DisturbanceBounds`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import GravitySingularityError, IntegrationError

logger = logging.getLogger(__name__)

GRAVITY_SINGULAR_RADIUS = 1e-9

DISTURBANCE_MODES = ("zero", "random", "worst", "helpful")

VectorField = Callable[[float, np.ndarray], np.ndarray]


def _vec3(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class SimState:
    """Time plus spacecraft position and velocity."""

    t: float
    r: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "r", _vec3(self.r, "r"))
        object.__setattr__(self, "v", _vec3(self.v, "v"))
        if not (np.isfinite(self.t) and np.all(np.isfinite(self.r)) and np.all(np.isfinite(self.v))):
            raise ValueError("SimState components must be finite")

    @property
    def x(self) -> np.ndarray:
        return np.concatenate((self.r, self.v))

    @classmethod
    def from_vector(cls, t: float, x: np.ndarray) -> "SimState":
        x = np.asarray(x, dtype=float)
        return cls(t, x[:3], x[3:6])


@dataclass(frozen=True)
class ControlBounds:
    """Per-axis thrust acceleration limit (infinity-norm box)."""

    u_max: float

    def __post_init__(self) -> None:
        if not self.u_max > 0:
            raise ValueError(f"u_max must be positive, got {self.u_max}")

    def clip(self, u: np.ndarray) -> np.ndarray:
        return np.clip(u, -self.u_max, self.u_max)


@dataclass(frozen=True)
class DisturbanceBounds:
    """Norm bounds on the matched (w_u) and unmatched (w_x) disturbances."""

    w_u_max: float = 0.0
    w_x_max: float = 0.0

    def __post_init__(self) -> None:
        if self.w_u_max < 0 or self.w_x_max < 0:
            raise ValueError("disturbance bounds must be nonnegative")


@dataclass(frozen=True)
class GravityModel:
    """Point-mass gravity about ``center`` or no gravity at all."""

    kind: str = "zero"
    mu: float = 0.0
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        if self.kind not in {"zero", "point_mass"}:
            raise ValueError(f"unknown gravity model {self.kind!r}")
        if self.kind == "point_mass" and not self.mu > 0:
            raise ValueError("point-mass gravity requires mu > 0")
        object.__setattr__(self, "center", _vec3(self.center, "center"))

    @classmethod
    def point_mass(cls, mu: float, center=(0.0, 0.0, 0.0)) -> "GravityModel":
        return cls("point_mass", float(mu), np.asarray(center, dtype=float))

    @classmethod
    def zero(cls) -> "GravityModel":
        return cls("zero")


def gravity_accel(model: GravityModel, t: float, r: np.ndarray, center: np.ndarray | None = None) -> np.ndarray:
    """Gravitational acceleration at ``r``.

    ``r`` may be a single position or an ``(M, 3)`` stack; the result has the
    same shape. ``center`` defaults to the model's own center.
    """

    r = np.asarray(r, dtype=float)
    if model.kind == "zero":
        return np.zeros_like(r)
    c = model.center if center is None else np.asarray(center, dtype=float)
    d = r - c
    dist = np.linalg.norm(d, axis=-1, keepdims=True)
    if np.any(dist < GRAVITY_SINGULAR_RADIUS):
        raise GravitySingularityError(f"gravity evaluated at its center (t={t})")
    return -model.mu * d / dist**3


def gravity_jacobian(model: GravityModel, t: float, r: np.ndarray) -> np.ndarray:
    """d f_mu / d r as a 3x3 matrix."""

    if model.kind == "zero":
        return np.zeros((3, 3))
    d = np.asarray(r, dtype=float) - model.center
    dist = float(np.linalg.norm(d))
    if dist < GRAVITY_SINGULAR_RADIUS:
        raise GravitySingularityError(f"gravity evaluated at its center (t={t})")
    return -model.mu * (np.eye(3) / dist**3 - 3.0 * np.outer(d, d) / dist**5)


def state_derivative(
    s: SimState,
    u: np.ndarray,
    w_u: np.ndarray,
    w_x: np.ndarray,
    model: GravityModel,
) -> np.ndarray:
    """Return ``[v + w_x, f_mu + u + w_u]``; ``w_x`` only enters the position equation."""

    return closed_loop_field(model, u, w_u, w_x)(s.t, s.x)


def closed_loop_field(model: GravityModel, u, w_u, w_x) -> VectorField:
    """Vector field of the plant with control and disturbances held constant."""

    u = np.asarray(u, dtype=float)
    w_u = np.asarray(w_u, dtype=float)
    w_x = np.asarray(w_x, dtype=float)

    def derivatives(t: float, x: np.ndarray) -> np.ndarray:
        r = x[:3]
        v = x[3:6]
        a = gravity_accel(model, t, r)
        return np.concatenate((v + w_x, a + u + w_u))

    return derivatives


def rk4(fun: VectorField, t: float, y: np.ndarray, dt: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step of ``y' = fun(t, y)``."""

    k1 = fun(t, y)
    k2 = fun(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = fun(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = fun(t + dt, y + dt * k3)
    y_next = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(y_next)):
        raise IntegrationError(f"non-finite state after RK4 step at t={t}")
    return y_next


def rk4_step(
    s: SimState,
    dt: float,
    u: np.ndarray,
    w_u: np.ndarray,
    w_x: np.ndarray,
    model: GravityModel,
) -> SimState:
    """Advance the plant by ``dt`` with zero-order hold on control and disturbance."""

    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x_next = rk4(closed_loop_field(model, u, w_u, w_x), s.t, s.x, dt)
    return SimState.from_vector(s.t + dt, x_next)


def _unit_or_zero(vec) -> np.ndarray:
    if vec is None:
        return np.zeros(3)
    vec = np.asarray(vec, dtype=float)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0 or not np.isfinite(norm):
        return np.zeros(3)
    return vec / norm


class DisturbanceProcess:
    """Emits per-step disturbance pairs ``(w_u, w_x)`` within the bounds.

    Modes:
        zero     -- both disturbances are zero
        random   -- independent draws uniform in each ball
        worst    -- w_u along ``toward_u`` and w_x along ``toward_x``, at the bound
        helpful  -- the negation of ``worst``
    """

    def __init__(self, bounds: DisturbanceBounds, mode: str = "random", seed: int = 0) -> None:
        if mode not in DISTURBANCE_MODES:
            raise ValueError(f"unknown disturbance mode {mode!r}; expected one of {DISTURBANCE_MODES}")
        self.bounds = bounds
        self.mode = mode
        self.seed = int(seed)
        self._rng = np.random.default_rng(self.seed)

    def _ball(self, radius: float, n: int) -> np.ndarray:
        direction = self._rng.normal(size=(n, 3))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        scale = radius * self._rng.random(n) ** (1.0 / 3.0)
        return direction * scale[:, None]

    def draw(self, toward_u=None, toward_x=None) -> tuple[np.ndarray, np.ndarray]:
        if self.mode == "zero":
            return np.zeros(3), np.zeros(3)
        if self.mode == "random":
            return self._ball(self.bounds.w_u_max, 1)[0], self._ball(self.bounds.w_x_max, 1)[0]
        sign = 1.0 if self.mode == "worst" else -1.0
        w_u = sign * self.bounds.w_u_max * _unit_or_zero(toward_u)
        w_x = sign * self.bounds.w_x_max * _unit_or_zero(toward_x)
        return w_u, w_x

    def draw_batch(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """``n`` random-mode draws at once, shape ``(n, 3)`` each."""

        return self._ball(self.bounds.w_u_max, n), self._ball(self.bounds.w_x_max, n)
