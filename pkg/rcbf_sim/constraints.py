"""Keep-out constraints and their robust derivatives.

A keep-out constraint is ``h = rho - |r - r_c(t)|``; the state is safe while
``h <= 0``. Centers are either fixed points or points rotating rigidly about
the origin (mesh vertices of a spinning body).

The single-constraint operations (:func:`h`, :func:`hdot_w`,
:func:`hddot_w_terms`) are thin wrappers over :class:`KeepOutBank`, which
evaluates many constraints sharing one center trajectory in a single
vectorized pass.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.spatial.transform import Rotation

from .dynamics import GravityModel, gravity_accel
from .errors import ConstraintSingularityError

logger = logging.getLogger(__name__)

SINGULAR_RADIUS = 1e-6


def _points(value) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape[-1] != 3 or arr.ndim not in (1, 2):
        raise ValueError(f"center positions must have shape (3,) or (N, 3), got {arr.shape}")
    return arr


@dataclass(frozen=True)
class FixedCenter:
    r_c: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "r_c", _points(self.r_c))


@dataclass(frozen=True)
class RotatingCenter:
    """Point(s) fixed in a body spinning with constant ``omega`` about the origin."""

    r_c0: np.ndarray
    omega: np.ndarray
    t0: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "r_c0", _points(self.r_c0))
        omega = np.asarray(self.omega, dtype=float).reshape(-1)
        if omega.shape != (3,):
            raise ValueError("omega must be a 3-vector")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "t0", float(self.t0))


CenterTrajectory = Union[FixedCenter, RotatingCenter]


def center_state(c: CenterTrajectory, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Position, velocity and acceleration of the center(s) at time ``t``."""

    if isinstance(c, FixedCenter):
        zeros = np.zeros_like(c.r_c)
        return c.r_c, zeros, zeros
    r_c = Rotation.from_rotvec(c.omega * (t - c.t0)).apply(c.r_c0)
    v_c = np.cross(c.omega, r_c)
    u_c = np.cross(c.omega, v_c)
    return r_c, v_c, u_c


@dataclass(frozen=True)
class KeepOutConstraint:
    """Stay at least ``rho`` away from a (possibly moving) center."""

    rho: float
    center: CenterTrajectory
    w_x_max: float = 0.0

    def __post_init__(self) -> None:
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if self.w_x_max < 0:
            raise ValueError("w_x_max must be nonnegative")
        r = self.center.r_c if isinstance(self.center, FixedCenter) else self.center.r_c0
        if r.shape != (3,):
            raise ValueError("a single KeepOutConstraint needs a single center point")


@dataclass(frozen=True)
class KeepOutTerms:
    """Per-constraint values and derivatives at one state; arrays have length N.

    Gradients are split into position and velocity parts (``*_r`` and ``*_v``),
    each of shape ``(N, 3)``.
    """

    h: np.ndarray
    dh_dt: np.ndarray
    dh_dr: np.ndarray
    hdot_w: np.ndarray
    dhdot_dt: np.ndarray
    dhdot_dr: np.ndarray
    dhdot_dv: np.ndarray
    drift: np.ndarray
    control_row: np.ndarray
    distance: np.ndarray
    f_mu: np.ndarray
    u_c: np.ndarray


@dataclass(frozen=True)
class KeepOutBank:
    """N keep-out constraints sharing one center trajectory kind.

    ``center`` holds ``(N, 3)`` stacked points; ``rho`` has length N.
    """

    rho: np.ndarray
    center: CenterTrajectory
    w_x_max: float = 0.0

    def __post_init__(self) -> None:
        rho = np.atleast_1d(np.asarray(self.rho, dtype=float))
        pts = self.center.r_c if isinstance(self.center, FixedCenter) else self.center.r_c0
        pts = np.atleast_2d(pts)
        if rho.shape == (1,) and len(pts) > 1:
            rho = np.full(len(pts), rho[0])
        if rho.shape != (len(pts),):
            raise ValueError("rho must be a scalar or have one entry per center")
        if np.any(rho <= 0):
            raise ValueError("rho must be positive")
        if isinstance(self.center, FixedCenter):
            object.__setattr__(self, "center", FixedCenter(pts))
        else:
            object.__setattr__(self, "center", RotatingCenter(pts, self.center.omega, self.center.t0))
        object.__setattr__(self, "rho", rho)

    def __len__(self) -> int:
        return len(self.rho)

    @classmethod
    def from_constraints(cls, constraints: Sequence[KeepOutConstraint]) -> "KeepOutBank":
        if not constraints:
            raise ValueError("cannot build a bank from zero constraints")
        first = constraints[0]
        w_x = {c.w_x_max for c in constraints}
        if len(w_x) != 1:
            raise ValueError("constraints in one bank must share w_x_max")
        rho = np.array([c.rho for c in constraints])
        if all(isinstance(c.center, FixedCenter) for c in constraints):
            center: CenterTrajectory = FixedCenter(np.stack([c.center.r_c for c in constraints]))
        elif all(
            isinstance(c.center, RotatingCenter)
            and np.array_equal(c.center.omega, first.center.omega)
            and c.center.t0 == first.center.t0
            for c in constraints
        ):
            center = RotatingCenter(
                np.stack([c.center.r_c0 for c in constraints]), first.center.omega, first.center.t0
            )
        else:
            raise ValueError("constraints in one bank must share the same center motion")
        return cls(rho, center, first.w_x_max)

    def constraint(self, i: int) -> KeepOutConstraint:
        if isinstance(self.center, FixedCenter):
            center: CenterTrajectory = FixedCenter(self.center.r_c[i])
        else:
            center = RotatingCenter(self.center.r_c0[i], self.center.omega, self.center.t0)
        return KeepOutConstraint(float(self.rho[i]), center, self.w_x_max)

    def h(self, t: float, x: np.ndarray) -> np.ndarray:
        r_c, _, _ = center_state(self.center, t)
        return self.rho - np.linalg.norm(np.asarray(x, dtype=float)[:3] - r_c, axis=1)

    def terms(self, t: float, x: np.ndarray, gravity: GravityModel) -> KeepOutTerms:
        x = np.asarray(x, dtype=float)
        r, v = x[:3], x[3:6]
        r_c, v_c, u_c = center_state(self.center, t)
        d = r - r_c
        dist = np.linalg.norm(d, axis=1)
        if np.any(dist < SINGULAR_RADIUS):
            raise ConstraintSingularityError(f"state coincides with a keep-out center at t={t}")
        e = d / dist[:, None]
        dv = v - v_c
        radial_rate = np.einsum("ij,ij->i", e, dv)
        v_perp = dv - radial_rate[:, None] * e
        f_mu = gravity_accel(gravity, t, r)
        centripetal = -np.einsum("ij,ij->i", v_perp, v_perp) / dist
        drift = -np.einsum("ij,ij->i", e, f_mu - u_c) + centripetal
        return KeepOutTerms(
            h=self.rho - dist,
            dh_dt=np.einsum("ij,ij->i", e, v_c),
            dh_dr=-e,
            hdot_w=-radial_rate + self.w_x_max,
            dhdot_dt=np.einsum("ij,ij->i", v_perp, v_c) / dist + np.einsum("ij,ij->i", e, u_c),
            dhdot_dr=-v_perp / dist[:, None],
            dhdot_dv=-e,
            drift=drift,
            control_row=-e,
            distance=dist,
            f_mu=f_mu,
            u_c=u_c,
        )


def _single(c: KeepOutConstraint) -> KeepOutBank:
    return KeepOutBank.from_constraints([c])


def h(c: KeepOutConstraint, t: float, x: np.ndarray) -> float:
    """Constraint value ``rho - |r - r_c(t)|`` in meters."""

    return float(_single(c).h(t, x)[0])


def hdot_w(c: KeepOutConstraint, t: float, x: np.ndarray) -> float:
    """Upper bound on dh/dt under any unmatched disturbance within ``w_x_max``."""

    return float(_single(c).terms(t, x, GravityModel.zero()).hdot_w[0])


def hddot_w_terms(c: KeepOutConstraint, t: float, x: np.ndarray, gravity: GravityModel) -> tuple[float, np.ndarray]:
    """Split the second derivative into ``drift + control_row @ (u + w_u)``."""

    terms = _single(c).terms(t, x, gravity)
    return float(terms.drift[0]), terms.control_row[0]


def constraints_from_mesh(
    vertices: np.ndarray,
    rho: float,
    omega: np.ndarray,
    w_x_max: float = 0.0,
    t0: float = 0.0,
) -> list[KeepOutConstraint]:
    """One rotating keep-out constraint per mesh vertex."""

    return [KeepOutConstraint(rho, RotatingCenter(p, omega, t0), w_x_max) for p in np.asarray(vertices, dtype=float)]


def bank_from_mesh(
    vertices: np.ndarray,
    rho: float,
    omega: np.ndarray,
    w_x_max: float = 0.0,
    t0: float = 0.0,
) -> KeepOutBank:
    """Same constraints as :func:`constraints_from_mesh`, stacked for evaluation."""

    vertices = np.asarray(vertices, dtype=float)
    return KeepOutBank(np.full(len(vertices), float(rho)), RotatingCenter(vertices, omega, t0), w_x_max)
