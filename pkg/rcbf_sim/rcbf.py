"""Robust control barrier functions for the keep-out constraint.

Two closed-form constructions live here:

* :class:`ConstantAuthority` -- ``H = h + |hdot_w| hdot_w / (2 a_max)``
* :class:`VariableAuthority` -- ``H = Phi_inv(Phi(h) - hdot_w |hdot_w| / 2)``

The predictive construction is in :mod:`rcbf_sim.predictive`. Every
construction reduces to an :class:`RcbfEvaluation`, whose half-space
``constraint_row @ u <= constraint_bound`` is the set of robustly admissible
controls.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .constraints import KeepOutBank, KeepOutConstraint, KeepOutTerms, center_state, h as constraint_h
from .dynamics import ControlBounds, DisturbanceBounds, GravityModel, gravity_accel
from .errors import DegenerateSlopeError, EmptySampleSetError, NoValidPhiError, PhiDomainError

logger = logging.getLogger(__name__)

# alpha(lambda, W) -> rate; both arguments are arrays of equal shape.
Alpha = Callable[[np.ndarray, np.ndarray], np.ndarray]

# Input and unmatched-disturbance maps of the spacecraft model.
SPACECRAFT_G = np.vstack((np.zeros((3, 3)), np.eye(3)))
SPACECRAFT_E = np.vstack((np.eye(3), np.zeros((3, 3))))

PHI_SLOPE_TOL = 1e-300
# Samples this close to a keep-out boundary (relative to rho) count as safe.
BOUNDARY_RTOL = 1e-9


@dataclass(frozen=True)
class ConstantAuthority:
    a_max: float

    def __post_init__(self) -> None:
        if not self.a_max > 0:
            raise ValueError(f"a_max must be positive, got {self.a_max}")


@dataclass(frozen=True)
class VariableAuthority:
    """Authority function ``phi`` with anti-derivative ``Phi`` and its inverse.

    All three callables must accept numpy arrays.
    """

    phi: Callable[[np.ndarray], np.ndarray]
    Phi: Callable[[np.ndarray], np.ndarray]
    Phi_inv: Callable[[np.ndarray], np.ndarray]
    label: str = "custom"


@dataclass(frozen=True)
class RcbfEvaluation:
    """Barrier data at one state and the induced linear control constraint."""

    H: float
    dH_dt: float
    grad_H: np.ndarray
    W: float
    constraint_row: np.ndarray
    constraint_bound: float
    h: float
    control_independent: bool = False
    beta_c: float = float("nan")


@dataclass(frozen=True)
class BankEvaluation:
    """Evaluations of N constraints stacked into arrays."""

    H: np.ndarray
    dH_dt: np.ndarray
    grad_H: np.ndarray
    W: np.ndarray
    rows: np.ndarray
    bounds: np.ndarray
    h: np.ndarray
    control_independent: np.ndarray
    beta_c: np.ndarray

    def __len__(self) -> int:
        return len(self.H)

    def item(self, i: int) -> RcbfEvaluation:
        return RcbfEvaluation(
            H=float(self.H[i]),
            dH_dt=float(self.dH_dt[i]),
            grad_H=self.grad_H[i].copy(),
            W=float(self.W[i]),
            constraint_row=self.rows[i].copy(),
            constraint_bound=float(self.bounds[i]),
            h=float(self.h[i]),
            control_independent=bool(self.control_independent[i]),
            beta_c=float(self.beta_c[i]),
        )

    @classmethod
    def from_items(cls, items: list[RcbfEvaluation]) -> "BankEvaluation":
        return cls(
            H=np.array([e.H for e in items]),
            dH_dt=np.array([e.dH_dt for e in items]),
            grad_H=np.stack([e.grad_H for e in items]),
            W=np.array([e.W for e in items]),
            rows=np.stack([e.constraint_row for e in items]),
            bounds=np.array([e.constraint_bound for e in items]),
            h=np.array([e.h for e in items]),
            control_independent=np.array([e.control_independent for e in items], dtype=bool),
            beta_c=np.array([e.beta_c for e in items]),
        )

    @classmethod
    def concatenate(cls, parts: list["BankEvaluation"]) -> "BankEvaluation":
        if len(parts) == 1:
            return parts[0]
        return cls(*(np.concatenate([getattr(p, name) for p in parts]) for name in cls.__dataclass_fields__))


def disturbance_margin_W(
    grad_H: np.ndarray,
    g: np.ndarray,
    bounds: DisturbanceBounds,
    unmatched: np.ndarray | None = None,
) -> np.ndarray | float:
    """Worst-case effect of the disturbances on the barrier derivative.

    ``||grad_H g|| w_u_max + ||grad_H E|| w_x_max`` where ``E`` maps the
    unmatched disturbance into the state (identity when omitted). ``grad_H``
    may be a single row or an ``(N, n)`` stack.
    """

    grad_H = np.asarray(grad_H, dtype=float)
    matched = np.linalg.norm(grad_H @ np.asarray(g, dtype=float), axis=-1)
    unmatched_part = grad_H if unmatched is None else grad_H @ unmatched
    result = matched * bounds.w_u_max + np.linalg.norm(unmatched_part, axis=-1) * bounds.w_x_max
    return float(result) if np.ndim(result) == 0 else result


def _assemble(
    x: np.ndarray,
    terms: KeepOutTerms,
    H: np.ndarray,
    dH_dt: np.ndarray,
    grad_r: np.ndarray,
    grad_v: np.ndarray,
    bounds: DisturbanceBounds,
    alpha: Alpha,
) -> BankEvaluation:
    x = np.asarray(x, dtype=float)
    W = np.linalg.norm(grad_v, axis=1) * bounds.w_u_max + np.linalg.norm(grad_r, axis=1) * bounds.w_x_max
    grad_f = grad_r @ x[3:6] + grad_v @ terms.f_mu
    rhs = np.asarray(alpha(-H, W), dtype=float) - W - dH_dt - grad_f
    n = len(H)
    return BankEvaluation(
        H=H,
        dH_dt=dH_dt,
        grad_H=np.hstack((grad_r, grad_v)),
        W=W,
        rows=grad_v,
        bounds=rhs,
        h=terms.h,
        control_independent=np.zeros(n, dtype=bool),
        beta_c=np.full(n, np.nan),
    )


def constant_authority_bank(
    bank: KeepOutBank,
    a_max: float,
    t: float,
    x: np.ndarray,
    gravity: GravityModel,
    bounds: DisturbanceBounds,
    alpha: Alpha,
) -> BankEvaluation:
    terms = bank.terms(t, x, gravity)
    s = terms.hdot_w
    H = terms.h + np.abs(s) * s / (2.0 * a_max)
    k = (np.abs(s) / a_max)[:, None]
    grad_r = terms.dh_dr + k * terms.dhdot_dr
    grad_v = k * terms.dhdot_dv
    dH_dt = terms.dh_dt + np.abs(s) * terms.dhdot_dt / a_max
    return _assemble(x, terms, H, dH_dt, grad_r, grad_v, bounds, alpha)


def eval_constant_authority(
    c: KeepOutConstraint,
    a_max: float,
    t: float,
    x: np.ndarray,
    gravity: GravityModel,
    bounds: DisturbanceBounds,
    alpha: Alpha,
) -> RcbfEvaluation:
    return constant_authority_bank(KeepOutBank.from_constraints([c]), a_max, t, x, gravity, bounds, alpha).item(0)


def piecewise_constant_authority_H(h: np.ndarray | float, hdot: np.ndarray | float, a_max: float):
    """Largest future value of ``h`` under full braking at ``a_max``.

    Equal to ``h`` while receding and to ``h + hdot**2 / (2 a_max)`` while
    closing. Its zero sublevel set coincides with the restricted safe set of
    the signed form used by :func:`eval_constant_authority`.
    """

    hdot = np.asarray(hdot, dtype=float)
    return h + np.maximum(hdot, 0.0) ** 2 / (2.0 * a_max)


def linear_phi(a_max: float) -> VariableAuthority:
    """``Phi(l) = -a_max l``, which reproduces the constant-authority barrier."""

    if not a_max > 0:
        raise ValueError("a_max must be positive")
    return VariableAuthority(
        phi=lambda lam: np.full_like(np.asarray(lam, dtype=float), -a_max),
        Phi=lambda lam: -a_max * np.asarray(lam, dtype=float),
        Phi_inv=lambda y: -np.asarray(y, dtype=float) / a_max,
        label=f"linear(a_max={a_max:g})",
    )


def gravity_phi(mu: float, rho: float, u_max: float, w_u_max: float) -> VariableAuthority:
    """Authority that grows with distance from a point mass.

    ``phi(l) = mu / (rho - l)**2 - (u_max - w_u_max)`` bounds the net radial
    deceleration available at ``h = l``. The inverse takes the larger root of
    a quadratic (the branch where ``Phi`` is decreasing) and falls back to
    bracketed root finding near the turning point.
    """

    k = u_max - w_u_max
    if not k > 0:
        raise NoValidPhiError("u_max must exceed w_u_max")
    if mu / rho**2 - k > 0:
        raise NoValidPhiError(
            f"gravity at the keep-out boundary ({mu / rho**2:.4g}) exceeds the available authority ({k:.4g})"
        )
    lam_turn = rho - np.sqrt(mu / k)

    def phi(lam):
        lam = np.asarray(lam, dtype=float)
        return mu / (rho - lam) ** 2 - k

    def Phi(lam):
        lam = np.asarray(lam, dtype=float)
        if np.any(lam >= rho):
            raise PhiDomainError("Phi is only defined for lambda < rho")
        return mu / (rho - lam) + (-k) * lam

    y_min = float(Phi(lam_turn))
    y_tol = 1e-12 * max(abs(y_min), 1.0)

    def _bisect(y: float) -> float:
        span = max(abs(lam_turn), rho, 1.0)
        lo = lam_turn - span
        while Phi(lo) < y:
            span *= 2.0
            lo = lam_turn - span
        return brentq(lambda lam: float(Phi(lam)) - y, lo, lam_turn, xtol=1e-12 * span, rtol=4e-16)

    def Phi_inv(y):
        y = np.asarray(y, dtype=float)
        if np.any(y < y_min - y_tol):
            raise PhiDomainError(f"argument below the minimum of Phi ({y_min:.6g})")
        b = y + k * rho
        disc = b * b - 4.0 * k * mu
        s = (b + np.sqrt(np.maximum(disc, 0.0))) / (2.0 * k)
        lam = np.asarray(rho - s, dtype=float)
        shaky = disc < 1e-8 * b * b
        if np.any(shaky):
            logger.debug("Phi inversion near the turning point; using bracketed search")
            flat = lam.reshape(-1)
            for idx in np.flatnonzero(np.reshape(shaky, -1)):
                flat[idx] = _bisect(float(np.reshape(y, -1)[idx]))
            lam = flat.reshape(lam.shape)
        if __debug__:
            back = Phi(lam)
            assert np.allclose(back, y, rtol=1e-6, atol=1e-9 * max(abs(y_min), 1.0)), "Phi round trip failed"
        return lam

    return VariableAuthority(phi=phi, Phi=Phi, Phi_inv=Phi_inv, label=f"gravity(mu={mu:g}, rho={rho:g})")


def variable_authority_bank(
    bank: KeepOutBank,
    spec: VariableAuthority,
    t: float,
    x: np.ndarray,
    gravity: GravityModel,
    bounds: DisturbanceBounds,
    alpha: Alpha,
) -> BankEvaluation:
    terms = bank.terms(t, x, gravity)
    s = terms.hdot_w
    phi_h = np.asarray(spec.phi(terms.h), dtype=float)
    if np.any(phi_h > 0):
        raise PhiDomainError("phi(h) must be nonpositive at the evaluated state")
    H = np.asarray(spec.Phi_inv(spec.Phi(terms.h) - 0.5 * s * np.abs(s)), dtype=float)
    phi_H = np.asarray(spec.phi(H), dtype=float)
    if np.any(np.abs(phi_H) <= PHI_SLOPE_TOL):
        raise DegenerateSlopeError("phi vanishes at the barrier value")
    scale = (1.0 / phi_H)[:, None]
    grad_r = scale * (phi_h[:, None] * terms.dh_dr - np.abs(s)[:, None] * terms.dhdot_dr)
    grad_v = scale * (-np.abs(s)[:, None] * terms.dhdot_dv)
    dH_dt = (phi_h * terms.dh_dt - np.abs(s) * terms.dhdot_dt) / phi_H
    return _assemble(x, terms, H, dH_dt, grad_r, grad_v, bounds, alpha)


def eval_variable_authority(
    c: KeepOutConstraint,
    spec: VariableAuthority,
    t: float,
    x: np.ndarray,
    gravity: GravityModel,
    bounds: DisturbanceBounds,
    alpha: Alpha,
) -> RcbfEvaluation:
    return variable_authority_bank(KeepOutBank.from_constraints([c]), spec, t, x, gravity, bounds, alpha).item(0)


@dataclass(frozen=True)
class StateSamples:
    """Sampled states ``x`` (M x 6) at times ``t`` (M,) used for offline bounds."""

    t: np.ndarray
    x: np.ndarray

    def __post_init__(self) -> None:
        t = np.atleast_1d(np.asarray(self.t, dtype=float))
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        if x.shape[1] != 6 or t.shape != (len(x),):
            raise ValueError("samples need x of shape (M, 6) and t of shape (M,)")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)

    def __len__(self) -> int:
        return len(self.t)


def _sup_gravity_minus_center(bank: KeepOutBank, gravity: GravityModel, samples: StateSamples, chunk: int) -> float:
    sup = -np.inf
    for t in np.unique(samples.t):
        positions = samples.x[samples.t == t, :3]
        f_mu = gravity_accel(gravity, float(t), positions)
        r_c, _, u_c = center_state(bank.center, float(t))
        for start in range(0, len(bank), chunk):
            stop = start + chunk
            dist = np.linalg.norm(positions[:, None, :] - r_c[None, start:stop, :], axis=2)
            safe = dist >= bank.rho[None, start:stop] * (1.0 - BOUNDARY_RTOL)
            if not np.any(safe):
                continue
            excess = np.linalg.norm(f_mu[:, None, :] - u_c[None, start:stop, :], axis=2)
            sup = max(sup, float(excess[safe].max()))
    return sup


def _inf_pointwise(bank: KeepOutBank, gravity: GravityModel, control: ControlBounds, bounds, samples) -> float:
    inf = np.inf
    for t, x in zip(samples.t, samples.x):
        terms = bank.terms(float(t), x, gravity)
        safe = terms.h <= BOUNDARY_RTOL * bank.rho
        if not np.any(safe):
            continue
        row = terms.control_row[safe]
        # u_min over the box gives row @ u_min = -u_max * ||row||_1
        available = control.u_max * np.abs(row).sum(axis=1) - bounds.w_u_max * np.linalg.norm(row, axis=1)
        inf = min(inf, float(np.min(available - terms.drift[safe])))
    return inf


def compute_a_max0(
    c: KeepOutConstraint | KeepOutBank,
    gravity: GravityModel,
    control: ControlBounds,
    bounds: DisturbanceBounds,
    samples: StateSamples,
    method: str = "bound",
    chunk: int = 256,
) -> Optional[float]:
    """Largest constant authority valid over the sampled safe set, or ``None``.

    ``method="bound"`` uses ``u_max - w_u_max - sup |f_mu - u_c|``. A bank
    yields the shared value valid for every member. ``method="pointwise"``
    evaluates ``inf(-(drift + row @ u_min) - |row| w_u_max)`` state by state.
    Only samples in each constraint's safe set contribute.
    """

    bank = c if isinstance(c, KeepOutBank) else KeepOutBank.from_constraints([c])
    if len(samples) == 0:
        raise EmptySampleSetError("no states to evaluate")
    if method == "bound":
        sup = _sup_gravity_minus_center(bank, gravity, samples, chunk)
        if not np.isfinite(sup):
            raise EmptySampleSetError("no sampled state lies in the safe set")
        a_max = control.u_max - bounds.w_u_max - sup
    elif method == "pointwise":
        a_max = _inf_pointwise(bank, gravity, control, bounds, samples)
        if not np.isfinite(a_max):
            raise EmptySampleSetError("no sampled state lies in the safe set")
    else:
        raise ValueError(f"unknown a_max method {method!r}")
    logger.debug("a_max0 (%s) over %d samples: %.6g", method, len(samples), a_max)
    return float(a_max) if a_max > 0 else None


def in_restricted_safe_set(c: KeepOutConstraint, ev: RcbfEvaluation, t: float, x: np.ndarray) -> bool:
    """Both the barrier and the raw constraint are nonpositive."""

    return ev.H <= 0.0 and constraint_h(c, t, x) <= 0.0
