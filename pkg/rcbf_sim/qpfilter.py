"""Safety-filter QP and the nominal guidance laws.

The filter solves

    min 1/2 |u - u_nom|^2   s.t.  |u_i| <= u_max,  a_j . u <= b_j

in three dimensions by enumerating candidate active sets of at most three
constraints. The objective is strictly convex, so the first candidate that
satisfies the KKT conditions is the optimum.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .dynamics import ControlBounds

logger = logging.getLogger(__name__)

PRIMAL_TOL = 1e-9
DUAL_TOL = 1e-10
ROW_TOL = 1e-14

FLYBY_KP = 1.2e-11
FLYBY_KD = 6e-5
FLYBY_SPEED_FLOOR = 1e4


@dataclass(frozen=True)
class QpProblem:
    u_nom: np.ndarray
    box: ControlBounds
    halfspaces: list = field(default_factory=list)

    def __post_init__(self) -> None:
        u_nom = np.asarray(self.u_nom, dtype=float).reshape(3)
        if not np.all(np.isfinite(u_nom)):
            raise ValueError("u_nom must be finite")
        object.__setattr__(self, "u_nom", u_nom)
        for row, bound in self.halfspaces:
            if not (np.all(np.isfinite(row)) and np.isfinite(bound)):
                raise ValueError("half-space rows and bounds must be finite")


@dataclass(frozen=True)
class QpSolution:
    u: np.ndarray
    status: str
    kkt_residual: float
    active: tuple = ()


def _stack(p: QpProblem) -> tuple[np.ndarray, np.ndarray, bool]:
    """Normalized constraint matrix ``G u <= g`` (half-spaces, then box faces)."""

    rows, rhs = [], []
    trivially_infeasible = False
    for row, bound in p.halfspaces:
        row = np.asarray(row, dtype=float)
        norm = float(np.linalg.norm(row))
        if norm < ROW_TOL:
            if bound < -PRIMAL_TOL:
                trivially_infeasible = True
            continue
        rows.append(row / norm)
        rhs.append(bound / norm)
    eye = np.eye(3)
    rows.extend(eye)
    rows.extend(-eye)
    rhs.extend([p.box.u_max] * 6)
    return np.array(rows), np.array(rhs), trivially_infeasible


def solve(p: QpProblem) -> QpSolution:
    """Exact minimizer of the filter QP, or ``status="infeasible"``."""

    G, g, hopeless = _stack(p)
    if hopeless:
        return QpSolution(p.box.clip(p.u_nom), "infeasible", float("inf"))
    u_nom = p.u_nom
    m = len(g)
    for size in range(4):
        for subset in itertools.combinations(range(m), size):
            if size == 0:
                u = u_nom
                lam = np.zeros(0)
            else:
                A = G[list(subset)]
                gram = A @ A.T
                if abs(np.linalg.det(gram)) < 1e-12:
                    continue
                lam = np.linalg.solve(gram, A @ u_nom - g[list(subset)])
                if np.any(lam < -DUAL_TOL):
                    continue
                u = u_nom - A.T @ lam
            if np.all(G @ u <= g + PRIMAL_TOL):
                residual = _kkt_residual(G, g, u, u_nom, subset, lam)
                return QpSolution(u.copy(), "optimal", residual, tuple(subset))
    return QpSolution(p.box.clip(u_nom), "infeasible", float("inf"))


def _kkt_residual(G, g, u, u_nom, subset, lam) -> float:
    stationarity = (u - u_nom) + (G[list(subset)].T @ lam if subset else 0.0)
    primal = np.maximum(G @ u - g, 0.0)
    complementarity = lam * (G[list(subset)] @ u - g[list(subset)]) if subset else np.zeros(0)
    parts = [np.abs(stationarity).max(initial=0.0), primal.max(initial=0.0), np.abs(complementarity).max(initial=0.0)]
    return float(max(parts))


def solve_least_violation(p: QpProblem) -> np.ndarray:
    """Control in the box minimizing the largest normalized half-space violation.

    A linear program in ``(u, s)``: minimize ``s`` subject to
    ``a_j . u - b_j <= s``.
    """

    rows, rhs = [], []
    for row, bound in p.halfspaces:
        row = np.asarray(row, dtype=float)
        norm = float(np.linalg.norm(row))
        if norm < ROW_TOL:
            continue
        rows.append(np.append(row / norm, -1.0))
        rhs.append(bound / norm)
    if not rows:
        return p.box.clip(p.u_nom)
    c = np.array([0.0, 0.0, 0.0, 1.0])
    limits = [(-p.box.u_max, p.box.u_max)] * 3 + [(None, None)]
    res = linprog(c, A_ub=np.array(rows), b_ub=np.array(rhs), bounds=limits, method="highs")
    if res.status != 0:
        logger.error("least-violation fallback failed: %s", res.message)
        return p.box.clip(p.u_nom)
    return np.asarray(res.x[:3])


def nominal_flyby(t: float, x: np.ndarray, mu: float, k_p: float = FLYBY_KP, k_d: float = FLYBY_KD) -> np.ndarray:
    """Drive the spacecraft onto the x-axis at slightly above escape speed."""

    x = np.asarray(x, dtype=float)
    r, v = x[:3], x[3:6]
    dist = float(np.linalg.norm(r))
    if dist == 0.0:
        raise ValueError("flyby law is undefined at the origin")
    e_x = np.array([1.0, 0.0, 0.0])
    target_speed = np.sqrt(2.0 * mu / dist + FLYBY_SPEED_FLOOR)
    return -k_p * (r - r[0] * e_x) - k_d * (v - target_speed * e_x)


def nominal_prox(t: float, x: np.ndarray, r_t: np.ndarray, k_p: float, k_d: float) -> np.ndarray:
    """PD law toward the fixed point ``r_t``."""

    x = np.asarray(x, dtype=float)
    return -k_p * (x[:3] - np.asarray(r_t, dtype=float)) - k_d * x[3:6]
