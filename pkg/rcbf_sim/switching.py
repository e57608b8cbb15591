"""Hysteresis activation of barrier constraints and the alpha_r rate function."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .rcbf import Alpha, BankEvaluation

logger = logging.getLogger(__name__)

SWITCH_MODES = ("hysteresis", "always")


@dataclass(frozen=True)
class HysteresisParams:
    """Activate at ``H >= -eps1``, deactivate at ``H <= -eps2``.

    ``mode="always"`` keeps every constraint active from the start.
    """

    eps1: float
    eps2: float
    mode: str = "hysteresis"

    def __post_init__(self) -> None:
        if self.mode not in SWITCH_MODES:
            raise ValueError(f"unknown switching mode {self.mode!r}")
        if not (self.eps2 > self.eps1 >= 0):
            raise ValueError(f"need eps2 > eps1 >= 0, got eps1={self.eps1}, eps2={self.eps2}")
        if self.eps2 <= 2 * self.eps1:
            logger.warning("eps2=%g <= 2*eps1=%g: disturbances alone may deactivate constraints", self.eps2, 2 * self.eps1)


def update_sigma(H, sigma_prev, params: HysteresisParams):
    """Next discrete state; the first matching case wins at exact thresholds."""

    if params.mode == "always":
        return np.ones_like(np.asarray(sigma_prev), dtype=int) if np.ndim(sigma_prev) else 1
    H = np.asarray(H, dtype=float)
    sigma = np.where(H <= -params.eps2, 0, np.where(H >= -params.eps1, 1, sigma_prev))
    return sigma.astype(int) if np.ndim(sigma) else int(sigma)


@dataclass
class HysteresisBank:
    """Per-constraint discrete states plus transition counts."""

    size: int
    params: HysteresisParams
    sigma: np.ndarray = field(init=False)
    switches_on: int = field(default=0, init=False)
    switches_off: int = field(default=0, init=False)

    def __post_init__(self) -> None:
        initial = 1 if self.params.mode == "always" else 0
        self.sigma = np.full(self.size, initial, dtype=int)

    def update(self, H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Advance every sigma; returns the indices that switched on and off."""

        new = update_sigma(H, self.sigma, self.params)
        on = np.flatnonzero((self.sigma == 0) & (new == 1))
        off = np.flatnonzero((self.sigma == 1) & (new == 0))
        self.switches_on += len(on)
        self.switches_off += len(off)
        self.sigma = new
        return on, off

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.sigma == 1)


def alpha_r(lam, W, eps1: float):
    """State-scaled rate ``W * lam / eps1``."""

    if eps1 == 0:
        raise ZeroDivisionError("alpha_r needs eps1 > 0; use a linear class-K function instead")
    return np.asarray(W, dtype=float) * np.asarray(lam, dtype=float) / eps1


def make_alpha(kind: str, eps1: float = 0.0, gain: float = 1.0) -> Alpha:
    """Rate function used in the barrier condition, as ``alpha(lam, W)``."""

    if kind == "alpha_r":
        if eps1 <= 0:
            raise ValueError("alpha_r needs eps1 > 0")
        return lambda lam, W: alpha_r(lam, W, eps1)
    if kind == "linear":
        if not gain > 0:
            raise ValueError("linear alpha needs a positive gain")
        return lambda lam, W: gain * np.asarray(lam, dtype=float)
    raise ValueError(f"unknown alpha kind {kind!r}")


def active_halfspaces(bank: HysteresisBank, evals: BankEvaluation) -> list[tuple[np.ndarray, float]]:
    """Half-spaces of the active constraints, in index order.

    Control-independent evaluations (zero row) carry no half-space.
    """

    if len(evals) != bank.size:
        raise ValueError("evaluations and hysteresis bank are not aligned")
    return [
        (evals.rows[i], float(evals.bounds[i]))
        for i in bank.active
        if not evals.control_independent[i]
    ]
