"""Tests for the spacecraft model, the integrator and the disturbance process."""

from __future__ import annotations

import math

import numpy as np
import pytest

from rcbf_sim.dynamics import (
    ControlBounds,
    DisturbanceBounds,
    DisturbanceProcess,
    GravityModel,
    SimState,
    gravity_accel,
    gravity_jacobian,
    rk4,
    rk4_step,
    state_derivative,
)
from rcbf_sim.errors import GravitySingularityError, IntegrationError


def test_point_mass_gravity_points_at_center() -> None:
    model = GravityModel.point_mass(8.0)

    accel = gravity_accel(model, 0.0, np.array([2.0, 0.0, 0.0]))

    assert accel == pytest.approx([-2.0, 0.0, 0.0])


def test_gravity_accepts_stacked_positions() -> None:
    model = GravityModel.point_mass(1.0, center=(1.0, 0.0, 0.0))
    positions = np.array([[2.0, 0.0, 0.0], [1.0, -2.0, 0.0]])

    accel = gravity_accel(model, 0.0, positions)

    assert accel.shape == (2, 3)
    assert accel[0] == pytest.approx([-1.0, 0.0, 0.0])
    assert accel[1] == pytest.approx([0.0, 0.25, 0.0])


def test_gravity_at_center_raises() -> None:
    with pytest.raises(GravitySingularityError):
        gravity_accel(GravityModel.point_mass(1.0), 0.0, np.zeros(3))


def test_gravity_jacobian_matches_finite_differences() -> None:
    model = GravityModel.point_mass(3.0)
    r = np.array([1.3, -0.4, 0.7])
    step = 1e-6
    expected = np.empty((3, 3))
    for j in range(3):
        dr = np.zeros(3)
        dr[j] = step
        expected[:, j] = (gravity_accel(model, 0.0, r + dr) - gravity_accel(model, 0.0, r - dr)) / (2 * step)

    assert gravity_jacobian(model, 0.0, r) == pytest.approx(expected, rel=1e-6, abs=1e-9)


def test_zero_gravity_is_zero_everywhere() -> None:
    model = GravityModel.zero()

    assert np.all(gravity_accel(model, 0.0, np.zeros(3)) == 0)
    assert np.all(gravity_jacobian(model, 0.0, np.zeros(3)) == 0)


def test_unmatched_disturbance_enters_position_equation_only() -> None:
    state = SimState(0.0, [1.0, 2.0, 3.0], [0.5, 0.0, 0.0])

    xdot = state_derivative(state, np.zeros(3), np.zeros(3), np.array([0.0, 1.0, 0.0]), GravityModel.zero())

    assert xdot == pytest.approx([0.5, 1.0, 0.0, 0.0, 0.0, 0.0])


def test_rk4_is_exact_for_constant_thrust() -> None:
    state = SimState(0.0, [1.0, -2.0, 0.5], [0.3, 0.0, -0.1])
    u = np.array([0.2, -0.1, 0.05])
    w_u = np.array([0.01, 0.0, 0.0])
    dt = 2.5

    nxt = rk4_step(state, dt, u, w_u, np.zeros(3), GravityModel.zero())

    accel = u + w_u
    assert nxt.t == pytest.approx(dt)
    assert nxt.r == pytest.approx(state.r + state.v * dt + 0.5 * accel * dt**2, abs=1e-14)
    assert nxt.v == pytest.approx(state.v + accel * dt, abs=1e-14)


def test_circular_orbit_closes_after_one_period() -> None:
    mu, radius = 1.0, 1.0
    period = 2 * math.pi * math.sqrt(radius**3 / mu)
    n_steps = 1000
    dt = period / n_steps
    state = SimState(0.0, [radius, 0.0, 0.0], [0.0, math.sqrt(mu / radius), 0.0])
    model = GravityModel.point_mass(mu)
    for _ in range(n_steps):
        state = rk4_step(state, dt, np.zeros(3), np.zeros(3), np.zeros(3), model)

    assert np.linalg.norm(state.r - [radius, 0.0, 0.0]) < 1e-3 * radius


def test_rk4_rejects_non_finite_results() -> None:
    with pytest.raises(IntegrationError):
        rk4(lambda t, y: np.full_like(y, np.inf), 0.0, np.zeros(2), 0.1)


def test_rk4_step_requires_positive_dt() -> None:
    state = SimState(0.0, np.zeros(3), np.zeros(3))

    with pytest.raises(ValueError):
        rk4_step(state, 0.0, np.zeros(3), np.zeros(3), np.zeros(3), GravityModel.zero())


def test_sim_state_rejects_nan() -> None:
    with pytest.raises(ValueError):
        SimState(0.0, [np.nan, 0.0, 0.0], np.zeros(3))


def test_bounds_validate_their_inputs() -> None:
    with pytest.raises(ValueError):
        ControlBounds(0.0)
    with pytest.raises(ValueError):
        DisturbanceBounds(w_u_max=-1.0)
    assert ControlBounds(1.0).clip(np.array([2.0, -3.0, 0.5])) == pytest.approx([1.0, -1.0, 0.5])


def test_random_disturbances_stay_in_bounds_and_repeat_per_seed() -> None:
    bounds = DisturbanceBounds(w_u_max=0.5, w_x_max=0.1)
    first = DisturbanceProcess(bounds, "random", seed=4)
    second = DisturbanceProcess(bounds, "random", seed=4)

    draws = [first.draw() for _ in range(200)]
    again = [second.draw() for _ in range(200)]

    assert all(np.linalg.norm(w_u) <= 0.5 + 1e-12 and np.linalg.norm(w_x) <= 0.1 + 1e-12 for w_u, w_x in draws)
    assert all(np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1]) for a, b in zip(draws, again))


def test_worst_and_helpful_disturbances_are_opposite() -> None:
    bounds = DisturbanceBounds(w_u_max=2.0, w_x_max=1.0)
    toward_u = np.array([0.0, 3.0, 4.0])
    toward_x = np.array([1.0, 0.0, 0.0])

    worst = DisturbanceProcess(bounds, "worst").draw(toward_u, toward_x)
    helpful = DisturbanceProcess(bounds, "helpful").draw(toward_u, toward_x)

    assert worst[0] == pytest.approx([0.0, 1.2, 1.6])
    assert worst[1] == pytest.approx([1.0, 0.0, 0.0])
    assert helpful[0] == pytest.approx(-worst[0])
    assert helpful[1] == pytest.approx(-worst[1])


def test_worst_disturbance_with_zero_direction_is_zero() -> None:
    w_u, w_x = DisturbanceProcess(DisturbanceBounds(1.0, 1.0), "worst").draw(np.zeros(3), None)

    assert not np.any(w_u) and not np.any(w_x)


def test_unknown_disturbance_mode() -> None:
    with pytest.raises(ValueError):
        DisturbanceProcess(DisturbanceBounds(), "gusty")


def test_random_disturbances_bounded_and_zero_mean_over_a_million_draws() -> None:
    bounds = DisturbanceBounds(w_u_max=5e-6, w_x_max=2e-6)
    n = 1_000_000

    w_u, w_x = DisturbanceProcess(bounds, "random", seed=12).draw_batch(n)

    for draws, bound in ((w_u, bounds.w_u_max), (w_x, bounds.w_x_max)):
        assert np.linalg.norm(draws, axis=1).max() <= bound * (1 + 1e-12)
        # trace of the covariance of the sample mean
        spread = math.sqrt(np.sum(draws.var(axis=0)) / n)
        assert np.linalg.norm(draws.mean(axis=0)) < 3.0 * spread


def orbit_error(n_steps: int) -> float:
    mu, radius = 1.0, 1.0
    period = 2 * math.pi * math.sqrt(radius**3 / mu)
    start = SimState(0.0, [radius, 0.0, 0.0], [0.0, math.sqrt(mu / radius), 0.0])
    model = GravityModel.point_mass(mu)
    state = start
    for _ in range(n_steps):
        state = rk4_step(state, period / n_steps, np.zeros(3), np.zeros(3), np.zeros(3), model)
    return float(np.linalg.norm(state.x - start.x))


def test_rk4_error_shrinks_sixteenfold_when_dt_halves() -> None:
    coarse = orbit_error(100)
    fine = orbit_error(200)

    assert 12.0 <= coarse / fine <= 20.0
