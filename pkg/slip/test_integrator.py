"""
Tests for the fixed-step RK4 integrator and event location.
"""

import math

import numpy as np
import pytest

from slip.errors import DomainError, EventNotFoundError, SingularityError, StepBudgetError
from slip.integrator import (
    Direction,
    EventSpec,
    IntegratorConfig,
    default_step,
    integrate,
    integrate_grid,
    integrate_to_event,
    locate_event,
    simulate,
    theta_crossing,
)
from slip.model import ModelParams, State, energy_series, initial_state, polar_system

P = ModelParams(alpha=0.4, U=1.0, V=0.1, K=12.0)
SPRING_COLUMNS = ("L", "L_rate")


def spring(t, y):
    return y[1], -(y[0] - 1.0)


def spring_error(h):
    traj = integrate(spring, (1.2, 0.0), 0.0, 2.0 * math.pi, IntegratorConfig(step=h), columns=SPRING_COLUMNS)
    L, L_rate = traj.states[-1]
    return abs(L - 1.2) + abs(L_rate)


class TestConfig:
    """Settings validation."""

    @pytest.mark.parametrize("kwargs", [{"step": 0.0}, {"step": -1e-3}, {"max_steps": 0}, {"l_min": 1.0}, {"l_min": 0.0}])
    def test_invalid(self, kwargs):
        with pytest.raises(DomainError):
            IntegratorConfig(**kwargs)

    def test_default_step(self):
        assert default_step(0.01) == pytest.approx(2e-4)
        assert default_step(1.0) == 1e-3

    def test_dict_round_trip(self):
        cfg = IntegratorConfig(step=2e-4, max_steps=10)
        assert IntegratorConfig.from_dict(cfg.to_dict()) == cfg

    def test_root_tol_must_be_positive(self):
        with pytest.raises(DomainError):
            EventSpec(lambda t, y: t, root_tol=0.0)


class TestIntegrate:
    """Fixed-step marching."""

    def test_lands_exactly_on_end(self):
        traj = integrate(spring, (1.2, 0.0), 0.0, 1.0, IntegratorConfig(step=0.3), columns=SPRING_COLUMNS)
        assert list(traj.times) == pytest.approx([0.0, 0.3, 0.6, 0.9, 1.0])
        assert traj.times[-1] == 1.0

    def test_harmonic_period(self):
        assert spring_error(2.0 * math.pi / 1000) < 1e-10

    def test_fourth_order(self):
        h = 2.0 * math.pi / 40
        ratio = spring_error(h) / spring_error(h / 2)
        assert 3.7 <= math.log2(ratio) <= 4.3

    def test_energy_drift(self):
        traj = simulate(P, 1.0, IntegratorConfig(step=1e-3))
        E = energy_series(traj)
        assert np.max(np.abs(E - E[0])) < 1e-8

    def test_energy_drift_fourth_order(self):
        def drift(h):
            E = energy_series(simulate(P, 1.8, IntegratorConfig(step=h)))
            return np.max(np.abs(E - E[0]))

        assert 13.0 <= drift(4e-3) / drift(2e-3) <= 19.0

    def test_step_halving_on_model(self):
        def endpoint(h):
            return simulate(P, 1.0, IntegratorConfig(step=h)).states[-1]

        reference = endpoint(1.25e-3)
        coarse = np.max(np.abs(endpoint(1e-2) - reference))
        fine = np.max(np.abs(endpoint(5e-3) - reference))
        assert 12.0 < coarse / fine < 20.0

    def test_deterministic(self):
        a = simulate(P, 0.5, IntegratorConfig(step=1e-3))
        b = simulate(P, 0.5, IntegratorConfig(step=1e-3))
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.times, b.times)

    def test_step_budget(self):
        with pytest.raises(StepBudgetError) as info:
            integrate(spring, (1.2, 0.0), 0.0, 1.0, IntegratorConfig(step=0.1, max_steps=3), columns=SPRING_COLUMNS)
        assert info.value.time == pytest.approx(0.3)

    def test_singularity_carries_last_good_state(self):
        def falling(t, y):
            if y[0] <= 0.5:
                raise SingularityError("below guard", time=t, state=y)
            return (-1.0,)

        with pytest.raises(SingularityError) as info:
            integrate(falling, (1.0,), 0.0, 1.0, IntegratorConfig(step=0.01), columns=("L",))
        assert info.value.state[0] > 0.5
        assert info.value.time < 0.5

    def test_empty_interval_rejected(self):
        with pytest.raises(DomainError):
            integrate(spring, (1.0, 0.0), 1.0, 1.0, columns=SPRING_COLUMNS)

    def test_accepts_state(self):
        traj = integrate(polar_system(P.K), initial_state(P), 0.0, 0.01, IntegratorConfig(step=1e-3))
        assert traj.state(0) == initial_state(P)

    def test_grid_output(self):
        grid = [0.0, 0.25, 0.7, 1.0]
        traj = integrate_grid(spring, (1.2, 0.0), grid, IntegratorConfig(step=1e-3), columns=SPRING_COLUMNS)
        assert list(traj.times) == grid
        assert traj.states[:, 0] == pytest.approx(1.0 + 0.2 * np.cos(grid), abs=1e-12)

    def test_simulate_zero_horizon(self):
        traj = simulate(P, 0.0)
        assert len(traj) == 1
        assert traj.state(0) == initial_state(P)


class TestEvents:
    """Sign-change detection and bisection."""

    def test_linear_event(self):
        event = EventSpec(lambda t, y: t - 0.5, Direction.RISING)
        t, state = locate_event(lambda t, y: (1.0,), (0.0,), 0.0, 1.0, event, IntegratorConfig(step=0.03), columns=("s",))
        assert t == pytest.approx(0.5, abs=1e-11)
        assert state[0] == pytest.approx(0.5, abs=1e-11)

    def test_direction_filter(self):
        event = EventSpec(lambda t, y: t - 0.5, Direction.FALLING)
        with pytest.raises(EventNotFoundError):
            locate_event(lambda t, y: (1.0,), (0.0,), 0.0, 1.0, event, IntegratorConfig(step=0.03), columns=("s",))

    def test_any_direction(self):
        event = EventSpec(lambda t, y: 0.5 - t, Direction.ANY)
        t, _ = locate_event(lambda t, y: (1.0,), (0.0,), 0.0, 1.0, event, IntegratorConfig(step=0.03), columns=("s",))
        assert t == pytest.approx(0.5, abs=1e-11)

    def test_takeoff_angle_near_contact_estimate(self):
        t, state = locate_event(polar_system(P.K), initial_state(P), 0.0, 5.0, theta_crossing(P.alpha), IntegratorConfig(step=1e-3))
        assert isinstance(state, State)
        assert abs(t - P.eps * math.pi) / (P.eps * math.pi) < 0.15
        assert state.theta == pytest.approx(P.alpha, abs=1e-10)

    def test_trajectory_ends_at_event(self):
        traj = integrate_to_event(polar_system(P.K), initial_state(P), 0.0, 5.0, theta_crossing(P.alpha), IntegratorConfig(step=1e-3), params=P)
        assert traj.theta[-1] == pytest.approx(P.alpha, abs=1e-10)
        assert np.all(traj.theta[:-1] < P.alpha)
        assert traj.times[-1] - traj.times[-2] <= 1e-3 + 1e-15

    def test_event_stable_under_step_refinement(self):
        def oscillator(t, y):
            return y[1], -y[0]

        event = EventSpec(lambda t, y: y[0] - 0.5, Direction.RISING)
        coarse, _ = locate_event(oscillator, (0.0, 1.0), 0.0, 2.0, event, IntegratorConfig(step=1e-3), columns=("x", "v"))
        fine, _ = locate_event(oscillator, (0.0, 1.0), 0.0, 2.0, event, IntegratorConfig(step=1e-4), columns=("x", "v"))
        assert coarse == pytest.approx(math.pi / 6, abs=1e-11)
        assert abs(coarse - fine) < 10 * event.root_tol

    def test_singularity_before_crossing_propagates(self):
        def collapsing(t, y):
            if y[0] <= 0.5:
                raise SingularityError("below guard", time=t, state=y)
            return (-1.0,)

        event = EventSpec(lambda t, y: y[0] - 0.2, Direction.FALLING)
        with pytest.raises(SingularityError):
            locate_event(collapsing, (1.0,), 0.0, 2.0, event, IntegratorConfig(step=0.01), columns=("L",))
