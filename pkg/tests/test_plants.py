"""Tests for the simulated plants, schedules, and sensors."""

import numpy as np
import pytest
from scipy.linalg import expm

from koopman_adapt.errors import NonFiniteState, UnknownParameter
from koopman_adapt.plants import (
    ChangeSchedule,
    PlantState,
    apply_schedule,
    make_linear2nd,
    make_pendulum,
    measure,
    step_plant,
)


def pendulum_energy(plant, x):
    p = plant.params
    theta, omega = x
    return (0.5 * p["m"] * p["l"] ** 2 * omega ** 2
            + p["m"] * p["g"] * p["l"] * (1.0 - np.cos(theta)))


class TestStepPlant:
    def test_stable_equilibrium_fixed_point(self):
        plant = make_pendulum(dt=0.01, substeps=4)
        state = PlantState(np.zeros(2))
        out = step_plant(plant, state, [0.0])
        np.testing.assert_array_equal(out.x, np.zeros(2))
        assert out.t == pytest.approx(0.01)

    def test_energy_conservation_vs_fine_reference(self):
        """Frictionless unforced pendulum: coarse-step energy drift over
        1000 steps stays within 1e-6 relative of a 10x-finer reference."""
        coarse = make_pendulum(d=0.0, c=0.0, dt=1e-3, substeps=1)
        fine = make_pendulum(d=0.0, c=0.0, dt=1e-3, substeps=10)
        x0 = np.array([1.2, 0.0])
        e0 = pendulum_energy(coarse, x0)
        s_c = PlantState(x0)
        s_f = PlantState(x0)
        for _ in range(1000):
            s_c = step_plant(coarse, s_c, [0.0])
            s_f = step_plant(fine, s_f, [0.0])
        e_c = pendulum_energy(coarse, s_c.x)
        e_f = pendulum_energy(fine, s_f.x)
        assert abs(e_c - e_f) / e0 < 1e-6

    def test_linear_matches_exact_zoh_discretization(self):
        A = np.array([[0.0, 1.0], [-4.0, -0.8]])
        B = np.array([[0.0], [1.5]])
        plant = make_linear2nd(A, B, dt=1e-3, substeps=1)
        # exact ZOH: matrix exponential of the augmented system
        M = expm(np.block([[A, B], [np.zeros((1, 3))]]) * plant.dt)
        Ad, Bd = M[:2, :2], M[:2, 2:]
        rng = np.random.default_rng(0)
        for _ in range(10):
            x = rng.standard_normal(2)
            u = rng.standard_normal(1)
            stepped = step_plant(plant, PlantState(x), u)
            np.testing.assert_allclose(stepped.x, Ad @ x + Bd @ u.reshape(-1),
                                       atol=1e-8)

    def test_rk4_order_four(self):
        """Halving the substep shrinks the one-step error about 16x."""
        x0 = np.array([1.3, 2.0])
        errors = []
        reference = make_pendulum(d=0.0, dt=0.1, substeps=256)
        ref = step_plant(reference, PlantState(x0), [0.0]).x
        for substeps in (1, 2):
            plant = make_pendulum(d=0.0, dt=0.1, substeps=substeps)
            got = step_plant(plant, PlantState(x0), [0.0]).x
            errors.append(np.linalg.norm(got - ref))
        ratio = errors[0] / errors[1]
        assert 12.0 <= ratio <= 20.0

    def test_nonfinite_state_raises(self):
        plant = make_linear2nd(np.array([[100.0, 0.0], [0.0, 100.0]]),
                               np.zeros((2, 1)), dt=1.0, substeps=1)
        state = PlantState(np.array([1e307, 1e307]))
        with pytest.raises(NonFiniteState):
            step_plant(plant, state, [0.0])

    def test_determinism_bitwise(self):
        plant = make_pendulum(dt=0.01, substeps=3)
        rng = np.random.default_rng(1)
        us = rng.standard_normal((1, 50))
        def run():
            s = PlantState(np.array([0.1, 0.0]))
            xs = []
            for k in range(50):
                s = step_plant(plant, s, us[:, k])
                xs.append(s.x)
            return np.stack(xs)
        np.testing.assert_array_equal(run(), run())


class TestSchedule:
    def test_empty_schedule_identity(self):
        plant = make_pendulum()
        assert apply_schedule(plant, ChangeSchedule(), 100.0) is plant

    def test_boundary_inclusive(self):
        plant = make_pendulum(m=0.4)
        schedule = ChangeSchedule(((5.0, "m", 0.8),))
        assert apply_schedule(plant, schedule, 4.9).params["m"] == 0.4
        assert apply_schedule(plant, schedule, 5.0).params["m"] == 0.8

    def test_later_event_wins(self):
        plant = make_pendulum(d=0.1)
        schedule = ChangeSchedule(((1.0, "d", 0.2), (2.0, "d", 0.3)))
        assert apply_schedule(plant, schedule, 1.5).params["d"] == 0.2
        assert apply_schedule(plant, schedule, 2.0).params["d"] == 0.3

    def test_idempotent(self):
        plant = make_pendulum()
        schedule = ChangeSchedule(((1.0, "m", 0.9),))
        once = apply_schedule(plant, schedule, 3.0)
        twice = apply_schedule(once, schedule, 3.0)
        assert once.params == twice.params

    def test_unknown_parameter(self):
        plant = make_pendulum()
        with pytest.raises(UnknownParameter):
            apply_schedule(plant, ChangeSchedule(((0.0, "mass", 1.0),)), 1.0)

    def test_unsorted_rejected(self):
        with pytest.raises(ValueError):
            ChangeSchedule(((2.0, "m", 1.0), (1.0, "m", 2.0)))

    def test_next_event_time(self):
        schedule = ChangeSchedule(((1.0, "m", 1.0), (4.0, "d", 0.3)))
        assert schedule.next_event_time(0.0) == 1.0
        assert schedule.next_event_time(1.0) == 4.0
        assert schedule.next_event_time(10.0) == np.inf


class TestMeasure:
    def test_noise_free_exact(self):
        plant = make_pendulum(noise_y=0.0, noise_x=0.0)
        state = PlantState(np.array([0.3, -0.7]))
        x_meas, y_meas = measure(plant, state, np.random.default_rng(0))
        np.testing.assert_array_equal(x_meas, state.x)
        assert y_meas == 0.3

    def test_seeded_stream_reproducible(self):
        plant = make_pendulum(noise_y=0.01, noise_x=(0.01, 0.02))
        state = PlantState(np.array([0.5, 0.1]))
        a = measure(plant, state, np.random.default_rng(42))
        b = measure(plant, state, np.random.default_rng(42))
        np.testing.assert_array_equal(a[0], b[0])
        assert a[1] == b[1]

    def test_sample_variance_matches_config(self):
        plant = make_pendulum(noise_y=0.2, noise_x=0.0)
        state = PlantState(np.zeros(2))
        rng = np.random.default_rng(7)
        ys = np.array([measure(plant, state, rng)[1] for _ in range(100_000)])
        assert np.var(ys) == pytest.approx(0.04, rel=0.05)

    def test_output_coordinate_selectable(self):
        plant = make_pendulum(noise_y=0.0)
        state = PlantState(np.array([0.3, -0.7]))
        _, y = measure(plant, state, np.random.default_rng(0), output_coord=1)
        assert y == -0.7
