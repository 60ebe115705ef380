import math

import numpy as np
import pytest
import scipy.linalg

from rollguard.errors import DomainError, NonFiniteStateError
from rollguard.sysmodel import (ActuatorParams, ConstantNoise, ControlInput,
                                NoiseModel, RobotState, constant_roll,
                                eval_dynamics, gravity_at, smooth_ramp_roll,
                                step_rk4, wrap_angle)


def state(x=0.0, y=0.0, theta=0.0, omega=0.0, v=0.0):
    return RobotState(x, y, theta, omega, v)


class TestDynamics:
    def test_equilibrium(self, actuator):
        assert eval_dynamics(state(), ControlInput(0, 0), actuator) == (0,) * 5

    def test_direct_substitution_speed_loop(self):
        params = ActuatorParams(tau_v=2.0, tau_omega=1.0)
        dx = eval_dynamics(state(v=1.0), ControlInput(1.0, 0.0), params)
        assert dx[4] == pytest.approx(-2.0 * 1.0 + 2.0 * 1.0)
        assert dx[0] == pytest.approx(1.0)

    def test_direct_substitution_heading(self):
        params = ActuatorParams(tau_v=2.0, tau_omega=1.0)
        dx = eval_dynamics(state(theta=math.pi / 2, omega=0.5, v=2.0),
                           ControlInput(0.0, 0.0), params)
        assert dx[1] == pytest.approx(2.0)
        assert dx[3] == pytest.approx(-0.5)

    def test_rejects_non_finite(self, actuator):
        with pytest.raises(DomainError):
            eval_dynamics(state(v=math.nan), ControlInput(0, 0), actuator)
        with pytest.raises(DomainError):
            eval_dynamics(state(), ControlInput(math.inf, 0), actuator)

    def test_affine_in_input(self, actuator):
        # superposition of the input-dependent part on random samples
        rng = np.random.default_rng(3)
        for _ in range(50):
            s = state(*rng.uniform(-2, 2, size=5))
            u1 = ControlInput(*rng.uniform(-3, 3, size=2))
            u2 = ControlInput(*rng.uniform(-3, 3, size=2))
            lam = rng.uniform()
            mix = ControlInput(lam * u1.u_v + (1 - lam) * u2.u_v,
                               lam * u1.u_omega + (1 - lam) * u2.u_omega)
            f0 = np.array(eval_dynamics(s, ControlInput(0, 0), actuator))
            g1 = np.array(eval_dynamics(s, u1, actuator)) - f0
            g2 = np.array(eval_dynamics(s, u2, actuator)) - f0
            gm = np.array(eval_dynamics(s, mix, actuator)) - f0
            assert np.allclose(gm, lam * g1 + (1 - lam) * g2, atol=1e-12)

    def test_geometric_convergence_to_command(self, actuator):
        u = ControlInput(1.5, -0.7)
        y = (0.0, 0.0, 0.0, 0.0, 0.0)
        dt = 0.005
        rhs = lambda t, yy: eval_dynamics(RobotState(*yy), u, actuator)
        t = 0.0
        for _ in range(int(10.0 / actuator.tau_v / dt)):
            y = step_rk4(y, t, dt, rhs)
            t += dt
        assert abs(y[4] - u.u_v) <= 1e-3 * abs(u.u_v) + 1e-9
        assert abs(y[3] - u.u_omega) <= 1e-3 * abs(u.u_omega) + 1e-9


class TestGravity:
    def test_flat_ground(self):
        gs = gravity_at(0.0, constant_roll(0.0))
        assert (gs.p_y, gs.p_z, gs.g_y0, gs.g_z0) == (0.0, -9.81, 0.0, -9.81)

    def test_slope_trig(self):
        gs = gravity_at(0.0, constant_roll(math.radians(27.0)))
        assert gs.g_y0 == pytest.approx(9.81 * math.sin(math.radians(27.0)))
        assert gs.g_z0 == pytest.approx(-9.81 * math.cos(math.radians(27.0)))
        assert gs.g_y0 == pytest.approx(4.4536, abs=1e-4)
        assert gs.g_z0 == pytest.approx(-8.7408, abs=1e-4)

    def test_additive_noise(self):
        gs = gravity_at(0.0, constant_roll(0.0), ConstantNoise(0.1, 0.1))
        assert gs.p_y == pytest.approx(0.1)
        assert gs.p_z == pytest.approx(-9.71)
        assert (gs.g_y0, gs.g_z0) == (0.0, -9.81)

    def test_magnitude_preserved(self):
        profile = smooth_ramp_roll(math.radians(27.0), 0.0, 2.0)
        for t in np.linspace(0.0, 3.0, 200):
            gs = gravity_at(t, profile)
            assert gs.g_y0 ** 2 + gs.g_z0 ** 2 == pytest.approx(9.81 ** 2, abs=1e-12)

    def test_upright_regime_guard(self):
        with pytest.raises(DomainError):
            gravity_at(0.0, constant_roll(math.radians(95.0)))

    def test_ramp_rate_matches_finite_difference(self):
        profile = smooth_ramp_roll(math.radians(27.0), 0.5, 2.0)
        eps = 1e-6
        for t in [0.7, 1.2, 1.9, 2.3]:
            fd = (profile.roll(t + eps) - profile.roll(t - eps)) / (2 * eps)
            assert profile.roll_rate(t) == pytest.approx(fd, abs=1e-6)


class TestRk4:
    def test_zero_field(self):
        y = (1.0, -2.0, 3.0)
        assert step_rk4(y, 0.0, 0.1, lambda t, yy: (0.0, 0.0, 0.0)) == y

    def test_scalar_decay(self):
        y = step_rk4((1.0,), 0.0, 0.02, lambda t, yy: (-yy[0],))
        assert y[0] == pytest.approx(0.980198673, abs=1e-9)
        assert y[0] == pytest.approx(math.exp(-0.02), abs=1e-9)

    def test_linear_system_vs_matrix_exponential(self):
        A = np.array([[0.0, 1.0], [-2.0, -0.4]])
        rhs = lambda t, yy: tuple(A @ yy)
        y = (1.0, -0.5)
        t, dt = 0.0, 0.02
        for _ in range(50):
            y = step_rk4(y, t, dt, rhs)
            t += dt
        exact = scipy.linalg.expm(A) @ np.array([1.0, -0.5])
        assert np.linalg.norm(np.array(y) - exact) <= 1e-7 * np.linalg.norm(exact)

    def test_order(self):
        # halving dt cuts the error vs a dt/64 reference by >= 12x
        rhs = lambda t, yy: (math.sin(t) - 0.5 * yy[0] ** 2 + 0.2 * yy[1], -yy[0])

        def integrate(dt, t_end=1.0):
            y, t = (0.3, -0.2), 0.0
            for _ in range(int(round(t_end / dt))):
                y = step_rk4(y, t, dt, rhs)
                t += dt
            return np.array(y)

        ref = integrate(0.02 / 64)
        err1 = np.linalg.norm(integrate(0.02) - ref)
        err2 = np.linalg.norm(integrate(0.01) - ref)
        assert err1 / err2 >= 12.0

    def test_non_finite_aborts(self):
        with pytest.raises(NonFiniteStateError):
            step_rk4((1.0,), 0.0, 1.0, lambda t, yy: (1e308 * (1 + yy[0]),))

    def test_rejects_bad_dt(self):
        with pytest.raises(DomainError):
            step_rk4((1.0,), 0.0, 0.0, lambda t, yy: (0.0,))


class TestNoiseModel:
    def test_sup_norm_exact_by_construction(self):
        noise = NoiseModel(v_inf=0.05, rate=50.0, horizon=2.0, seed=7)
        for t in np.linspace(0.0, 2.0, 1000):
            ny, nz = noise.sample(float(t))
            assert abs(ny) <= 0.05 + 1e-15
            assert abs(nz) <= 0.05 + 1e-15

    def test_zero_amplitude(self):
        noise = NoiseModel(v_inf=0.0, rate=50.0, horizon=1.0, seed=1)
        assert noise.sample(0.4) == (0.0, 0.0)

    def test_deterministic_given_seed(self):
        a = NoiseModel(0.02, 50.0, 1.0, seed=3)
        b = NoiseModel(0.02, 50.0, 1.0, seed=3)
        assert [a.sample(t) for t in (0.0, 0.1, 0.7)] == \
               [b.sample(t) for t in (0.0, 0.1, 0.7)]

    def test_continuous_across_periods(self):
        noise = NoiseModel(0.05, 50.0, 1.0, seed=9, tau=0.004)
        for k in (1, 5, 17):
            before = noise.sample(k * 0.02 - 1e-9)[0]
            after = noise.sample(k * 0.02 + 1e-9)[0]
            assert before == pytest.approx(after, abs=1e-6)


def test_wrap_angle_range():
    for theta in np.linspace(-20.0, 20.0, 401):
        w = wrap_angle(float(theta))
        assert -math.pi < w <= math.pi
        assert math.cos(w) == pytest.approx(math.cos(theta), abs=1e-12)
        assert math.sin(w) == pytest.approx(math.sin(theta), abs=1e-12)
