"""Planar robot model with first-order actuator lag, slope-driven body-frame
gravity signals, disturbance injection, and fixed-step integration.

State ordering used throughout: (x, y, theta, omega, v)

    x_dot     = v cos(theta)
    y_dot     = v sin(theta)
    theta_dot = omega
    omega_dot = -tau_omega * omega + tau_omega * u_omega + d_omega
    v_dot     = -tau_v * v + tau_v * u_v + d_v

All functions here are pure; independent scenarios can run concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, NonFiniteStateError

GRAVITY = 9.81


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    return theta - 2.0 * math.pi * math.ceil((theta - math.pi) / (2.0 * math.pi))


@dataclass(frozen=True)
class RobotState:
    """Planar pose plus yaw rate and forward speed."""

    x: float
    y: float
    theta: float  # rad; the stepping loop wraps to (-pi, pi]
    omega: float  # rad/s
    v: float      # m/s

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.x, self.y, self.theta, self.omega, self.v)


@dataclass(frozen=True)
class ControlInput:
    u_v: float      # commanded speed, m/s
    u_omega: float  # commanded yaw rate, rad/s


@dataclass(frozen=True)
class ActuatorParams:
    """Inverse time constants of the speed and yaw-rate loops, 1/s."""

    tau_v: float
    tau_omega: float

    def __post_init__(self):
        if not (self.tau_v > 0.0 and self.tau_omega > 0.0):
            raise DomainError("actuator time constants must be positive")


@dataclass(frozen=True)
class TerrainProfile:
    """Body roll imposed by the slope as a function of time.

    `roll` must stay within (-pi/2, pi/2) over the horizon and be
    continuously differentiable within each piece; `roll_rate` is its
    analytic derivative (used only for post-hoc audits, never by the
    controller).
    """

    roll: Callable[[float], float]
    roll_rate: Callable[[float], float]
    gravity: float = GRAVITY


def constant_roll(angle: float, gravity: float = GRAVITY) -> TerrainProfile:
    return TerrainProfile(roll=lambda t: angle, roll_rate=lambda t: 0.0, gravity=gravity)


def smooth_ramp_roll(angle: float, start: float, duration: float,
                     gravity: float = GRAVITY) -> TerrainProfile:
    """Roll ramping 0 -> angle over [start, start+duration] along a quintic
    smoothstep, so the ramp is twice continuously differentiable."""
    if duration <= 0.0:
        raise DomainError("ramp duration must be positive")

    def roll(t: float) -> float:
        u = (t - start) / duration
        if u <= 0.0:
            return 0.0
        if u >= 1.0:
            return angle
        return angle * (u * u * u * (10.0 + u * (-15.0 + 6.0 * u)))

    def roll_rate(t: float) -> float:
        u = (t - start) / duration
        if u <= 0.0 or u >= 1.0:
            return 0.0
        return angle * 30.0 * u * u * (1.0 + u * (-2.0 + u)) / duration

    return TerrainProfile(roll=roll, roll_rate=roll_rate, gravity=gravity)


@dataclass(frozen=True)
class GravitySignal:
    """Noise-free body-frame gravity components and the additive noise
    realized at one instant. Truth fields are for post-hoc evaluation only."""

    g_y0: float   # true lateral component, m/s^2
    g_z0: float   # true normal component, m/s^2 (negative while upright)
    v_y: float
    v_z: float
    v_inf: float  # sup-norm bound the noise respects

    @property
    def p_y(self) -> float:
        return self.g_y0 + self.v_y

    @property
    def p_z(self) -> float:
        return self.g_z0 + self.v_z


class ConstantNoise:
    """Fixed additive offset on both channels; handy in tests."""

    def __init__(self, v_y: float, v_z: float):
        self.v_y = v_y
        self.v_z = v_z
        self.v_inf = max(abs(v_y), abs(v_z))

    def sample(self, t: float) -> tuple[float, float]:
        return (self.v_y, self.v_z)


class NoiseModel:
    """Seeded measurement noise with an exact sup-norm bound.

    Uniform targets in [-v_inf, v_inf] are drawn once per control period and
    fed through a first-order low-pass, whose piecewise solution

        n(t) = target_k + (n(t_k) - target_k) * exp(-(t - t_k) / tau)

    is evaluated in closed form. Every value is a convex combination of the
    previous state and the target, so |n(t)| <= v_inf by construction, and
    the signal is continuous and deterministic in t given the seed.
    """

    def __init__(self, v_inf: float, rate: float, horizon: float, seed: int,
                 tau: float = 0.005):
        if v_inf < 0.0:
            raise DomainError("v_inf must be nonnegative")
        if tau <= 0.0 or rate <= 0.0 or horizon <= 0.0:
            raise DomainError("tau, rate and horizon must be positive")
        self.v_inf = v_inf
        self.tau = tau
        self.period = 1.0 / rate
        n = int(math.ceil(horizon * rate)) + 2
        rng = np.random.default_rng(seed)
        self._targets = rng.uniform(-v_inf, v_inf, size=(n, 2))
        decay = math.exp(-self.period / tau)
        states = np.empty((n + 1, 2))
        states[0] = 0.0
        for k in range(n):
            states[k + 1] = self._targets[k] + (states[k] - self._targets[k]) * decay
        self._states = states
        self._n = n

    def sample(self, t: float) -> tuple[float, float]:
        k = min(max(int(t / self.period), 0), self._n - 1)
        w = math.exp(-(t - k * self.period) / self.tau)
        ty, tz = self._targets[k]
        sy, sz = self._states[k]
        return (float(ty + (sy - ty) * w), float(tz + (sz - tz) * w))


@dataclass(frozen=True)
class DisturbanceModel:
    """Additive disturbances on the omega_dot and v_dot channels with
    per-channel envelopes. Position and heading carry no disturbance: they
    do not enter the rollover constraints, so the projected effect of any
    disturbance on safety is fully captured by these two channels."""

    d_omega: Callable[[float], float]
    d_v: Callable[[float], float]
    bound_omega: Callable[[float], float]
    bound_v: Callable[[float], float]

    def sample(self, t: float) -> tuple[float, float]:
        return (self.d_omega(t), self.d_v(t))


def no_disturbance() -> DisturbanceModel:
    zero = lambda t: 0.0
    return DisturbanceModel(zero, zero, zero, zero)


def sinusoid_disturbance(omega_amp: float, omega_freq: float,
                         v_amp: float, v_freq: float,
                         omega_phase: float = 0.0, v_phase: float = 0.0) -> DisturbanceModel:
    wo = 2.0 * math.pi * omega_freq
    wv = 2.0 * math.pi * v_freq
    return DisturbanceModel(
        d_omega=lambda t: omega_amp * math.sin(wo * t + omega_phase),
        d_v=lambda t: v_amp * math.sin(wv * t + v_phase),
        bound_omega=lambda t: abs(omega_amp),
        bound_v=lambda t: abs(v_amp),
    )


def gravity_at(t: float, profile: TerrainProfile, noise=None) -> GravitySignal:
    """Body-frame gravity at time t: noisy measurements plus truth.

    Convention: the body z axis points up, so g_z0 < 0 while the robot is
    on its tracks. |roll| must stay below pi/2.
    """
    phi = profile.roll(t)
    if abs(phi) >= 0.5 * math.pi:
        raise DomainError(f"terrain roll {phi} rad leaves the upright regime")
    g = profile.gravity
    g_y0 = g * math.sin(phi)
    g_z0 = -g * math.cos(phi)
    if noise is None:
        return GravitySignal(g_y0, g_z0, 0.0, 0.0, 0.0)
    v_y, v_z = noise.sample(t)
    return GravitySignal(g_y0, g_z0, v_y, v_z, noise.v_inf)


def eval_dynamics(state: RobotState, u: ControlInput, params: ActuatorParams,
                  d: tuple[float, float] = (0.0, 0.0)) -> tuple[float, ...]:
    """Right-hand side of the robot dynamics; returns the 5-vector
    (x_dot, y_dot, theta_dot, omega_dot, v_dot)."""
    vals = (state.x, state.y, state.theta, state.omega, state.v,
            u.u_v, u.u_omega, d[0], d[1])
    for val in vals:
        if not math.isfinite(val):
            raise DomainError("non-finite dynamics input")
    return (
        state.v * math.cos(state.theta),
        state.v * math.sin(state.theta),
        state.omega,
        -params.tau_omega * state.omega + params.tau_omega * u.u_omega + d[0],
        -params.tau_v * state.v + params.tau_v * u.u_v + d[1],
    )


def step_rk4(y: Sequence[float], t: float, dt: float,
             rhs: Callable[[float, Sequence[float]], Sequence[float]]) -> tuple[float, ...]:
    """One classical Runge-Kutta step of y' = rhs(t, y).

    The input (if any) must be held constant inside rhs over the step; the
    caller owns the zero-order hold. Raises NonFiniteStateError if the step
    leaves the finite domain.
    """
    if dt <= 0.0:
        raise DomainError("dt must be positive")
    k1 = rhs(t, y)
    h2 = 0.5 * dt
    k2 = rhs(t + h2, tuple(yi + h2 * ki for yi, ki in zip(y, k1)))
    k3 = rhs(t + h2, tuple(yi + h2 * ki for yi, ki in zip(y, k2)))
    k4 = rhs(t + dt, tuple(yi + dt * ki for yi, ki in zip(y, k3)))
    sixth = dt / 6.0
    out = tuple(yi + sixth * (a + 2.0 * (b + c) + d)
                for yi, a, b, c, d in zip(y, k1, k2, k3, k4))
    for val in out:
        if not math.isfinite(val):
            raise NonFiniteStateError(f"non-finite state after step at t={t}")
    return out
