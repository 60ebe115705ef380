"""Rollover constraints from the lateral zero-moment point, their
robustified forms, and assembly of affine-in-input constraint rows.

Sign conventions (asserted in tests):
  - body z up, so the normal gravity component g_z is negative while the
    robot is upright; the lateral tip-point is y_zmp = (v*omega - g_y) *
    cg_height / g_z;
  - h1 guards the +y track edge, h2 the -y edge; h >= 0 for both is
    algebraically equivalent to |y_zmp| <= half_width whenever g_z < 0.

Everything here is pure evaluation and safe to use concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .differentiator import DifferentiatorBank, hgo_rates
from .errors import DomainError, SingularityError, StaleMeasurementError
from .sysmodel import ActuatorParams, RobotState

_SIGNS = {"h1": 1.0, "h2": -1.0}


def _sign_of(which: str) -> float:
    try:
        return _SIGNS[which]
    except KeyError:
        raise DomainError(f"unknown barrier {which!r}; expected 'h1' or 'h2'") from None


@dataclass(frozen=True)
class GeometryParams:
    half_width: float      # b, m
    cg_height: float       # m, center of mass above ground
    mass: float = 40.0
    inertia_x: float = 0.8
    inertia_y: float = 1.1
    inertia_z: float = 1.4

    def __post_init__(self):
        if not (self.half_width > 0.0 and self.cg_height > 0.0 and self.mass > 0.0):
            raise DomainError("geometry parameters must be positive")

    @property
    def width_ratio(self) -> float:
        return self.half_width / self.cg_height


@dataclass(frozen=True)
class AlphaLinear:
    """Linear class-K rate alpha(r) = rate * r."""

    rate: float

    def __post_init__(self):
        if self.rate <= 0.0:
            raise DomainError("alpha rate must be positive")

    def __call__(self, r: float) -> float:
        return self.rate * r


def param_gradient(which: str, geom: GeometryParams) -> tuple[float, float]:
    """d h / d (g_y, g_z); both constraints are affine in the gravity pair."""
    sign = _sign_of(which)
    return (-sign, -geom.width_ratio)


def lipschitz_gain(geom: GeometryParams) -> float:
    """Smallest Lipschitz constant of h in the gravity pair w.r.t. the
    Euclidean norm; shared by h1 and h2."""
    return math.hypot(1.0, geom.width_ratio)


def zmp_lateral(v: float, omega: float, g_y: float, g_z: float,
                geom: GeometryParams) -> float:
    """Lateral tip-point coordinate, m."""
    if abs(g_z) < 1e-6:
        raise SingularityError("normal gravity component ~ 0; tip point undefined")
    return (v * omega * geom.cg_height - g_y * geom.cg_height) / g_z


def zmp_lateral_full(y_acc_body: float, z_acc_body: float, roll_acc: float,
                     pitch_rate: float, omega: float, g_y: float, g_z: float,
                     geom: GeometryParams) -> float:
    """General moment-balance tip point with explicit angular terms.

    Reduces to zmp_lateral with y_acc_body = -v*omega and the angular terms
    zero; kept for cross-checking that simplification.
    """
    denom = geom.mass * (z_acc_body + g_z)
    if abs(denom) < 1e-6 * geom.mass:
        raise SingularityError("net normal force ~ 0; tip point undefined")
    gyro = geom.inertia_x * roll_acc + (geom.inertia_y - geom.inertia_z) * pitch_rate * omega
    num = (-geom.mass * y_acc_body * geom.cg_height
           - geom.mass * g_y * geom.cg_height - gyro)
    return num / denom


def eval_h(which: str, v: float, omega: float, g_y: float, g_z: float,
           geom: GeometryParams) -> float:
    """Rollover constraint value; h1 + h2 = -2 * width_ratio * g_z always."""
    sign = _sign_of(which)
    return sign * v * omega - geom.width_ratio * g_z - sign * g_y


@dataclass(frozen=True)
class BarrierEval:
    """One constraint evaluated at one instant.

    drift is the full input-independent part of the robustified constraint
    derivative (robot drift, estimator drift, and the envelope-rate term);
    input_row is the coefficient of the commanded input (u_v, u_omega), so
    d/dt h_rob = drift + input_row . u along the augmented flow.
    """

    h: float
    h_rob: float
    grad_x: tuple[float, float, float, float, float]
    dh_dp: tuple[float, float]
    drift: float
    input_row: tuple[float, float]


@dataclass(frozen=True)
class ConstraintRow:
    """Affine inequality a . u >= beta on the commanded input."""

    a: tuple[float, float]
    beta: float
    label: str


def eval_barrier(which: str, state: RobotState, est: tuple[float, float],
                 geom: GeometryParams, actuator: ActuatorParams,
                 est_rate: tuple[float, float] = (0.0, 0.0),
                 env_value: float = 0.0, env_rate: float = 0.0) -> BarrierEval:
    """Evaluate one constraint at the gravity estimates `est`, robustified
    by the aggregated error envelope: h_rob = h(est) - lipschitz * env_value.

    `est_rate` is the time derivative of the value estimates along the
    estimator flow (rate estimate plus innovation).
    """
    if env_value < 0.0:
        raise DomainError("envelope value must be nonnegative")
    sign = _sign_of(which)
    ratio = geom.width_ratio
    lip = lipschitz_gain(geom)
    h = sign * state.v * state.omega - ratio * est[1] - sign * est[0]
    dh_domega = sign * state.v
    dh_dv = sign * state.omega
    drift = (dh_domega * (-actuator.tau_omega * state.omega)
             + dh_dv * (-actuator.tau_v * state.v)
             - sign * est_rate[0] - ratio * est_rate[1]
             - lip * env_rate)
    return BarrierEval(
        h=h,
        h_rob=h - lip * env_value,
        grad_x=(0.0, 0.0, 0.0, dh_domega, dh_dv),
        dh_dp=(-sign, -ratio),
        drift=drift,
        input_row=(dh_dv * actuator.tau_v, dh_domega * actuator.tau_omega),
    )


@dataclass(frozen=True)
class DisturbanceBudget:
    """Time-varying bound on the disturbance projected onto the constraint
    gradient: budget(t) = initial * exp(-decay * t) + floor."""

    initial: float = 0.0
    decay: float = 1.0
    floor: float = 0.0

    def __post_init__(self):
        if min(self.initial, self.decay, self.floor) < 0.0:
            raise DomainError("budget parameters must be nonnegative")

    def value(self, t: float) -> float:
        return self.initial * math.exp(-self.decay * t) + self.floor

    def rate(self, t: float) -> float:
        return -self.initial * self.decay * math.exp(-self.decay * t)


def build_constraint_row(which: str, mode: str, state: RobotState,
                         bank: DifferentiatorBank, measurements: tuple[float, float] | None,
                         t: float, v_inf: float, geom: GeometryParams,
                         actuator: ActuatorParams, alpha: AlphaLinear,
                         budget: DisturbanceBudget | None = None) -> ConstraintRow:
    """Assemble one affine row for the safety QP.

    mode 'envelope': enforce the robustified constraint including the
    envelope rate term,
        drift + a . u >= -alpha(h_rob).
    mode 'budget': the sufficient linear-rate form evaluated at the raw
    estimates, independent of the envelope,
        drift0 + a . u - alpha.rate * budget(t) >= -alpha(h).
    """
    if measurements is None:
        raise StaleMeasurementError("constraint row requires current measurements")
    if len(bank.channels) != 2:
        raise DomainError("expected one channel per gravity component")
    est = (bank.channels[0].value_est, bank.channels[1].value_est)
    est_rate = tuple(
        hgo_rates(ch, bank.hgo, p)[0] for ch, p in zip(bank.channels, measurements)
    )
    if mode == "envelope":
        env_value, env_rate = bank.envelope(t, v_inf)
        be = eval_barrier(which, state, est, geom, actuator, est_rate,
                          env_value, env_rate)
        beta = -alpha(be.h_rob) - be.drift
    elif mode == "budget":
        if budget is None:
            raise DomainError("budget mode requires a DisturbanceBudget")
        if alpha.rate < 1.0:
            raise DomainError("budget mode requires alpha rate >= 1")
        be = eval_barrier(which, state, est, geom, actuator, est_rate)
        beta = -alpha(be.h) + alpha.rate * budget.value(t) - be.drift
    else:
        raise DomainError(f"unknown row mode {mode!r}")
    return ConstraintRow(a=be.input_row, beta=beta, label=which)


def build_bd_row(which: str, state: RobotState, measurements: tuple[float, float],
                 rate_estimates: tuple[float, float], geom: GeometryParams,
                 actuator: ActuatorParams, alpha: AlphaLinear) -> ConstraintRow:
    """Baseline row: h at the raw measurements, with the parameter drift
    taken from a finite-difference derivative estimate. No robustification;
    noisy rate estimates feed straight into the inequality."""
    be = eval_barrier(which, state, measurements, geom, actuator, rate_estimates)
    return ConstraintRow(a=be.input_row, beta=-alpha(be.h) - be.drift, label=which)


@dataclass(frozen=True)
class CheckReport:
    name: str
    passed: bool
    first_violation_t: float | None
    min_margin: float
    points: int

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "first_violation_t": self.first_violation_t,
            "min_margin": self.min_margin,
            "points": self.points,
        }


_CHECK_TOL = 1e-12


def _grid_check(name: str, margin: Callable[[float], float], horizon: float,
                n: int) -> CheckReport:
    if n < 2 or horizon <= 0.0:
        raise DomainError("need a positive horizon and at least two grid points")
    first = None
    worst = math.inf
    for i in range(n):
        t = horizon * i / (n - 1)
        m = margin(t)
        if m < worst:
            worst = m
        if m < -_CHECK_TOL and first is None:
            first = t
    return CheckReport(name, first is None, first, worst, n)


def check_budget_schedule(budget: DisturbanceBudget, alpha: AlphaLinear,
                          horizon: float, n: int = 501) -> CheckReport:
    """Self-consistency of the budget schedule: the margin may shrink no
    faster than the linear rate restores it,
        -budget_rate(t) + budget(t) <= alpha(budget(t)).
    """
    def margin(t: float) -> float:
        return alpha(budget.value(t)) + budget.rate(t) - budget.value(t)

    return _grid_check("budget_schedule", margin, horizon, n)


def check_envelope_budget(lip: float, env_value: Callable[[float], float],
                          env_rate: Callable[[float], float],
                          budget: DisturbanceBudget, alpha: AlphaLinear,
                          horizon: float, n: int = 501) -> CheckReport:
    """Envelope/budget compatibility for the robustified constraint:
        -lip * env_rate(t) + budget(t) <= alpha(lip * env_value(t)).
    """
    def margin(t: float) -> float:
        return alpha(lip * env_value(t)) + lip * env_rate(t) - budget.value(t)

    return _grid_check("envelope_budget", margin, horizon, n)


def check_envelope_decay(bank: DifferentiatorBank, alpha: AlphaLinear,
                         horizon: float, v_inf: float, n: int = 501) -> CheckReport:
    """Premise of the budget-mode row: alpha rate >= 1 and every channel
    envelope decaying at least at that rate, env_rate <= -alpha(env)."""
    def margin(t: float) -> float:
        vals = bank.envelope_values(t, v_inf)
        rates = bank.envelope_rates(t)
        return min(-r - alpha(m) for m, r in zip(vals, rates))

    report = _grid_check("envelope_decay", margin, horizon, n)
    if alpha.rate < 1.0:
        return CheckReport(report.name, False, 0.0, report.min_margin, report.points)
    return report


@dataclass(frozen=True)
class CandidateReport:
    points: int
    gated: int
    violations: tuple[dict, ...]

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"points": self.points, "gated": self.gated,
                "violations": list(self.violations), "passed": self.passed}


def verify_cbf_candidate(which: str, v_grid: Sequence[float],
                         omega_grid: Sequence[float], roll_grid: Sequence[float],
                         geom: GeometryParams, actuator: ActuatorParams,
                         alpha: AlphaLinear, input_box=None,
                         gravity: float = 9.81) -> CandidateReport:
    """Audit of the constraint over an operating grid: wherever the input
    direction vanishes, the drift alone must satisfy the rate condition.
    Necessary, not sufficient, once inputs are bounded; `input_box` is
    recorded for context only.
    """
    sign = _sign_of(which)
    violations = []
    points = 0
    gated = 0
    for phi in roll_grid:
        g_y = gravity * math.sin(phi)
        g_z = -gravity * math.cos(phi)
        for v in v_grid:
            for omega in omega_grid:
                points += 1
                row_norm = math.hypot(actuator.tau_v * omega, actuator.tau_omega * v)
                if row_norm >= 1e-8 * (1.0 + math.hypot(v, omega)):
                    continue
                gated += 1
                h = eval_h(which, v, omega, g_y, g_z, geom)
                drift = -sign * (actuator.tau_v + actuator.tau_omega) * v * omega
                if drift < -alpha(h) - 1e-12:
                    violations.append({"v": v, "omega": omega, "roll": phi,
                                       "h": h, "drift": drift})
    return CandidateReport(points=points, gated=gated, violations=tuple(violations))
