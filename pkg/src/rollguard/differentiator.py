"""Derivative estimation for noisy slope-gravity signals.

Each measured channel p(t) = p0(t) + v(t), |v| <= v_inf, is differentiated
by a high-gain observer

    value_est_dot = rate_est + k1 * ell * (p - value_est)
    rate_est_dot  = k2 * ell^2 * (p - value_est)

whose estimation error obeys a certified envelope

    M(t) = transient_gain * exp(-decay_rate * t) * e0_bound
           + noise_gain * v_inf.

`calibrate_envelope` produces coefficients that make the envelope a sound
upper bound on the error norm for every admissible noise realization and
every true signal whose second derivative stays within the configured
bound. Channel envelopes are aggregated with a log-sum-exp smooth maximum.

A three-point backward difference is included as the naive baseline; it is
exact on quadratics and badly noise-amplifying, which is the point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class HgoParams:
    """Observer design coefficients; k1, k2 > 0 keeps the error dynamics
    Hurwitz for any positive high-gain parameter ell."""

    k1: float = 2.0
    k2: float = 1.0
    ell: float = 50.0

    def __post_init__(self):
        if not (self.k1 > 0.0 and self.k2 > 0.0 and self.ell > 0.0):
            raise DomainError("HGO parameters must be positive")


@dataclass(frozen=True)
class EnvelopeCoeffs:
    transient_gain: float
    decay_rate: float
    noise_gain: float

    def __post_init__(self):
        if min(self.transient_gain, self.decay_rate, self.noise_gain) < 0.0:
            raise DomainError("envelope coefficients must be nonnegative")


@dataclass
class DiffChannel:
    """Estimator state plus envelope data for one measured channel."""

    value_est: float = 0.0
    rate_est: float = 0.0
    e0_bound: float = 0.0
    coeffs: EnvelopeCoeffs = field(default_factory=lambda: EnvelopeCoeffs(0.0, 1.0, 0.0))


@dataclass
class DifferentiatorBank:
    """Channels differentiated separately with one shared observer design."""

    channels: tuple[DiffChannel, ...]
    hgo: HgoParams
    sharpness: float = 100.0

    def __post_init__(self):
        if not self.channels:
            raise DomainError("bank needs at least one channel")
        if self.sharpness <= 0.0:
            raise DomainError("sharpness must be positive")

    def envelope_values(self, t: float, v_inf: float) -> list[float]:
        return [error_envelope(ch, t, v_inf) for ch in self.channels]

    def envelope_rates(self, t: float) -> list[float]:
        return [error_envelope_rate(ch, t) for ch in self.channels]

    def envelope(self, t: float, v_inf: float) -> tuple[float, float]:
        """Aggregated (value, rate) of the smooth maximum over channels."""
        vals = self.envelope_values(t, v_inf)
        rates = self.envelope_rates(t)
        return (smooth_max(vals, self.sharpness),
                smooth_max_rate(vals, rates, self.sharpness))


def hgo_rates(channel: DiffChannel, params: HgoParams, p: float) -> tuple[float, float]:
    """Time derivatives of (value_est, rate_est) for one measurement p.
    Integration is owned by the caller as part of the augmented state."""
    innov = p - channel.value_est
    return (channel.rate_est + params.k1 * params.ell * innov,
            params.k2 * params.ell * params.ell * innov)


def error_envelope(channel: DiffChannel, t: float, v_inf: float) -> float:
    if t < 0.0:
        raise DomainError("envelope is defined for t >= 0")
    c = channel.coeffs
    return (c.transient_gain * math.exp(-c.decay_rate * t) * channel.e0_bound
            + c.noise_gain * v_inf)


def error_envelope_rate(channel: DiffChannel, t: float) -> float:
    """Analytic time derivative of the envelope; always <= 0."""
    if t < 0.0:
        raise DomainError("envelope is defined for t >= 0")
    c = channel.coeffs
    return -c.transient_gain * c.decay_rate * math.exp(-c.decay_rate * t) * channel.e0_bound


def smooth_max(values, sharpness: float) -> float:
    """Log-sum-exp upper approximation of max(values).

    Satisfies max <= result <= max + ln(len(values)) / sharpness. Computed
    with the max-shift trick so large inputs cannot overflow.
    """
    if sharpness <= 0.0:
        raise DomainError("sharpness must be positive")
    vals = list(values)
    if not vals:
        raise DomainError("smooth_max of an empty list")
    m = max(vals)
    acc = sum(math.exp(sharpness * (v - m)) for v in vals)
    return m + math.log(acc) / sharpness


def smooth_max_rate(values, rates, sharpness: float) -> float:
    """Chain rule through the smooth maximum: convex softmax weights applied
    to the channel rates."""
    if sharpness <= 0.0:
        raise DomainError("sharpness must be positive")
    vals = list(values)
    rts = list(rates)
    if len(vals) != len(rts):
        raise DomainError("values and rates length mismatch")
    if not vals:
        raise DomainError("smooth_max_rate of an empty list")
    m = max(vals)
    ws = [math.exp(sharpness * (v - m)) for v in vals]
    total = sum(ws)
    return sum(w * r for w, r in zip(ws, rts)) / total


@dataclass
class BackwardDiffWindow:
    """Last three samples of one channel at a fixed sampling period."""

    period: float
    p_n: float = 0.0
    p_n1: float = 0.0
    p_n2: float = 0.0
    count: int = 0

    def __post_init__(self):
        if self.period <= 0.0:
            raise DomainError("sampling period must be positive")

    def push(self, p: float) -> None:
        self.p_n2 = self.p_n1
        self.p_n1 = self.p_n
        self.p_n = p
        self.count += 1

    @property
    def ready(self) -> bool:
        return self.count >= 3


def backward_diff(window: BackwardDiffWindow) -> float:
    """Three-point backward difference; returns 0 during the two-sample
    warm-up (the caller can test window.ready)."""
    if window.period <= 0.0:
        raise DomainError("sampling period must be positive")
    if not window.ready:
        return 0.0
    return (3.0 * window.p_n - 4.0 * window.p_n1 + window.p_n2) / (2.0 * window.period)


def error_dynamics_matrix(params: HgoParams) -> tuple[tuple[float, float], tuple[float, float]]:
    k1l = params.k1 * params.ell
    k2l2 = params.k2 * params.ell * params.ell
    return ((-k1l, 1.0), (-k2l2, 0.0))


def error_dynamics_eigenvalues(params: HgoParams) -> np.ndarray:
    k1l = params.k1 * params.ell
    k2l2 = params.k2 * params.ell * params.ell
    return np.roots([1.0, k1l, k2l2])


def _spectral_norm_2x2(a, b, c, d) -> float:
    # largest singular value of [[a, b], [c, d]]
    fro2 = a * a + b * b + c * c + d * d
    det = a * d - b * c
    gap = max(fro2 * fro2 - 4.0 * det * det, 0.0)
    return math.sqrt(0.5 * (fro2 + math.sqrt(gap)))


@lru_cache(maxsize=64)
def calibrate_envelope(params: HgoParams, v_inf: float, curvature_bound: float,
                       safety: float = 1.25) -> EnvelopeCoeffs:
    """Envelope coefficients that soundly bound the observer error.

    The error e = (value_est - p0, rate_est - p0_dot) obeys the linear
    dynamics e_dot = A e + B_v v(t) + B_p p0_ddot(t) with

        A = [[-k1 ell, 1], [-k2 ell^2, 0]],
        B_v = (k1 ell, k2 ell^2),  B_p = (0, -1).

    decay_rate is 0.9 of the slowest error eigenvalue. transient_gain
    covers the initial-condition response: sup_t ||exp(At)|| e^(decay*t).
    The forced response is bounded through the componentwise L1 norms of
    the impulse responses, which is the exact worst case over all inputs
    with |v| <= v_inf and |p0_ddot| <= curvature_bound; the curvature share
    is folded into noise_gain, so v_inf = 0 is only admissible for signals
    with zero curvature bound. Everything is multiplied by `safety` to
    absorb quadrature error.
    """
    if v_inf < 0.0 or curvature_bound < 0.0:
        raise DomainError("bounds must be nonnegative")
    if v_inf == 0.0 and curvature_bound > 0.0:
        raise DomainError(
            "v_inf = 0 leaves no envelope term to absorb the curvature "
            "residual; set a positive v_inf or a zero curvature bound")

    eigs = error_dynamics_eigenvalues(params)
    slowest = min(-eig.real for eig in eigs)
    fastest = max(-eig.real for eig in eigs)
    if slowest <= 0.0:
        raise DomainError("observer error dynamics are not Hurwitz")
    decay = 0.9 * slowest

    (a11, a12), (a21, a22) = error_dynamics_matrix(params)
    k1l, k2l2 = params.k1 * params.ell, params.k2 * params.ell * params.ell

    # exp(A*dt) by plain Taylor series; ||A dt|| is small so this is exact
    # to machine precision.
    dt = 0.01 / fastest
    e11, e12, e21, e22 = 1.0, 0.0, 0.0, 1.0
    t11, t12, t21, t22 = 1.0, 0.0, 0.0, 1.0
    for n in range(1, 20):
        s = dt / n
        n11 = (t11 * a11 + t12 * a21) * s
        n12 = (t11 * a12 + t12 * a22) * s
        n21 = (t21 * a11 + t22 * a21) * s
        n22 = (t21 * a12 + t22 * a22) * s
        t11, t12, t21, t22 = n11, n12, n21, n22
        e11 += t11
        e12 += t12
        e21 += t21
        e22 += t22

    horizon = 120.0 / slowest
    steps = int(math.ceil(horizon / dt))
    # transition matrix recursion Phi_{k+1} = exp(A dt) Phi_k
    p11, p12, p21, p22 = 1.0, 0.0, 0.0, 1.0
    sup_weighted = 1.0
    # trapezoid accumulators for integral |Phi(t) B| dt, componentwise
    bv1_prev, bv2_prev = abs(k1l * p11 + k2l2 * p12), abs(k1l * p21 + k2l2 * p22)
    bp1_prev, bp2_prev = abs(-p12), abs(-p22)
    gv1 = gv2 = gp1 = gp2 = 0.0
    t = 0.0
    for _ in range(steps):
        q11 = e11 * p11 + e12 * p21
        q12 = e11 * p12 + e12 * p22
        q21 = e21 * p11 + e22 * p21
        q22 = e21 * p12 + e22 * p22
        p11, p12, p21, p22 = q11, q12, q21, q22
        t += dt
        w = _spectral_norm_2x2(p11, p12, p21, p22) * math.exp(decay * t)
        if w > sup_weighted:
            sup_weighted = w
        bv1 = abs(k1l * p11 + k2l2 * p12)
        bv2 = abs(k1l * p21 + k2l2 * p22)
        bp1 = abs(-p12)
        bp2 = abs(-p22)
        gv1 += 0.5 * dt * (bv1 + bv1_prev)
        gv2 += 0.5 * dt * (bv2 + bv2_prev)
        gp1 += 0.5 * dt * (bp1 + bp1_prev)
        gp2 += 0.5 * dt * (bp2 + bp2_prev)
        bv1_prev, bv2_prev, bp1_prev, bp2_prev = bv1, bv2, bp1, bp2

    c1 = safety * sup_weighted
    steady1 = gv1 * v_inf + gp1 * curvature_bound
    steady2 = gv2 * v_inf + gp2 * curvature_bound
    steady = math.hypot(steady1, steady2)
    if v_inf > 0.0:
        c3 = safety * steady / v_inf
    else:
        # curvature_bound is zero here; keep the noise gain meaningful
        c3 = safety * math.hypot(gv1, gv2)
    return EnvelopeCoeffs(transient_gain=c1, decay_rate=decay, noise_gain=c3)
