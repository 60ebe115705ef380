"""Scenario configuration: one flat record addressing every knob of a run,
loadable from an INI-style config file with strict key checking."""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass

from .barrier import AlphaLinear, DisturbanceBudget, GeometryParams
from .differentiator import (DiffChannel, DifferentiatorBank, HgoParams,
                             calibrate_envelope)
from .errors import DomainError
from .sysmodel import (ActuatorParams, DisturbanceModel, NoiseModel,
                       TerrainProfile, constant_roll, no_disturbance,
                       sinusoid_disturbance, smooth_ramp_roll)

FILTERS = ("none", "backward_diff", "const_margin", "envelope", "envelope_budget")


@dataclass(frozen=True)
class Scenario:
    """One simulation setup. The defaults are the critical slope scenario:
    the robot starts pointed up-slope while the terrain rolls to 27 degrees
    and the goal sits cross-slope below, so the goal-seeking controller
    commands a hard downhill turn exactly while the slope is steepest."""

    # timing
    horizon: float = 10.5
    control_rate: float = 50.0
    substeps: int = 4
    seed: int = 1
    # terrain
    terrain_profile: str = "ramp"          # ramp | constant
    roll_deg: float = 27.0
    ramp_start: float = 0.0
    ramp_duration: float = 2.0
    gravity: float = 9.81
    # measurement noise
    v_inf: float = 0.01
    noise_tau: float = 0.005
    # disturbance on the omega_dot / v_dot channels
    disturbance_kind: str = "sinusoid"     # none | sinusoid
    dist_omega_amp: float = 0.3
    dist_omega_freq: float = 0.12
    dist_omega_phase: float = -2.47
    dist_v_amp: float = 0.15
    dist_v_freq: float = 0.08
    dist_v_phase: float = 0.8
    # geometry
    half_width: float = 0.30
    cg_height: float = 0.40
    mass: float = 40.0
    inertia_x: float = 0.8
    inertia_y: float = 1.1
    inertia_z: float = 1.4
    # actuator
    tau_v: float = 5.0
    tau_omega: float = 5.0
    # start pose, goal-seeking controller and input box
    start_x: float = 0.0
    start_y: float = 0.0
    start_theta: float = 1.5
    goal_x: float = 11.0
    goal_y: float = -8.0
    k_v: float = 0.6
    k_omega: float = 3.0
    goal_radius: float = 0.05
    u_v_min: float = -3.0
    u_v_max: float = 3.0
    u_omega_min: float = -2.0
    u_omega_max: float = 2.0
    # differentiator
    hgo_k1: float = 2.0
    hgo_k2: float = 1.0
    hgo_ell: float = 50.0
    lse_sharpness: float = 100.0
    pdot_bound: float = 4.5
    pddot_bound: float = 8.0
    # safety filter
    filter: str = "envelope"
    alpha: float = 4.0
    budget_initial: float = 0.0
    budget_decay: float = 1.0
    budget_floor: float = 1.1

    def __post_init__(self):
        if self.control_rate <= 0.0 or self.horizon <= 0.0:
            raise DomainError("control_rate and horizon must be positive")
        if self.substeps < 1:
            raise DomainError("substeps must be at least 1")
        if self.filter not in FILTERS:
            raise DomainError(f"unknown filter {self.filter!r}; choose from {FILTERS}")
        if self.terrain_profile not in ("ramp", "constant"):
            raise DomainError(f"unknown terrain profile {self.terrain_profile!r}")
        if self.disturbance_kind not in ("none", "sinusoid"):
            raise DomainError(f"unknown disturbance kind {self.disturbance_kind!r}")

    # --- builders -------------------------------------------------------

    def terrain(self) -> TerrainProfile:
        roll = math.radians(self.roll_deg)
        if self.terrain_profile == "constant":
            return constant_roll(roll, self.gravity)
        return smooth_ramp_roll(roll, self.ramp_start, self.ramp_duration, self.gravity)

    def noise_model(self) -> NoiseModel:
        return NoiseModel(self.v_inf, self.control_rate, self.horizon,
                          self.seed, self.noise_tau)

    def disturbance(self) -> DisturbanceModel:
        if self.disturbance_kind == "none":
            return no_disturbance()
        return sinusoid_disturbance(self.dist_omega_amp, self.dist_omega_freq,
                                    self.dist_v_amp, self.dist_v_freq,
                                    self.dist_omega_phase, self.dist_v_phase)

    def geometry(self) -> GeometryParams:
        return GeometryParams(self.half_width, self.cg_height, self.mass,
                              self.inertia_x, self.inertia_y, self.inertia_z)

    def actuator(self) -> ActuatorParams:
        return ActuatorParams(self.tau_v, self.tau_omega)

    def hgo(self) -> HgoParams:
        return HgoParams(self.hgo_k1, self.hgo_k2, self.hgo_ell)

    def alpha_fn(self) -> AlphaLinear:
        return AlphaLinear(self.alpha)

    def budget(self) -> DisturbanceBudget:
        """Budget schedule used by the run; the constant-margin filter
        ignores the transient part by definition."""
        if self.filter == "const_margin":
            return DisturbanceBudget(0.0, 1.0, self.budget_floor)
        return DisturbanceBudget(self.budget_initial, self.budget_decay,
                                 self.budget_floor)

    def input_box(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return ((self.u_v_min, self.u_omega_min), (self.u_v_max, self.u_omega_max))

    def make_bank(self) -> DifferentiatorBank:
        """Calibrated two-channel differentiator bank (lateral then normal
        gravity component); estimates start at zero until the harness seeds
        them from the first measurement."""
        coeffs = calibrate_envelope(self.hgo(), self.v_inf, self.pddot_bound)
        e0 = self.v_inf + self.pdot_bound
        return DifferentiatorBank(
            channels=(DiffChannel(e0_bound=e0, coeffs=coeffs),
                      DiffChannel(e0_bound=e0, coeffs=coeffs)),
            hgo=self.hgo(),
            sharpness=self.lse_sharpness,
        )


_SCHEMA: dict[str, dict[str, str]] = {
    "run": {"horizon": "horizon", "control_rate": "control_rate",
            "substeps": "substeps", "seed": "seed"},
    "terrain": {"profile": "terrain_profile", "roll_deg": "roll_deg",
                "ramp_start": "ramp_start", "ramp_duration": "ramp_duration",
                "gravity": "gravity"},
    "noise": {"v_inf": "v_inf", "tau": "noise_tau"},
    "disturbance": {"kind": "disturbance_kind", "omega_amp": "dist_omega_amp",
                    "omega_freq": "dist_omega_freq", "omega_phase": "dist_omega_phase",
                    "v_amp": "dist_v_amp", "v_freq": "dist_v_freq",
                    "v_phase": "dist_v_phase"},
    "geometry": {"half_width": "half_width", "cg_height": "cg_height",
                 "mass": "mass", "inertia_x": "inertia_x",
                 "inertia_y": "inertia_y", "inertia_z": "inertia_z"},
    "actuator": {"tau_v": "tau_v", "tau_omega": "tau_omega"},
    "controller": {"start_x": "start_x", "start_y": "start_y",
                   "start_theta": "start_theta",
                   "goal_x": "goal_x", "goal_y": "goal_y", "k_v": "k_v",
                   "k_omega": "k_omega", "goal_radius": "goal_radius",
                   "u_v_min": "u_v_min", "u_v_max": "u_v_max",
                   "u_omega_min": "u_omega_min", "u_omega_max": "u_omega_max"},
    "differentiator": {"k1": "hgo_k1", "k2": "hgo_k2", "ell": "hgo_ell",
                       "sharpness": "lse_sharpness", "pdot_bound": "pdot_bound",
                       "pddot_bound": "pddot_bound"},
    "filter": {"name": "filter", "alpha": "alpha",
               "budget_initial": "budget_initial", "budget_decay": "budget_decay",
               "budget_floor": "budget_floor"},
}

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(Scenario)}


def load_config(path) -> Scenario:
    """Parse an INI-style scenario file; unknown sections or keys are
    rejected so typos cannot silently fall back to defaults."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise DomainError(f"config file {path!r} not found or unreadable")
    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise DomainError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise DomainError(f"unknown key {key!r} in section [{section}]")
            field = _SCHEMA[section][key]
            kind = _FIELD_TYPES[field]
            try:
                if kind == "int":
                    values[field] = int(raw)
                elif kind == "float":
                    values[field] = float(raw)
                else:
                    values[field] = raw.strip()
            except ValueError as exc:
                raise DomainError(f"bad value for {section}.{key}: {raw!r}") from exc
    return Scenario(**values)


def parse_variant(scenario: Scenario, spec: str) -> tuple[str, Scenario]:
    """Variant spec 'filter' or 'filter:budget_floor' applied on top of a
    base scenario; everything else (seed, signals) is shared."""
    name, _, arg = spec.strip().partition(":")
    if name not in FILTERS:
        raise DomainError(f"unknown filter {name!r} in variant {spec!r}")
    fields = {"filter": name}
    label = name
    if arg:
        try:
            fields["budget_floor"] = float(arg)
        except ValueError as exc:
            raise DomainError(f"bad budget value in variant {spec!r}") from exc
        label = f"{name}_{arg}"
    return label, dataclasses.replace(scenario, **fields)
