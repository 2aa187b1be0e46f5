"""Quasi-static two-finger grasp simulator with per-element Coulomb saturation.

Each tick the gripper position sets a closure against the object, a normal
force law maps closure to the normal force per finger, and the object's
weight (plus inertial load from the arm's acceleration) is carried through
friction. Tangential load is spread over the elements in proportion to their
normal force and capped at ``mu * f_n`` per element. When the total capacity
falls short of the load, the object slips at a rate proportional to the
deficit.
"""
import math
import time
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple, Union

import numpy as np

from . import particle_filter as pf
from .contact import (
    NO_CONTACT_EPS,
    ContactPatch,
    FlatPlane,
    HeightField,
    Sphere,
    SurfaceDescriptor,
    contact_coefficient,
    mer_forces,
    surface_normals,
)
from .controller import (
    ControllerConfig,
    GraspPhase,
    GraspState,
    GripperCommand,
    PhaseSchedule,
    control_step,
    phase_advance,
    reach_step,
    release_step,
)
from .exceptions import GripperLimitReached, ObjectDropped, ValidationError
from .telemetry import TelemetryRecord, TelemetryTrace, Verdict, compute_report

GRAVITY = 9.81  # m/s^2
N_FINGERS = 2
LOAD_DIRECTION = np.array([0.0, -1.0, 0.0])  # gravity as seen in the sensor frame


def _profile(points, name):
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValidationError("profile needs at least one (t, value) point", name)
    if np.any(np.diff(pts[:, 0]) <= 0):
        raise ValidationError("profile times must be strictly increasing", name)
    return pts


@dataclass(frozen=True)
class LinearElastic:
    """Compliant object: deforms as a spring of the sensor's stiffness in series
    until ``max_deflection`` (mm), then behaves rigidly."""

    max_deflection: float

    def __post_init__(self):
        if not self.max_deflection > 0:
            raise ValidationError("must be > 0", "object.rigidity.max_deflection")


@dataclass(frozen=True, eq=False)
class ObjectModel:
    mass_profile: np.ndarray  # (t s, m kg) points, linear in between
    true_mu_profile: np.ndarray  # (t s, mu) points
    contact_stiffness: float = 2.0  # N/mm
    contact_offset: float = 10.0  # mm of gripper travel before touching the object
    rigidity: Optional[LinearElastic] = None  # None means rigid
    load_ramp_s: float = 0.5  # time for the load to transfer from the table to the fingers
    slip_damping: float = 0.2  # N per (mm/s) of macro slip
    drop_threshold: float = 5.0  # mm

    def __post_init__(self):
        object.__setattr__(self, "mass_profile", _profile(self.mass_profile, "object.mass_profile"))
        object.__setattr__(self, "true_mu_profile", _profile(self.true_mu_profile, "object.true_mu_profile"))
        if np.any(self.mass_profile[:, 1] <= 0):
            raise ValidationError("mass must be > 0", "object.mass_profile")
        if np.any(self.true_mu_profile[:, 1] <= 0):
            raise ValidationError("friction must be > 0", "object.true_mu_profile")
        for name in ("contact_stiffness", "load_ramp_s", "slip_damping", "drop_threshold"):
            if not getattr(self, name) > 0:
                raise ValidationError("must be > 0", f"object.{name}")
        if not self.contact_offset >= 0:
            raise ValidationError("must be >= 0", "object.contact_offset")

    def mass(self, t):
        return float(np.interp(t, self.mass_profile[:, 0], self.mass_profile[:, 1]))

    def mu(self, t):
        return float(np.interp(t, self.true_mu_profile[:, 0], self.true_mu_profile[:, 1]))

    def normal_force(self, closure):
        """Normal force per finger (N) for a gripper closure past first contact (mm)."""
        if closure <= 0:
            return 0.0
        k = self.contact_stiffness
        if self.rigidity is None:
            return k * closure
        d = self.rigidity.max_deflection
        if closure <= 2 * d:
            return 0.5 * k * closure
        return k * (closure - d)


@dataclass(frozen=True)
class MassRamp:
    start: float
    end: float
    added_mass: float

    def __post_init__(self):
        if not self.start < self.end:
            raise ValidationError("start must precede end", "disturbances.mass_ramp")

    def mass(self, t):
        frac = min(1.0, max(0.0, (t - self.start) / (self.end - self.start)))
        return frac * self.added_mass


@dataclass(frozen=True, eq=False)
class AccelProfile:
    points: np.ndarray  # (t s, a m/s^2), linear in between, zero outside
    axis: str = "z"  # "z" is vertical (adds to gravity), "y" is horizontal in the contact plane

    def __post_init__(self):
        object.__setattr__(self, "points", _profile(self.points, "disturbances.accel_profile"))
        if self.axis not in ("y", "z"):
            raise ValidationError(f"axis must be 'y' or 'z', got {self.axis!r}", "disturbances.accel_profile.axis")

    @property
    def start(self):
        return float(self.points[0, 0])

    @property
    def end(self):
        return float(self.points[-1, 0])

    def accel(self, t):
        return float(np.interp(t, self.points[:, 0], self.points[:, 1], left=0.0, right=0.0))


Disturbance = Union[MassRamp, AccelProfile]


@dataclass(eq=False)
class SensorModel:
    rows: int = 20
    cols: int = 20
    element_area: float = 1.0  # mm^2
    force_noise_std: float = 2e-4  # N per element per axis
    surface: SurfaceDescriptor = FlatPlane()
    positions: np.ndarray = field(init=False, repr=False)
    normals: np.ndarray = field(init=False, repr=False)
    tangents: np.ndarray = field(init=False, repr=False)
    gaps: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValidationError("grid must be nonempty", "sensor.grid")
        if not self.element_area > 0:
            raise ValidationError("must be > 0", "sensor.element_area")
        if not self.force_noise_std >= 0:
            raise ValidationError("must be >= 0", "sensor.force_noise_std")
        self._build_geometry()

    def __len__(self):
        return self.rows * self.cols

    def _build_geometry(self):
        pitch = math.sqrt(self.element_area)
        xs = (np.arange(self.cols) - (self.cols - 1) / 2) * pitch
        ys = (np.arange(self.rows) - (self.rows - 1) / 2) * pitch
        gx, gy = np.meshgrid(xs, ys)
        xy = np.column_stack([gx.ravel(), gy.ravel()])
        s = self.surface
        if isinstance(s, FlatPlane):
            n = np.asarray(s.normal)
            z = -(n[0] * xy[:, 0] + n[1] * xy[:, 1]) / n[2] if n[2] != 0 else np.zeros(len(xy))
            height = np.zeros(len(xy))  # every element touches at once
        elif isinstance(s, Sphere):
            cx, cy, cz = s.center
            r2 = (xy[:, 0] - cx) ** 2 + (xy[:, 1] - cy) ** 2
            z = cz + np.sqrt(np.maximum(s.radius**2 - r2, 0.0))
            height = z
        elif isinstance(s, HeightField):
            z = s.height(xy)
            height = z
        else:
            raise ValidationError(f"unsupported surface {type(s).__name__}", "sensor.surface")
        self.positions = np.column_stack([xy, z])
        normals = surface_normals(s, self.positions)
        tangents = LOAD_DIRECTION - (normals @ LOAD_DIRECTION)[:, None] * normals
        tnorm = np.linalg.norm(tangents, axis=1)
        tangents[tnorm < 1e-12] = [1.0, 0.0, 0.0]
        tnorm[tnorm < 1e-12] = 1.0
        self.normals = normals
        self.tangents = tangents / tnorm[:, None]
        self.gaps = np.max(height) - height

    def pressure_shares(self, closure):
        """Fraction of the normal force carried by each element at a given closure."""
        if closure <= 0:
            return np.zeros(len(self))
        w = np.maximum(closure - self.gaps, 0.0)
        total = w.sum()
        if total <= 0:
            # only the apex elements can touch first
            w = (self.gaps == self.gaps.min()).astype(float)
            total = w.sum()
        return w / total


@dataclass(frozen=True)
class Timing:
    rate_hz: float = 30.0
    duration_s: float = 10.0

    def __post_init__(self):
        if not self.rate_hz > 0:
            raise ValidationError("must be > 0", "timing.rate_hz")
        if not self.duration_s > 0:
            raise ValidationError("must be > 0", "timing.duration_s")

    @property
    def dt(self):
        return 1.0 / self.rate_hz

    @property
    def n_ticks(self):
        return int(round(self.duration_s * self.rate_hz))


@dataclass(eq=False)
class Scenario:
    object: ObjectModel
    sensor: SensorModel = field(default_factory=SensorModel)
    estimator: pf.EstimatorConfig = field(default_factory=pf.EstimatorConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    disturbances: List[Disturbance] = field(default_factory=list)
    phase_schedule: PhaseSchedule = field(default_factory=PhaseSchedule)
    timing: Timing = field(default_factory=Timing)
    name: str = "scenario"
    seed: int = 0
    max_accel: float = 5.0  # m/s^2

    def __post_init__(self):
        for d in self.disturbances:
            if d.start < 0 or d.end > self.timing.duration_s:
                raise ValidationError(
                    f"disturbance window [{d.start}, {d.end}] outside [0, {self.timing.duration_s}]", "disturbances"
                )
            if isinstance(d, AccelProfile) and np.max(np.abs(d.points[:, 1])) > self.max_accel:
                raise ValidationError(f"acceleration exceeds max_accel={self.max_accel}", "disturbances")
        lo, hi = self.estimator.mu_min, self.estimator.mu_max
        mus = self.object.true_mu_profile[:, 1]
        if np.any(mus < lo) or np.any(mus > hi):
            raise ValidationError(f"true friction must lie in [{lo}, {hi}]", "object.true_mu_profile")
        if abs(self.estimator.cf_target - self.controller.cf_target) > 1e-12:
            raise ValidationError("estimator and controller cf_target differ", "controller.cf_target")

    def with_seed(self, seed):
        return replace(self, seed=int(seed), estimator=replace(self.estimator, rng_seed=int(seed)))

    def mass(self, t):
        return self.object.mass(t) + sum(d.mass(t) for d in self.disturbances if isinstance(d, MassRamp))

    def accel(self, t):
        """(vertical, horizontal) end-effector acceleration in m/s^2."""
        az = ay = 0.0
        for d in self.disturbances:
            if isinstance(d, AccelProfile):
                if d.axis == "z":
                    az += d.accel(t)
                else:
                    ay += d.accel(t)
        return az, ay

    def support_fraction(self, t, t_contact):
        """Share of the object's weight carried by the fingers rather than the table."""
        if t_contact is None:
            return 0.0
        frac = min(1.0, max(0.0, (t - t_contact) / self.object.load_ramp_s))
        sched = self.phase_schedule
        if sched.unload is not None:
            end = sched.release if sched.release is not None else sched.unload + self.object.load_ramp_s
            if t >= sched.unload:
                frac = min(frac, max(0.0, (end - t) / max(end - sched.unload, 1e-9)))
        return frac


@dataclass(eq=False)
class PhysicsState:
    x_g: float = 0.0
    indentation: float = 0.0
    slip_displacement: float = 0.0
    per_element_stick: np.ndarray = None
    normal_force: float = 0.0  # per finger, N
    tangential_force: float = 0.0  # per finger, N, transmitted through friction
    required_load: float = 0.0  # per finger, N
    element_normal: np.ndarray = None  # N
    element_tangential: np.ndarray = None  # N
    t_contact: Optional[float] = None
    t: float = 0.0

    @classmethod
    def initial(cls, sensor: SensorModel, x_g=0.0):
        n = len(sensor)
        return cls(
            x_g=x_g,
            per_element_stick=np.ones(n, dtype=bool),
            element_normal=np.zeros(n),
            element_tangential=np.zeros(n),
        )

    @property
    def slip_fraction(self):
        return float(np.mean(~self.per_element_stick))


def step_physics(state: PhysicsState, command: GripperCommand, scenario: Scenario, t: float) -> PhysicsState:
    obj = scenario.object
    lo, hi = scenario.controller.gripper_limits
    x_g = min(hi, max(lo, state.x_g + command.delta_x))
    closure = max(0.0, x_g - obj.contact_offset)
    normal = obj.normal_force(closure)
    t_contact = state.t_contact
    if t_contact is None and normal > 0:
        t_contact = t

    support = scenario.support_fraction(t, t_contact)
    az, ay = scenario.accel(t)
    load = support * scenario.mass(t) * math.hypot(max(GRAVITY + az, 0.0), ay) / N_FINGERS
    capacity = obj.mu(t) * normal

    shares = scenario.sensor.pressure_shares(closure)
    touching = shares > 0
    slip = state.slip_displacement
    if load == 0.0 or load < capacity:
        transmitted = load
        stick = np.ones(len(shares), dtype=bool)
    else:
        transmitted = capacity
        stick = ~touching
        slip += (load - capacity) / obj.slip_damping * scenario.timing.dt

    new = PhysicsState(
        x_g=x_g,
        indentation=closure,
        slip_displacement=slip,
        per_element_stick=stick,
        normal_force=normal,
        tangential_force=transmitted,
        required_load=load,
        element_normal=shares * normal,
        element_tangential=shares * transmitted,
        t_contact=t_contact,
        t=t,
    )
    if slip > obj.drop_threshold:
        raise ObjectDropped(new, obj.drop_threshold)
    return new


def synthesize_patch(state: PhysicsState, sensor: SensorModel, rng: np.random.Generator) -> ContactPatch:
    forces = state.element_normal[:, None] * sensor.normals + state.element_tangential[:, None] * sensor.tangents
    if sensor.force_noise_std > 0:
        forces = forces + rng.normal(0.0, sensor.force_noise_std, size=forces.shape)
    areas = np.full(len(sensor), sensor.element_area)
    return ContactPatch(sensor.positions, forces / sensor.element_area, areas, sensor.surface, normals=sensor.normals)


@dataclass(eq=False)
class EpisodeResult:
    trace: TelemetryTrace
    tick_seconds: np.ndarray  # wall-clock time per tick, not part of the trace

    @property
    def verdict(self):
        return self.trace.verdict

    @property
    def report(self):
        return self.trace.report


def trace_header(scenario: Scenario) -> dict:
    return {
        "scenario": scenario.name,
        "seed": scenario.seed,
        "rate_hz": scenario.timing.rate_hz,
        "duration_s": scenario.timing.duration_s,
        "cf_target": scenario.controller.cf_target,
        "drop_threshold": scenario.object.drop_threshold,
    }


def run_episode(scenario: Scenario, patch_sink=None) -> EpisodeResult:
    """Run the closed loop for the scenario's duration.

    Per tick: physics, patch synthesis, MER forces, then (after contact) one
    estimator step followed by one controller step, then phase sequencing.
    ``patch_sink(t, patch)`` receives every patch the estimator consumed.
    """
    dt = scenario.timing.dt
    budget = dt
    sensor_rng = np.random.default_rng([scenario.seed, 1])
    cfg_e = scenario.estimator
    cfg_c = scenario.controller
    pset = pf.init(cfg_e)
    est = pf.estimate(pset)

    physics = PhysicsState.initial(scenario.sensor, x_g=cfg_c.gripper_limits[0])
    grasp = GraspState(x_g=physics.x_g)
    command = GripperCommand(0.0)
    records = []
    tick_seconds = []
    verdict = Verdict.SUCCESS

    for k in range(scenario.timing.n_ticks):
        t = k * dt
        t0 = time.perf_counter()
        dropped = False
        try:
            physics = step_physics(physics, command, scenario, t)
        except ObjectDropped as e:
            physics = e.state
            dropped = True
        patch = synthesize_patch(physics, scenario.sensor, sensor_rng)
        mer = mer_forces(patch)
        cf_raw = cf = 1.0
        command = GripperCommand(0.0)
        phase_now = grasp.phase

        if grasp.phase is GraspPhase.REACH:
            try:
                grasp, command = reach_step(grasp, mer.normal, cfg_c)
            except GripperLimitReached:
                verdict = Verdict.GRIPPER_LIMIT_REACHED
        elif grasp.contact_flag:
            pset, est = pf.step(pset, pf.Observation(mer), cfg_e)
            if patch_sink is not None:
                patch_sink(t, patch)
            if mer.normal > NO_CONTACT_EPS:
                cf_raw = contact_coefficient(mer, est.mean, clamp=False)
                cf = min(1.0, max(0.0, cf_raw))
            else:
                # contact lost while holding: read it as full slip so the loop re-closes
                cf_raw = cf = 0.0
            grasp = replace(grasp, last_estimate=est)
            if grasp.phase is GraspPhase.RELEASE:
                grasp, command = release_step(grasp, cfg_c)
            else:
                grasp, command = control_step(grasp, cf, cfg_c)
            grasp = phase_advance(grasp, scenario.phase_schedule, t + dt, mer.normal, cfg_c)

        tick_seconds.append(time.perf_counter() - t0)
        records.append(
            TelemetryRecord(
                t=t,
                phase=phase_now.value,
                x_g=physics.x_g,
                f_mer_n=mer.normal,
                f_mer_t=mer.tangential,
                mu_hat=est.mean,
                ci_low=est.ci_low,
                ci_high=est.ci_high,
                ess=est.ess,
                cf_raw=cf_raw,
                cf_clamped=cf,
                delta_x=command.delta_x,
                slip_fraction=physics.slip_fraction,
                macro_slip=physics.slip_displacement,
                true_mu=scenario.object.mu(t),
                mass=scenario.mass(t),
            )
        )
        if dropped:
            verdict = Verdict.OBJECT_DROPPED
        if verdict is not Verdict.SUCCESS:
            break

    tick_seconds = np.asarray(tick_seconds)
    trace = TelemetryTrace(trace_header(scenario), records, verdict)
    trace.report = compute_report(trace, ticks_over_budget=int(np.sum(tick_seconds > budget)))
    return EpisodeResult(trace, tick_seconds)
