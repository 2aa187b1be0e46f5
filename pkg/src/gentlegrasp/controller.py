"""Seven-phase grasp sequencing and the contact-coefficient tracking law.

The controller is purely positional: it emits gripper displacements in mm.
Force arises from those positions inside the simulator (or the hardware).
"""
import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import NamedTuple, Optional

from .exceptions import GripperLimitReached, InvalidConfig

logger = logging.getLogger(__name__)


class GraspPhase(str, Enum):
    REACH = "reach"
    LOAD = "load"
    LIFT = "lift"
    HOLD = "hold"
    REPLACE = "replace"
    UNLOAD = "unload"
    RELEASE = "release"


PHASE_ORDER = list(GraspPhase)


@dataclass(frozen=True)
class ControllerConfig:
    cf_target: float = 0.25
    k_p: float = 2.0  # mm per unit cf error
    delta_cf: float = 0.02
    f_n_threshold: float = 0.2  # N
    reach_increment: float = 0.25  # mm per tick
    gripper_limits: tuple = (0.0, 40.0)  # mm
    max_step: float = 0.5  # mm per tick, saturation of the proportional law

    def __post_init__(self):
        if not 0 < self.cf_target < 1:
            raise InvalidConfig(f"cf_target must lie in (0, 1), got {self.cf_target!r}")
        if not self.k_p >= 0:
            # k_p = 0 is allowed: it disables the loop for negative-control runs
            raise InvalidConfig(f"k_p must be >= 0, got {self.k_p!r}")
        for name in ("delta_cf", "f_n_threshold", "reach_increment", "max_step"):
            if not getattr(self, name) > 0:
                raise InvalidConfig(f"{name} must be > 0, got {getattr(self, name)!r}")
        lo, hi = (float(v) for v in self.gripper_limits)
        if not lo < hi:
            raise InvalidConfig(f"gripper_limits must satisfy x_min < x_max, got {self.gripper_limits!r}")
        object.__setattr__(self, "gripper_limits", (lo, hi))


@dataclass(frozen=True)
class PhaseSchedule:
    """Start times (s) of the phases after Load. ``None`` omits a phase."""

    lift: float = 2.0
    hold: float = 3.0
    replace: Optional[float] = None
    unload: Optional[float] = None
    release: Optional[float] = None

    def __post_init__(self):
        times = [t for t in (self.lift, self.hold, self.replace, self.unload, self.release) if t is not None]
        if any(b < a for a, b in zip(times, times[1:])):
            raise InvalidConfig(f"phase schedule must be non-decreasing, got {times}")

    def start_of(self, phase: GraspPhase) -> Optional[float]:
        if phase in (GraspPhase.REACH, GraspPhase.LOAD):
            return None
        return getattr(self, phase.value)


class GripperCommand(NamedTuple):
    delta_x: float  # mm, positive closes


@dataclass(frozen=True)
class GraspState:
    phase: GraspPhase = GraspPhase.REACH
    x_g: float = 0.0
    contact_flag: bool = False
    last_cf: float = 1.0
    last_estimate: Optional[tuple] = None
    released: bool = False


def reach_step(state: GraspState, f_n: float, config: ControllerConfig):
    """Close by one increment until the normal force reaches the threshold."""
    if abs(f_n) >= config.f_n_threshold:
        return replace(state, phase=GraspPhase.LOAD, contact_flag=True), GripperCommand(0.0)
    x_max = config.gripper_limits[1]
    if state.x_g + config.reach_increment > x_max:
        raise GripperLimitReached(state.x_g, x_max)
    dx = config.reach_increment
    return replace(state, x_g=state.x_g + dx), GripperCommand(dx)


def control_step(state: GraspState, cf_t: float, config: ControllerConfig):
    """Proportional contact-coefficient law with dead band and per-tick saturation."""
    error = config.cf_target - cf_t
    dx = 0.0
    if abs(error) > config.delta_cf:
        dx = config.k_p * error
        if abs(dx) > config.max_step:
            logger.debug("command %.3f mm saturated to %.3f mm", dx, config.max_step)
            dx = config.max_step if dx > 0 else -config.max_step
    lo, hi = config.gripper_limits
    x_new = min(hi, max(lo, state.x_g + dx))
    if x_new != state.x_g + dx:
        logger.debug("gripper position clamped to %.3f mm", x_new)
    dx = x_new - state.x_g
    return replace(state, x_g=x_new, last_cf=cf_t), GripperCommand(dx)


def release_step(state: GraspState, config: ControllerConfig):
    """Open at the reach rate; phase_advance ends the grasp once contact is lost."""
    x_new = max(config.gripper_limits[0], state.x_g - config.reach_increment)
    return replace(state, x_g=x_new), GripperCommand(x_new - state.x_g)


def phase_advance(state: GraspState, schedule: PhaseSchedule, t: float, f_n: float = None,
                  config: ControllerConfig = None) -> GraspState:
    """Advance at most one phase along the schedule at time ``t``.

    Reach -> Load happens in ``reach_step``. In Release, contact is declared
    lost once ``f_n`` drops below the contact threshold.
    """
    if state.phase is GraspPhase.REACH or state.released:
        return state
    if state.phase is GraspPhase.RELEASE:
        if f_n is not None and config is not None and abs(f_n) < config.f_n_threshold:
            return replace(state, contact_flag=False, released=True)
        return state
    idx = PHASE_ORDER.index(state.phase)
    for nxt in PHASE_ORDER[idx + 1:]:
        start = schedule.start_of(nxt)
        if start is None:
            continue
        if t >= start:
            return replace(state, phase=nxt)
        break
    return state
