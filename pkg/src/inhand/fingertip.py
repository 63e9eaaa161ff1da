"""Kinematics of the rotating-table / friction-wheel fingertip.

The groove plane carries a 2-D frame centred on the turntable pivot: +x
points right as seen by the side camera and +y runs up along the gripper
axis. The screw's head-direction is ``(sin alpha, cos alpha)``, so ``alpha``
is positive when the head leans towards +x. The bilateral constraint keeps
the screw in this plane, so (x, y, alpha) is its full pose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (CalibrationRequired, GraspFailure, GrooveEjection, InvalidArgument,
                     InvalidCommand, SensorFault)
from .geometry import normalize_angle

ROTATE_CW = 0
ROTATE_CCW = 1
TRANSLATE = 1


@dataclass(frozen=True)
class FingertipConfig:
    rotation_step: float = math.radians(0.5)
    translation_step: float = 0.0005
    # how far the friction wheel may push the screw from where it was grasped
    groove_reach: float = 0.015
    eccentricity: float = 0.002
    # lateral seat of the screw on one flank of the V-groove
    seat_offset: float = 0.00025
    grasp_noise: float = math.radians(3.0)
    max_grasp_tilt: float = math.radians(80.0)

    def __post_init__(self):
        positive = (self.rotation_step, self.translation_step, self.groove_reach)
        if not all(math.isfinite(v) and v > 0 for v in positive):
            raise InvalidArgument("steps and reach must be positive")
        if self.eccentricity < 0 or self.seat_offset < 0 or self.grasp_noise < 0:
            raise InvalidArgument("eccentricity, seat offset and noise must be >= 0")


@dataclass(frozen=True)
class InHandState:
    """Head centre (x, y) in meters, lean ``alpha`` and the groove flank
    ``head_side`` (+1 puts the upright head slightly towards +x)."""

    x: float
    y: float
    alpha: float
    head_side: int = 1

    def __post_init__(self):
        if self.head_side not in (1, -1):
            raise InvalidArgument("head_side must be +1 or -1")
        if not all(math.isfinite(v) for v in (self.x, self.y, self.alpha)):
            raise InvalidArgument("state must be finite")
        object.__setattr__(self, "alpha", normalize_angle(self.alpha))

    @classmethod
    def from_axial(cls, distance: float, alpha: float, head_side: int = 1,
                   lateral: float = 0.0) -> "InHandState":
        """Build a state from the head's distance along the axis and its
        sideways offset from the axis through the pivot."""
        s, c = math.sin(alpha), math.cos(alpha)
        return cls(distance * s + lateral * c, distance * c - lateral * s, alpha, head_side)

    @property
    def axial(self) -> float:
        """Distance from the pivot to the head centre along the screw axis."""
        return self.x * math.sin(self.alpha) + self.y * math.cos(self.alpha)

    @property
    def lateral(self) -> float:
        return self.x * math.cos(self.alpha) - self.y * math.sin(self.alpha)


@dataclass(frozen=True)
class FingertipState:
    turntable_angle: float = 0.0
    wheel_travel: float = 0.0
    calibrated: bool = False
    slipped: bool = False
    home_residual: float = 0.0
    calibration_steps: int = 0

    def __post_init__(self):
        if not math.isfinite(self.wheel_travel):
            raise InvalidArgument("wheel_travel must be finite")
        object.__setattr__(self, "turntable_angle", normalize_angle(self.turntable_angle))


@dataclass(frozen=True)
class MotionCommand:
    """One actuator command: a rotation (``motor_rs`` set) or a translation
    (``motor_ts`` set), never both."""

    motor_rs: int | None = None
    motor_ts: int | None = None
    magnitude: float = 0.0

    def __post_init__(self):
        if (self.motor_rs is None) == (self.motor_ts is None):
            raise InvalidCommand("exactly one of motor_rs and motor_ts must be set")
        if self.motor_rs is not None and self.motor_rs not in (ROTATE_CW, ROTATE_CCW):
            raise InvalidCommand("motor_rs must be 0 or 1")
        if self.motor_ts is not None and self.motor_ts != TRANSLATE:
            raise InvalidCommand("motor_ts must be 1")
        if not math.isfinite(self.magnitude) or self.magnitude < 0:
            raise InvalidCommand("magnitude must be finite and >= 0")

    @property
    def is_rotation(self) -> bool:
        return self.motor_rs is not None

    def describe(self) -> str:
        if self.is_rotation:
            name = "cw" if self.motor_rs == ROTATE_CW else "ccw"
            return f"rotate_{name}:{math.degrees(self.magnitude):.3f}deg"
        return f"translate:{self.magnitude * 1000:.3f}mm"


def quantize(value: float, step: float) -> float:
    return round(value / step) * step


def grasp(true_pitch: float, head_side: int, head_distance: float, pregrasp_rotation: float,
          cfg: FingertipConfig | None = None, rng: np.random.Generator | None = None) -> InHandState:
    """In-hand state right after closing the fingers.

    ``true_pitch`` is the screw's elevation, ``head_distance`` how far the
    head centre sits from the grasp point along the shaft. The tilt carried
    into the hand is the pitch left over after the fingertip pre-rotation,
    plus a uniform disturbance of up to ``cfg.grasp_noise``.
    """
    cfg = cfg or FingertipConfig()
    tilt = true_pitch - pregrasp_rotation
    if abs(tilt) > cfg.max_grasp_tilt:
        raise GraspFailure(f"residual tilt {math.degrees(tilt):.1f} deg is not graspable")
    if cfg.grasp_noise > 0:
        rng = rng if rng is not None else np.random.default_rng(0)
        tilt += float(rng.uniform(-cfg.grasp_noise, cfg.grasp_noise))
    return InHandState.from_axial(head_distance, tilt, head_side, head_side * cfg.seat_offset)


def _require_calibrated(f: FingertipState):
    if not f.calibrated:
        raise CalibrationRequired("fingertip has not been homed")


def apply_rotation(s: InHandState, f: FingertipState, direction: int, mag: float,
                   cfg: FingertipConfig | None = None) -> tuple[InHandState, FingertipState]:
    """Turn the table by ``mag``; the screw turns with it without slipping.

    Clockwise (0) lowers alpha, anticlockwise (1) raises it. The two senses
    pivot on opposite contact points of the eccentric groove, which shifts
    the head sideways by ``e * (1 - cos mag)`` in opposite directions; the
    head's distance along the axis is unchanged.
    """
    cfg = cfg or FingertipConfig()
    _require_calibrated(f)
    if direction not in (ROTATE_CW, ROTATE_CCW):
        raise InvalidCommand("direction must be 0 or 1")
    if not math.isfinite(mag) or mag < 0:
        raise InvalidArgument("rotation magnitude must be finite and >= 0")
    sign = 1.0 if direction == ROTATE_CCW else -1.0
    new_alpha = s.alpha + sign * mag
    if abs(new_alpha) > math.pi / 2:
        raise GrooveEjection(f"alpha {math.degrees(new_alpha):.1f} deg leaves the groove")
    lateral = s.lateral + sign * cfg.eccentricity * (1.0 - math.cos(mag))
    state = InHandState.from_axial(s.axial, new_alpha, s.head_side, lateral)
    return state, replace(f, turntable_angle=f.turntable_angle + sign * mag)


def apply_translation(s: InHandState, f: FingertipState, dist: float,
                      cfg: FingertipConfig | None = None) -> tuple[InHandState, FingertipState]:
    """Slide the screw along its own axis by ``dist`` (positive pushes the
    head away from the pivot). Travel beyond the groove reach is clamped
    and flagged as slip."""
    cfg = cfg or FingertipConfig()
    _require_calibrated(f)
    if not math.isfinite(dist):
        raise InvalidArgument("distance must be finite")
    travel = f.wheel_travel + dist
    slipped = abs(travel) > cfg.groove_reach
    travel = max(-cfg.groove_reach, min(cfg.groove_reach, travel))
    moved = travel - f.wheel_travel
    state = replace(s, x=s.x + moved * math.sin(s.alpha), y=s.y + moved * math.cos(s.alpha))
    return state, replace(f, wheel_travel=travel, slipped=f.slipped or slipped)


def calibrate_home(f: FingertipState, true_offset: float, sensing_window: float,
                   step: float = math.radians(0.5)) -> FingertipState:
    """Step the turntable until the magnet is within ``sensing_window`` of
    the Hall switch, then take that angle as zero.

    The table turns in the negative sense starting from ``true_offset``.
    The returned state records the remaining offset and the steps taken.
    """
    if step <= 0 or sensing_window < 0:
        raise InvalidArgument("step must be > 0 and window >= 0")
    offset = normalize_angle(true_offset)
    limit = math.ceil(2.0 * math.pi / step)
    for k in range(limit + 1):
        angle = normalize_angle(offset - k * step)
        # tolerate round-off on lattice points that sit exactly on the window edge
        if abs(angle) <= sensing_window + 1e-12:
            return FingertipState(0.0, f.wheel_travel, True, f.slipped, abs(angle), k)
    raise SensorFault(f"no Hall trigger within {limit} steps")
