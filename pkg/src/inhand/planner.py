"""In-hand manipulation planner and the closed sense-plan-act loop."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from .errors import GrooveEjection, InvalidArgument, InvalidCommand, ReorientationFailure
from .fingertip import (ROTATE_CCW, ROTATE_CW, TRANSLATE, FingertipConfig, FingertipState,
                        InHandState, MotionCommand, apply_rotation, apply_translation, quantize)
from .geometry import GrayImage
from .render import SIDE_PIVOT_ROW, SIDE_PX_PER_M, SIDE_RESOLUTION
from .vision import InHandObservation, PerceptionParams, estimate_inhand_pose

TRACE_HEADER = "iter,alpha,h_x,branch,command"


@dataclass(frozen=True)
class PlannerConfig:
    i_mx: float = 135.0
    alpha_tol: float = math.radians(1.0)
    max_iterations: int = 10
    translate_step: float = 0.005
    rotation_step: float = math.radians(0.5)
    flat_threshold: float = math.radians(5.0)
    image_width: int = SIDE_RESOLUTION
    # pivot location and scale of the side image, used to measure head exposure
    pivot_px: tuple[float, float] = (135.0, float(SIDE_PIVOT_ROW))
    px_per_m: float = SIDE_PX_PER_M

    def __post_init__(self):
        if not 0 <= self.i_mx < self.image_width:
            raise InvalidArgument("i_mx must lie inside the side image")
        if self.max_iterations < 1:
            raise InvalidArgument("max_iterations must be >= 1")
        if self.alpha_tol < 0 or self.translate_step <= 0 or self.rotation_step <= 0:
            raise InvalidArgument("tolerance and step sizes must be positive")


@dataclass(frozen=True)
class DesiredPose:
    alpha_target: float = 0.0
    head_exposure: float = 0.010

    def __post_init__(self):
        if self.alpha_target != 0.0:
            raise InvalidArgument("the screw task aligns the screw with the gripper (target 0)")


def pregrasp_fingertip_rotation(pitch: float, cfg: PlannerConfig | None = None) -> float:
    """Fingertip rotation applied before closing on a screw of the given pitch.

    Near-flat screws are grasped as they lie; otherwise the fingertip turns
    to meet the screw axis square-on, in whole rotation steps.
    """
    cfg = cfg or PlannerConfig()
    if not -math.pi / 2 <= pitch <= math.pi / 2:
        raise InvalidArgument("pitch must lie in [-pi/2, pi/2]")
    if abs(pitch) < cfg.flat_threshold:
        return 0.0
    return quantize(pitch, cfg.rotation_step)


def generate_motion(motor_rs: int | None, motor_ts: int | None, alpha: float,
                    cfg: PlannerConfig | None = None) -> MotionCommand:
    cfg = cfg or PlannerConfig()
    if (motor_rs is None) == (motor_ts is None):
        raise InvalidCommand("exactly one of motor_rs and motor_ts must be set")
    if motor_ts is not None:
        return MotionCommand(motor_ts=motor_ts, magnitude=cfg.translate_step)
    return MotionCommand(motor_rs=motor_rs, magnitude=quantize(abs(alpha), cfg.rotation_step))


def select_branch(obs: InHandObservation, cfg: PlannerConfig) -> tuple[int, float, bool]:
    """Branch number (1, 3, 4, 5 or 6), the angle to act on, and whether the
    top segment was horizontal (which forces the angle to pi/2)."""
    if not obs.segments:
        return 1, obs.alpha, False
    dy = obs.segments[0].dy
    horizontal = dy == 0
    alpha = math.pi / 2 if horizontal else obs.alpha
    h_x = obs.head_xy[0]
    if h_x > cfg.i_mx and h_x != 0:
        return 3, alpha, horizontal
    if h_x < cfg.i_mx and h_x != 0:
        return 4, alpha, horizontal
    if h_x == 0 and dy > 0:
        return 5, alpha, horizontal
    return 6, alpha, horizontal


_BRANCH_SIGNALS = {
    1: (None, TRANSLATE),
    3: (ROTATE_CW, None),
    4: (ROTATE_CCW, None),
    5: (ROTATE_CCW, None),
    6: (ROTATE_CW, None),
}


def plan_step(obs: InHandObservation, cfg: PlannerConfig | None = None) -> MotionCommand:
    """One planning decision from a single observation.

    No segment means translate and look again. Otherwise the head column
    picks the rotation sense: right of the midline turns clockwise, left of
    it anticlockwise. An undetected head (column 0) turns anticlockwise when
    the segment descends to the right and clockwise otherwise. The rotation
    magnitude is the measured angle's absolute value.
    """
    cfg = cfg or PlannerConfig()
    branch, alpha, _ = select_branch(obs, cfg)
    rs, ts = _BRANCH_SIGNALS[branch]
    return generate_motion(rs, ts, alpha, cfg)


def head_exposure(obs: InHandObservation, cfg: PlannerConfig) -> float:
    """Distance of the detected head from the pivot, meters (0 if unseen)."""
    if obs.head is None:
        return 0.0
    px, py = cfg.pivot_px
    return math.hypot(obs.head.x - px, obs.head.y - py) / cfg.px_per_m


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    alpha: float
    h_x: float
    branch: str
    command: str

    def to_csv(self) -> str:
        return f"{self.iteration},{self.alpha:.6f},{self.h_x:.3f},{self.branch},{self.command}"


@dataclass(frozen=True)
class ReorientResult:
    state: InHandState
    iterations: int
    converged: bool
    fingertip: FingertipState
    trace: tuple[TraceRow, ...] = field(default=())
    commands: tuple[MotionCommand, ...] = field(default=())

    def trace_csv(self) -> str:
        return "\n".join([TRACE_HEADER] + [r.to_csv() for r in self.trace]) + "\n"


Sensor = Callable[[InHandState], GrayImage]


def run_reorientation(state: InHandState, fingertip: FingertipState, cfg: PlannerConfig,
                      sensor: Sensor, desired: DesiredPose | None = None,
                      fingertip_cfg: FingertipConfig | None = None,
                      perception: PerceptionParams | None = None) -> ReorientResult:
    """Sense, plan and act until the screw is aligned and its head exposed.

    Each pass renders the side view, estimates the pose and issues one
    command. When the angle is already within tolerance but the head is not
    exposed far enough, the screw is pushed out instead. ``iterations``
    counts issued commands; at most ``cfg.max_iterations`` are issued.
    """
    desired = desired or DesiredPose()
    trace, commands = [], []
    converged = False
    for it in range(cfg.max_iterations + 1):
        obs = estimate_inhand_pose(sensor(state), perception)
        aligned = bool(obs.segments) and abs(obs.alpha - desired.alpha_target) <= cfg.alpha_tol
        exposed = head_exposure(obs, cfg) >= desired.head_exposure
        if aligned and exposed:
            converged = True
            break
        if it == cfg.max_iterations:
            break
        if aligned:
            branch = "exposure"
            cmd = generate_motion(None, TRANSLATE, 0.0, cfg)
        else:
            number, _, horizontal = select_branch(obs, cfg)
            branch = f"2>{number}" if horizontal else str(number)
            cmd = plan_step(obs, cfg)
        trace.append(TraceRow(it, obs.alpha, obs.head_xy[0], branch, cmd.describe()))
        commands.append(cmd)
        try:
            if cmd.is_rotation:
                state, fingertip = apply_rotation(state, fingertip, cmd.motor_rs, cmd.magnitude,
                                                  fingertip_cfg)
            else:
                state, fingertip = apply_translation(state, fingertip, cmd.magnitude, fingertip_cfg)
        except GrooveEjection as exc:
            raise ReorientationFailure(str(exc)) from exc
    return ReorientResult(state, len(commands), converged, fingertip, tuple(trace), tuple(commands))
