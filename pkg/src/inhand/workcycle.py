"""One pick-reorient-insert work cycle as an explicit stage sequence."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from .cloud import detect_screws, select_candidate
from .config import RunConfig
from .errors import InHandError
from .fingertip import FingertipState, InHandState, calibrate_home, grasp
from .geometry import normalize_angle
from .planner import ReorientResult, pregrasp_fingertip_rotation, run_reorientation
from .render import render_cloud, render_side_image, side_camera, top_camera
from .scene import Hole, PlacedScrew, Scene, ScrewSpec


class CycleStage(str, Enum):
    DETECT = "Detect"
    PREGRASP = "PreGrasp"
    GRASP = "Grasp"
    MIDPOSE = "MidPose"
    REORIENT = "Reorient"
    INSERT = "Insert"
    HOME = "Home"
    CALIBRATE = "Calibrate"
    DONE = "Done"
    FAILED = "Failed"


STAGE_ORDER = (
    CycleStage.DETECT, CycleStage.PREGRASP, CycleStage.GRASP, CycleStage.MIDPOSE,
    CycleStage.REORIENT, CycleStage.INSERT, CycleStage.HOME, CycleStage.CALIBRATE,
)


@dataclass
class CycleReport:
    seed: int
    selected_label: int | None = None
    pitch_est: float | None = None
    pitch_true: float | None = None
    pregrasp_rotation: float | None = None
    reorient_iterations: int = 0
    alpha_final: float | None = None
    inserted: bool = False
    stage_timings: dict = field(default_factory=dict)
    completed_stages: list = field(default_factory=list)
    calibration_steps: list = field(default_factory=list)
    failure: tuple[str, str] | None = None
    trace_csv: str = ""

    @property
    def final_stage(self) -> CycleStage:
        return CycleStage.FAILED if self.failure else CycleStage.DONE

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("trace_csv")
        d["failure"] = None if self.failure is None else {
            "stage": self.failure[0], "reason": self.failure[1]}
        d["final_stage"] = self.final_stage.value
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# --- insertion geometry ---------------------------------------------------------


def max_radial_extent(alpha: float, shaft_radius: float, engagement: float) -> float:
    """Largest horizontal distance from the hole axis reached by the engaged
    part of a shaft tilted by ``alpha`` and centred in the hole.

    The engaged part is a cylinder of length ``engagement``; its extreme
    points lie on the two end rims. On a rim, the squared horizontal
    distance is a concave quadratic in the cosine of the rim angle, so the
    maximum is at its vertex or at an end of [-1, 1].
    """
    a = abs(alpha)
    c = 0.5 * engagement * math.sin(a)
    r = shaft_radius
    ca, sa = math.cos(a), math.sin(a)

    def dist2(u):
        return c * c + 2.0 * c * r * ca * u + r * r * (ca * ca * u * u + 1.0 - u * u)

    candidates = [1.0, -1.0]
    if sa > 0:
        candidates.append(min(1.0, max(-1.0, c * ca / (r * sa * sa))))
    return math.sqrt(max(dist2(u) for u in candidates))


def check_insertion(state: InHandState, spec: ScrewSpec, hole: Hole,
                    engagement: float = 0.010) -> bool:
    """Whether the aligned screw, released head-up, drops into the hole.

    Succeeds iff the head end points up and the tilted shaft, engaged to
    ``engagement`` along its axis, stays within the hole radius.
    """
    if math.cos(state.alpha) <= 0:
        return False
    return max_radial_extent(state.alpha, spec.shaft_radius, engagement) <= hole.radius


# --- the cycle ------------------------------------------------------------------


def true_pitch(screw: PlacedScrew) -> float:
    """Elevation of the screw axis in the sign-free convention of the
    perception stage (the axis direction with a non-negative z)."""
    return math.asin(min(1.0, abs(float(screw.axis[2]))))


def head_side(screw: PlacedScrew) -> int:
    """Groove flank the screw seats on: +1 when its head points towards
    world +x (ties go to +1)."""
    return 1 if screw.axis[0] >= 0 else -1


def grasp_head_distance(screw: PlacedScrew, grasp_point) -> float:
    """Axial distance from the grasp point to the head centre, clamped to
    the shaft so the fingertips always close on it."""
    d = float((screw.head_center - np.asarray(grasp_point)) @ screw.axis)
    lo = screw.spec.head_height / 2.0
    return min(max(d, lo), screw.spec.tip_offset)


class _Failed(Exception):
    def __init__(self, stage: CycleStage, reason: str):
        super().__init__(reason)
        self.stage = stage
        self.reason = reason


def run_cycle(scene: Scene, cfg: RunConfig, seed: int) -> CycleReport:
    """Detect, pick, reorient and insert one screw from ``scene``.

    Stage errors end the cycle with a failure entry in the report instead
    of raising. Fresh fingertips are homed once before the first stage and
    again at the end of the cycle, at the home pose.
    """
    report = CycleReport(seed=seed)
    spec = scene.screws[0].spec if scene.screws else cfg.screw_spec()
    planner_cfg = cfg.planner_config()
    tip_cfg = cfg.fingertip_config()
    window = math.radians(cfg.fingertip.sensing_window_deg)
    step = tip_cfg.rotation_step
    seconds = cfg.cycle.stage_seconds
    rng_grasp = np.random.default_rng([seed, 1])
    rng_image = np.random.default_rng([seed, 2])
    rng_home = np.random.default_rng([seed, 3])

    def finish(stage: CycleStage, duration: float):
        report.completed_stages.append(stage.value)
        report.stage_timings[stage.value] = duration

    try:
        fingertip = calibrate_home(FingertipState(), float(rng_home.uniform(0, 2 * math.pi)),
                                   window, step)
        report.calibration_steps.append(fingertip.calibration_steps)

        # Detect
        cam = top_camera(cfg.camera.top_height, scene.table_height)
        cloud = render_cloud(scene, cam, cfg.noise.cloud_sigma)
        try:
            best = select_candidate(detect_screws(cloud, spec, cam))
        except InHandError as exc:
            raise _Failed(CycleStage.DETECT, "no-candidate") from exc
        screw = scene.screws[best.label - 1]
        report.selected_label = best.label
        report.pitch_est = best.pitch
        report.pitch_true = true_pitch(screw)
        finish(CycleStage.DETECT, seconds["Detect"])

        # PreGrasp
        pre = pregrasp_fingertip_rotation(best.pitch, planner_cfg)
        report.pregrasp_rotation = pre
        fingertip = FingertipState(normalize_angle(pre), fingertip.wheel_travel, True)
        finish(CycleStage.PREGRASP, seconds["PreGrasp"])

        # Grasp
        try:
            state = grasp(report.pitch_true, head_side(screw),
                          grasp_head_distance(screw, best.centroid), pre, tip_cfg, rng_grasp)
        except InHandError as exc:
            raise _Failed(CycleStage.GRASP, type(exc).__name__) from exc
        finish(CycleStage.GRASP, seconds["Grasp"])

        # MidPose: the arm presents the fingertip to the side camera
        side = side_camera(cfg.camera.side_distance)
        noise = cfg.noise.image_noise_pct

        def sensor(s):
            return render_side_image(s, spec, side, noise, rng=rng_image)

        finish(CycleStage.MIDPOSE, seconds["MidPose"])

        # Reorient
        try:
            result: ReorientResult = run_reorientation(
                state, fingertip, planner_cfg, sensor, cfg.desired_pose(), tip_cfg)
        except InHandError as exc:
            raise _Failed(CycleStage.REORIENT, type(exc).__name__) from exc
        state, fingertip = result.state, result.fingertip
        report.reorient_iterations = result.iterations
        report.alpha_final = state.alpha
        report.trace_csv = result.trace_csv()
        if not result.converged:
            raise _Failed(CycleStage.REORIENT, "not-converged")
        finish(CycleStage.REORIENT, seconds["Reorient"] * max(1, result.iterations))

        # Insert: align over the hole, open the fingers, let the screw drop in
        if not check_insertion(state, spec, scene.hole, cfg.cycle.insertion_engagement):
            raise _Failed(CycleStage.INSERT, "jammed")
        report.inserted = True
        finish(CycleStage.INSERT, seconds["Insert"])

        finish(CycleStage.HOME, seconds["Home"])

        fingertip = calibrate_home(fingertip, fingertip.turntable_angle, window, step)
        report.calibration_steps.append(fingertip.calibration_steps)
        finish(CycleStage.CALIBRATE, seconds["Calibrate"])
    except _Failed as exc:
        report.failure = (exc.stage.value, exc.reason)
    except InHandError as exc:
        # Hall-sensor faults are the only stage errors not mapped above
        report.failure = (CycleStage.CALIBRATE.value, type(exc).__name__)
    return report
