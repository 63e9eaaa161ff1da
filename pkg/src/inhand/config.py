"""Run configuration: one JSON document, every field optional.

Angles are stored in degrees (keys ending in ``_deg``) and lengths in
meters so the file stays readable; the ``*_config`` helpers convert to the
radian-based runtime objects.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field, fields

from .errors import InvalidArgument
from .fingertip import FingertipConfig
from .planner import DesiredPose, PlannerConfig
from .scene import MODES, ScrewSpec


@dataclass(frozen=True)
class SceneSection:
    shaft_length: float = 0.040
    shaft_radius: float = 0.003
    head_radius: float = 0.005
    head_height: float = 0.004
    count: int = 5
    mode: str = "mixed"
    table_height: float = 0.0
    clearance_ratio: float = 1.1


@dataclass(frozen=True)
class NoiseSection:
    cloud_sigma: float = 0.0005
    image_noise_pct: float = 0.05
    grasp_noise_deg: float = 3.0


@dataclass(frozen=True)
class PlannerSection:
    i_mx: float = 135.0
    alpha_tol_deg: float = 1.0
    max_iterations: int = 10
    translate_step: float = 0.005
    flat_threshold_deg: float = 5.0
    head_exposure: float = 0.010


@dataclass(frozen=True)
class FingertipSection:
    rotation_step_deg: float = 0.5
    translation_step: float = 0.0005
    groove_reach: float = 0.015
    eccentricity: float = 0.002
    seat_offset: float = 0.00025
    max_grasp_tilt_deg: float = 80.0
    sensing_window_deg: float = 2.0


@dataclass(frozen=True)
class CameraSection:
    top_height: float = 0.5
    side_distance: float = 1.0


@dataclass(frozen=True)
class CycleSection:
    insertion_engagement: float = 0.010
    # simulated stage durations in seconds; arm motion is not simulated
    stage_seconds: dict = field(default_factory=lambda: {
        "Detect": 0.5, "PreGrasp": 1.0, "Grasp": 1.5, "MidPose": 2.0,
        "Reorient": 0.8, "Insert": 2.0, "Home": 1.5, "Calibrate": 0.2,
    })


@dataclass(frozen=True)
class RunConfig:
    scene: SceneSection = field(default_factory=SceneSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    planner: PlannerSection = field(default_factory=PlannerSection)
    fingertip: FingertipSection = field(default_factory=FingertipSection)
    camera: CameraSection = field(default_factory=CameraSection)
    cycle: CycleSection = field(default_factory=CycleSection)
    base_seed: int = 0
    out_dir: str = "out"

    def __post_init__(self):
        if self.scene.mode not in MODES:
            raise InvalidArgument(f"scene.mode must be one of {MODES}")
        if self.scene.count < 0:
            raise InvalidArgument("scene.count must be >= 0")
        if self.noise.cloud_sigma < 0 or not 0 <= self.noise.image_noise_pct < 1:
            raise InvalidArgument("noise levels out of range")
        # build the runtime objects once so bad values fail at load time
        self.screw_spec()
        self.planner_config()
        self.fingertip_config()

    # --- runtime views -------------------------------------------------------

    def screw_spec(self) -> ScrewSpec:
        s = self.scene
        return ScrewSpec(s.shaft_length, s.shaft_radius, s.head_radius, s.head_height)

    def planner_config(self) -> PlannerConfig:
        p = self.planner
        return PlannerConfig(
            i_mx=p.i_mx, alpha_tol=math.radians(p.alpha_tol_deg),
            max_iterations=p.max_iterations, translate_step=p.translate_step,
            rotation_step=math.radians(self.fingertip.rotation_step_deg),
            flat_threshold=math.radians(p.flat_threshold_deg),
        )

    def desired_pose(self) -> DesiredPose:
        return DesiredPose(0.0, self.planner.head_exposure)

    def fingertip_config(self) -> FingertipConfig:
        f = self.fingertip
        return FingertipConfig(
            rotation_step=math.radians(f.rotation_step_deg),
            translation_step=f.translation_step, groove_reach=f.groove_reach,
            eccentricity=f.eccentricity, seat_offset=f.seat_offset,
            grasp_noise=math.radians(self.noise.grasp_noise_deg),
            max_grasp_tilt=math.radians(f.max_grasp_tilt_deg),
        )

    def noiseless(self) -> "RunConfig":
        return dataclasses.replace(self, noise=NoiseSection(0.0, 0.0, 0.0))

    # --- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise InvalidArgument("config must be a JSON object")
        kwargs = {}
        known = {f.name: f for f in fields(cls)}
        for key, value in d.items():
            if key not in known:
                raise InvalidArgument(f"unknown config key {key!r}")
            section_type = _SECTIONS.get(key)
            kwargs[key] = _section(section_type, value, key) if section_type else value
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidArgument(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


_SECTIONS = {
    "scene": SceneSection, "noise": NoiseSection, "planner": PlannerSection,
    "fingertip": FingertipSection, "camera": CameraSection, "cycle": CycleSection,
}


def _section(kind, value, name):
    if not isinstance(value, dict):
        raise InvalidArgument(f"config section {name!r} must be an object")
    names = {f.name for f in fields(kind)}
    unknown = set(value) - names
    if unknown:
        raise InvalidArgument(f"unknown keys in {name!r}: {sorted(unknown)}")
    if kind is CycleSection and "stage_seconds" in value:
        merged = CycleSection().stage_seconds | dict(value["stage_seconds"])
        value = {**value, "stage_seconds": merged}
    return kind(**value)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return RunConfig.from_json(fh.read())
