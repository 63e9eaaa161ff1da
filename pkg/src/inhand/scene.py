"""Seeded synthetic screw scenes on a table.

A screw's local frame has its origin at the head centre and +z pointing from
the tip towards the head. The shaft occupies local z in
``[-(head_height/2 + shaft_length), 0]``; the head is a spheroid with
equatorial radius ``head_radius`` and polar half-height ``head_height/2``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, SceneGenerationError
from .geometry import Pose6D, rotation_between

SCENE_FORMAT_VERSION = 1

SUPPORTS = ("flat", "tilted")
MODES = ("flat", "tilted", "mixed")

# bin footprint on the table, meters (x half-width, y half-width)
BIN_HALF_EXTENT = (0.15, 0.11)
TILT_RANGE = (math.radians(15.0), math.radians(60.0))
MAX_PLACEMENT_TRIES = 2000


@dataclass(frozen=True)
class ScrewSpec:
    shaft_length: float = 0.040
    shaft_radius: float = 0.003
    head_radius: float = 0.005
    head_height: float = 0.004

    def __post_init__(self):
        dims = (self.shaft_length, self.shaft_radius, self.head_radius, self.head_height)
        if not all(math.isfinite(d) and d > 0 for d in dims):
            raise InvalidArgument("screw dimensions must be positive")
        if self.head_radius <= self.shaft_radius:
            raise InvalidArgument("head_radius must exceed shaft_radius")

    @property
    def tip_offset(self) -> float:
        """Distance from the head centre to the tip along the axis."""
        return self.head_height / 2.0 + self.shaft_length

    @property
    def total_length(self) -> float:
        return self.head_height + self.shaft_length

    def volume_centroid_offset(self) -> float:
        """Signed local-z of the solid's centroid (negative: towards the tip)."""
        shaft_v = math.pi * self.shaft_radius**2 * self.shaft_length
        head_v = 4.0 / 3.0 * math.pi * self.head_radius**2 * (self.head_height / 2.0)
        shaft_c = -(self.head_height / 2.0 + self.shaft_length / 2.0)
        return shaft_v * shaft_c / (shaft_v + head_v)


@dataclass(frozen=True)
class PlacedScrew:
    spec: ScrewSpec
    pose: Pose6D
    support: str = "flat"

    @property
    def head_center(self) -> np.ndarray:
        return np.asarray(self.pose.position)

    @property
    def axis(self) -> np.ndarray:
        """Unit vector from tip to head in world coordinates."""
        return self.pose.rotation[:, 2].copy()

    @property
    def tip(self) -> np.ndarray:
        return self.head_center - self.spec.tip_offset * self.axis

    @property
    def centroid(self) -> np.ndarray:
        return self.head_center + self.spec.volume_centroid_offset() * self.axis

    def lowest_z(self) -> float:
        s, u = self.spec, self.axis
        horiz = math.sqrt(max(0.0, 1.0 - u[2] ** 2))
        head = self.head_center[2] - math.sqrt(
            s.head_radius**2 * horiz**2 + (s.head_height / 2.0) ** 2 * u[2] ** 2
        )
        tip = self.tip[2] - s.shaft_radius * horiz
        top = self.head_center[2] - s.shaft_radius * horiz
        return min(head, tip, top)


@dataclass(frozen=True)
class Hole:
    pose: Pose6D
    radius: float


@dataclass(frozen=True)
class Scene:
    screws: tuple[PlacedScrew, ...]
    table_height: float
    hole: Hole
    seed: int

    def to_dict(self) -> dict:
        return {
            "version": SCENE_FORMAT_VERSION,
            "seed": self.seed,
            "table_height": self.table_height,
            "hole": {
                "pose": _pose_to_dict(self.hole.pose),
                "radius": self.hole.radius,
            },
            "screws": [
                {
                    "spec": {
                        "shaft_length": s.spec.shaft_length,
                        "shaft_radius": s.spec.shaft_radius,
                        "head_radius": s.spec.head_radius,
                        "head_height": s.spec.head_height,
                    },
                    "pose": _pose_to_dict(s.pose),
                    "support": s.support,
                }
                for s in self.screws
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        if d.get("version") != SCENE_FORMAT_VERSION:
            raise InvalidArgument(f"unsupported scene version {d.get('version')!r}")
        screws = tuple(
            PlacedScrew(ScrewSpec(**s["spec"]), _pose_from_dict(s["pose"]), s["support"])
            for s in d["screws"]
        )
        hole = Hole(_pose_from_dict(d["hole"]["pose"]), float(d["hole"]["radius"]))
        return cls(screws, float(d["table_height"]), hole, int(d["seed"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Scene":
        return cls.from_dict(json.loads(text))


def _pose_to_dict(p: Pose6D) -> dict:
    return {"position": list(p.position), "orientation": list(p.orientation)}


def _pose_from_dict(d: dict) -> Pose6D:
    return Pose6D(tuple(d["position"]), tuple(d["orientation"]))


def screw_pose(head_center, yaw: float, pitch: float) -> Pose6D:
    """Pose whose local +z (head direction) has the given yaw and signed elevation."""
    axis = np.array(
        [math.cos(pitch) * math.cos(yaw), math.cos(pitch) * math.sin(yaw), math.sin(pitch)]
    )
    q = rotation_between([0.0, 0.0, 1.0], axis)
    return Pose6D(tuple(float(c) for c in head_center), q)


def place_screw(spec: ScrewSpec, xy, yaw: float, pitch: float, support: str,
                table_height: float = 0.0) -> PlacedScrew:
    """Place a screw with its axis midpoint above ``xy`` and lowest point on the table."""
    probe = PlacedScrew(spec, screw_pose((0.0, 0.0, 0.0), yaw, pitch), support)
    mid = probe.axis * (-spec.tip_offset / 2.0 + spec.head_height / 4.0)
    center = np.array([xy[0] - mid[0], xy[1] - mid[1], table_height - probe.lowest_z()])
    return PlacedScrew(spec, screw_pose(center, yaw, pitch), support)


def segment_distance(p0, p1, q0, q1) -> float:
    """Minimum distance between segments [p0, p1] and [q0, q1]."""
    p0, p1, q0, q1 = (np.asarray(v, dtype=float) for v in (p0, p1, q0, q1))
    d1, d2, r = p1 - p0, q1 - q0, p0 - q0
    a, e, f = d1 @ d1, d2 @ d2, d2 @ r
    eps = 1e-15
    if a <= eps and e <= eps:
        return float(np.linalg.norm(r))
    if a <= eps:
        s, t = 0.0, min(max(f / e, 0.0), 1.0)
    else:
        c = d1 @ r
        if e <= eps:
            t, s = 0.0, min(max(-c / a, 0.0), 1.0)
        else:
            b = d1 @ d2
            denom = a * e - b * b
            s = min(max((b * f - c * e) / denom, 0.0), 1.0) if denom > eps else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t, s = 0.0, min(max(-c / a, 0.0), 1.0)
            elif t > 1.0:
                t, s = 1.0, min(max((b - c) / a, 0.0), 1.0)
    return float(np.linalg.norm((p0 + d1 * s) - (q0 + d2 * t)))


def bounding_segment(screw: PlacedScrew) -> tuple[np.ndarray, np.ndarray]:
    top = screw.head_center + screw.axis * screw.spec.head_height / 2.0
    return screw.tip, top


def clearance(a: PlacedScrew, b: PlacedScrew) -> float:
    """Gap between the two bounding cylinders (negative when they overlap)."""
    d = segment_distance(*bounding_segment(a), *bounding_segment(b))
    return d - a.spec.head_radius - b.spec.head_radius


def default_hole(spec: ScrewSpec, table_height: float = 0.0,
                 clearance_ratio: float = 1.1) -> Hole:
    return Hole(Pose6D((0.25, 0.0, table_height)), clearance_ratio * spec.shaft_radius)


def generate_bin_scene(spec: ScrewSpec, count: int, mode: str, seed: int,
                       table_height: float = 0.0,
                       clearance_ratio: float = 1.1) -> Scene:
    """Scatter ``count`` screws over the bin footprint.

    Flat screws lie horizontally on the table; tilted screws lean on an
    implicit block with pitch drawn from ``TILT_RANGE`` and the head either
    up or down. ``mixed`` picks flat or tilted per screw with equal odds.
    """
    if count < 0:
        raise InvalidArgument("count must be >= 0")
    if mode not in MODES:
        raise InvalidArgument(f"mode must be one of {MODES}")
    rng = np.random.default_rng(seed)
    placed: list[PlacedScrew] = []
    hx, hy = BIN_HALF_EXTENT
    for _ in range(count):
        for _attempt in range(MAX_PLACEMENT_TRIES):
            support = mode if mode != "mixed" else SUPPORTS[int(rng.integers(2))]
            yaw = float(rng.uniform(-math.pi, math.pi))
            if support == "flat":
                pitch = 0.0
            else:
                pitch = float(rng.uniform(*TILT_RANGE))
                if rng.random() < 0.5:
                    pitch = -pitch
            # keep the whole screw inside the footprint
            reach = spec.total_length / 2.0 + spec.head_radius
            xy = (float(rng.uniform(-hx + reach, hx - reach)),
                  float(rng.uniform(-hy + reach, hy - reach)))
            cand = place_screw(spec, xy, yaw, pitch, support, table_height)
            if all(clearance(cand, other) > 0.0 for other in placed):
                placed.append(cand)
                break
        else:
            raise SceneGenerationError(
                f"could not place screw {len(placed) + 1} of {count} "
                f"after {MAX_PLACEMENT_TRIES} tries"
            )
    return Scene(tuple(placed), table_height, default_hole(spec, table_height, clearance_ratio), seed)
