"""Screw detection in the top-view cloud: segmentation, PCA axis, pitch, scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AmbiguousAxis, InsufficientPoints, NoCandidate
from .geometry import LabeledCloud, UnitVec3
from .render import CameraModel
from .scene import ScrewSpec

# relative eigenvalue gap below which the major axis is considered undefined
AXIS_GAP_TOL = 1e-6


@dataclass(frozen=True)
class ScrewDetection:
    label: int
    axis: UnitVec3
    centroid: tuple[float, float, float]
    pitch: float
    score: float
    n_points: int = 0


def segment_screws(cloud: LabeledCloud) -> dict[int, np.ndarray]:
    """Group non-background points by label, in ascending label order."""
    out = {}
    for lab in np.unique(cloud.labels):
        if lab == 0:
            continue
        out[int(lab)] = cloud.points[cloud.labels == lab]
    return out


def _symmetric_eigh(cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric 3x3 matrix, ascending eigenvalues.

    LAPACK's ``syevd`` is accurate to machine precision for symmetric input;
    the residual check guards against a silent failure.
    """
    w, v = np.linalg.eigh(cov)
    scale = max(1.0, float(np.abs(cov).max()))
    if np.abs(cov @ v - v * w).max() > 1e-12 * scale:
        raise AmbiguousAxis("eigen-solve did not converge")
    return w, v


def _fix_sign(v: np.ndarray) -> np.ndarray:
    for c in (v[2], v[0], v[1]):
        if c > 0:
            return v
        if c < 0:
            return -v
    return v


def principal_axis(points) -> UnitVec3:
    """Unit eigenvector of the 1/N covariance with the largest eigenvalue.

    The sign is fixed so that ez >= 0, ties broken by ex >= 0, then ey >= 0.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) < 3:
        raise InsufficientPoints(f"need at least 3 points, got {len(pts)}")
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered / len(pts)
    w, v = _symmetric_eigh(cov)
    if w[2] <= 0 or (w[2] - w[1]) / w[2] < AXIS_GAP_TOL:
        raise AmbiguousAxis("largest eigenvalue is not separated")
    # round-off zeros would otherwise decide the sign for axis-aligned input
    axis = np.where(np.abs(v[:, 2]) < 1e-12, 0.0, v[:, 2])
    return UnitVec3.from_vector(_fix_sign(axis))


def pitch_angle(axis: UnitVec3) -> float:
    """Elevation of the axis above the horizontal plane."""
    horiz = math.sqrt(axis.ex * axis.ex + axis.ey * axis.ey)
    if horiz == 0.0:
        return math.copysign(math.pi / 2, axis.ez)
    return math.atan(axis.ez / horiz)


def expected_point_count(spec: ScrewSpec, pitch: float, depth: float, focal: float) -> float:
    """Pixels an unoccluded screw covers at ``depth`` for the given pitch.

    Projected silhouette area of shaft plus head, times the pixel density
    ``(focal / depth)**2`` of a pinhole camera looking straight down.
    """
    c, s = abs(math.cos(pitch)), abs(math.sin(pitch))
    shaft = 2.0 * spec.shaft_radius * spec.shaft_length * c
    a, h = spec.head_radius, spec.head_height / 2.0
    head = math.pi * a * math.sqrt(a * a * s * s + h * h * c * c)
    return (shaft + head) * (focal / depth) ** 2


def detect_screws(cloud: LabeledCloud, spec: ScrewSpec, cam: CameraModel) -> list[ScrewDetection]:
    """Run segmentation, PCA and scoring over every labelled instance.

    Instances whose axis cannot be estimated are skipped.
    """
    detections = []
    for label, pts in segment_screws(cloud).items():
        try:
            axis = principal_axis(pts)
        except (InsufficientPoints, AmbiguousAxis):
            continue
        centroid = pts.mean(axis=0)
        pitch = pitch_angle(axis)
        depth = float(cam.depth(centroid)[0])
        expected = expected_point_count(spec, pitch, depth, cam.focal)
        score = min(max(len(pts) / expected, 0.0), 1.0)
        detections.append(
            ScrewDetection(label, axis, tuple(float(c) for c in centroid), pitch, score, len(pts))
        )
    return detections


def select_candidate(detections) -> ScrewDetection:
    """Highest score wins; ties go to the lowest label."""
    detections = list(detections)
    if not detections:
        raise NoCandidate("no screw detected")
    return min(detections, key=lambda d: (-d.score, d.label))
