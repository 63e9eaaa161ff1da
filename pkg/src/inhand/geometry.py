"""Shared geometric vocabulary: angles, unit vectors, poses, images and clouds.

All angles are radians. Image coordinates are x-right / y-down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument

_UNIT_TOL = 1e-9


def normalize_angle(a: float) -> float:
    """Wrap ``a`` into the half-open interval (-pi, pi]."""
    if not math.isfinite(a):
        raise InvalidArgument(f"angle must be finite, got {a!r}")
    r = math.fmod(a, 2.0 * math.pi)
    if r <= -math.pi:
        r += 2.0 * math.pi
    elif r > math.pi:
        r -= 2.0 * math.pi
    return r


@dataclass(frozen=True)
class UnitVec3:
    ex: float
    ey: float
    ez: float

    def __post_init__(self):
        n2 = self.ex * self.ex + self.ey * self.ey + self.ez * self.ez
        if abs(n2 - 1.0) > _UNIT_TOL:
            raise InvalidArgument(f"not a unit vector (|v|^2={n2})")

    @classmethod
    def from_vector(cls, v) -> "UnitVec3":
        v = np.asarray(v, dtype=float)
        n = float(np.linalg.norm(v))
        if n == 0.0 or not math.isfinite(n):
            raise InvalidArgument("cannot normalise a zero or non-finite vector")
        v = v / n
        return cls(float(v[0]), float(v[1]), float(v[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.ex, self.ey, self.ez])


# --- quaternions, (w, x, y, z) order -------------------------------------------


def quat_multiply(q1, q2) -> tuple[float, float, float, float]:
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return (
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    )


def quat_from_axis_angle(axis, angle: float) -> tuple[float, float, float, float]:
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    s = math.sin(angle / 2.0)
    return (math.cos(angle / 2.0), float(a[0] * s), float(a[1] * s), float(a[2] * s))


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_matrix(m) -> tuple[float, float, float, float]:
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2
        q = (0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s)
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        q = ((m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s)
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        q = ((m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s)
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        q = ((m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s)
    n = math.sqrt(sum(c * c for c in q))
    return tuple(float(c / n) for c in q)


def rotation_between(a, b) -> tuple[float, float, float, float]:
    """Shortest-arc quaternion taking unit vector ``a`` onto unit vector ``b``."""
    a = np.asarray(a, dtype=float) / np.linalg.norm(a)
    b = np.asarray(b, dtype=float) / np.linalg.norm(b)
    c = float(np.dot(a, b))
    if c < -1.0 + 1e-12:
        # antiparallel: any perpendicular axis works
        perp = np.cross(a, [1.0, 0.0, 0.0])
        if np.linalg.norm(perp) < 1e-6:
            perp = np.cross(a, [0.0, 1.0, 0.0])
        return quat_from_axis_angle(perp, math.pi)
    v = np.cross(a, b)
    q = (1.0 + c, float(v[0]), float(v[1]), float(v[2]))
    n = math.sqrt(sum(x * x for x in q))
    return tuple(x / n for x in q)


@dataclass(frozen=True)
class Pose6D:
    """Rigid transform: ``world = R(orientation) @ local + position``."""

    position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    orientation: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        p = tuple(float(c) for c in self.position)
        q = tuple(float(c) for c in self.orientation)
        if len(p) != 3 or len(q) != 4:
            raise InvalidArgument("position needs 3 and orientation 4 components")
        if not all(math.isfinite(c) for c in p + q):
            raise InvalidArgument("pose components must be finite")
        if abs(math.sqrt(sum(c * c for c in q)) - 1.0) > _UNIT_TOL:
            raise InvalidArgument("orientation quaternion must have unit norm")
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation", q)

    @classmethod
    def from_matrix(cls, rot, position) -> "Pose6D":
        return cls(tuple(float(c) for c in position), quat_from_matrix(rot))

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)

    def inverse(self) -> "Pose6D":
        w, x, y, z = self.orientation
        q_inv = (w, -x, -y, -z)
        p = -quat_to_matrix(q_inv) @ np.asarray(self.position)
        return Pose6D(tuple(p), q_inv)

    def compose(self, other: "Pose6D") -> "Pose6D":
        """``self * other``: apply ``other`` first, then ``self``."""
        p = self.rotation @ np.asarray(other.position) + np.asarray(self.position)
        q = quat_multiply(self.orientation, other.orientation)
        n = math.sqrt(sum(c * c for c in q))
        return Pose6D(tuple(p), tuple(c / n for c in q))


def transform_point(frame: Pose6D, p) -> np.ndarray:
    """Apply ``frame`` to a point, or to an (N, 3) array of points."""
    p = np.asarray(p, dtype=float)
    return p @ frame.rotation.T + np.asarray(frame.position)


@dataclass(frozen=True)
class PixelPoint:
    x: float
    y: float

    def in_bounds(self, width: int, height: int) -> bool:
        return 0 <= self.x < width and 0 <= self.y < height


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit single-channel image; ``data`` has shape (height, width)."""

    width: int
    height: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.uint8)
        if arr.size != self.width * self.height:
            raise InvalidArgument(
                f"data length {arr.size} != {self.width}x{self.height}"
            )
        arr = arr.reshape(self.height, self.width)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, arr) -> "GrayImage":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise InvalidArgument("expected a 2-D array")
        return cls(arr.shape[1], arr.shape[0], arr)

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.data, other.data)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class LabeledCloud:
    """3-D points in meters with an instance label each; label 0 is background."""

    points: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 3)
        lab = np.array(self.labels, dtype=np.int64).reshape(-1)
        if len(pts) != len(lab):
            raise InvalidArgument("points and labels differ in length")
        pts.flags.writeable = False
        lab.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", lab)

    def __len__(self):
        return len(self.labels)

    __hash__ = None
