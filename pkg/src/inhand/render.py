"""Analytic ray-cast rendering of the two sensor views.

* ``render_cloud``: the downward-looking RGB-D camera over the bin. Instance
  labels stand in for colour segmentation.
* ``render_side_image``: the side camera looking at the fingertip. The groove
  plane is the fingertip frame's X-Y plane (X to the image right, Y up along
  the gripper axis, Z towards the camera); the turntable pivot is its origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .geometry import GrayImage, LabeledCloud, PixelPoint, Pose6D, quat_from_matrix
from .scene import PlacedScrew, Scene, ScrewSpec

BACKGROUND_LEVEL = 40
SHAFT_LEVEL = 180
HEAD_LEVEL = 250

SIDE_RESOLUTION = 270
SIDE_PX_PER_M = 5000.0
# row of the fingertip midpoint I_m in the side image
SIDE_PIVOT_ROW = 200
# the turntable hides the screw up to this distance from the pivot along its axis
FINGERTIP_OCCLUSION = 0.005
# only every n-th table pixel is kept as a background point
BACKGROUND_STRIDE = 4
# sub-samples per axis for side-image pixels on a silhouette boundary
SIDE_SUPERSAMPLE = 4


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera. ``pose`` maps camera coordinates (x right, y down,
    z forward) to world coordinates."""

    pose: Pose6D
    focal: float
    principal: PixelPoint
    width: int
    height: int

    def __post_init__(self):
        if not self.focal > 0:
            raise InvalidArgument("focal length must be positive")
        if not self.principal.in_bounds(self.width, self.height):
            raise InvalidArgument("principal point outside the image")

    def rays(self, cols=None, rows=None) -> tuple[np.ndarray, np.ndarray]:
        """Origin and unit world directions for pixel centres (row-major)."""
        if cols is None:
            cols = np.arange(self.width)
        if rows is None:
            rows = np.arange(self.height)
        uu, vv = np.meshgrid(np.asarray(cols, float), np.asarray(rows, float))
        return self.rays_at(uu.ravel(), vv.ravel())

    def rays_at(self, u, v) -> tuple[np.ndarray, np.ndarray]:
        """Origin and unit world directions through arbitrary (u, v) pixel positions."""
        u = np.asarray(u, dtype=float).ravel()
        v = np.asarray(v, dtype=float).ravel()
        d_cam = np.stack([u - self.principal.x, v - self.principal.y,
                          np.full_like(u, self.focal)], axis=-1)
        d = d_cam @ self.pose.rotation.T
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        return np.asarray(self.pose.position, dtype=float), d

    def project(self, p) -> np.ndarray:
        """World point(s) to (u, v) pixel coordinates."""
        p = np.atleast_2d(np.asarray(p, dtype=float))
        c = (p - np.asarray(self.pose.position)) @ self.pose.rotation
        return np.stack(
            [self.focal * c[:, 0] / c[:, 2] + self.principal.x,
             self.focal * c[:, 1] / c[:, 2] + self.principal.y],
            axis=-1,
        )

    def depth(self, p) -> np.ndarray:
        p = np.atleast_2d(np.asarray(p, dtype=float))
        return ((p - np.asarray(self.pose.position)) @ self.pose.rotation)[:, 2]


def top_camera(height: float = 0.5, table_height: float = 0.0) -> CameraModel:
    """Default downward-looking camera: 640x480, 800 px focal, over the bin centre."""
    rot = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
    return CameraModel(
        Pose6D((0.0, 0.0, table_height + height), quat_from_matrix(rot)),
        800.0, PixelPoint(320.0, 240.0), 640, 480,
    )


def side_camera(distance: float = 1.0) -> CameraModel:
    """Default side camera: 270x270 frame, fingertip midpoint at column 135.

    The narrow field of view makes the projection nearly orthographic at
    ``SIDE_PX_PER_M`` pixels per meter in the groove plane.
    """
    rot = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
    c = SIDE_RESOLUTION // 2
    focal = SIDE_PX_PER_M * distance
    y_offset = (SIDE_PIVOT_ROW - c) / SIDE_PX_PER_M
    return CameraModel(
        Pose6D((0.0, y_offset, distance), quat_from_matrix(rot)),
        focal, PixelPoint(float(c), float(c)), SIDE_RESOLUTION, SIDE_RESOLUTION,
    )


# --- ray / primitive intersection ------------------------------------------------


def _slab(wa, va, s0, s1):
    """Parameter interval where the axial coordinate ``wa + t*va`` lies in [s0, s1]."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = (s0 - wa) / va
        tb = (s1 - wa) / va
    lo = np.minimum(ta, tb)
    hi = np.maximum(ta, tb)
    parallel = np.abs(va) < 1e-15
    inside = (wa >= s0) & (wa <= s1)
    lo = np.where(parallel, np.where(inside, -np.inf, np.inf), lo)
    hi = np.where(parallel, np.where(inside, np.inf, -np.inf), hi)
    if s0 > s1:
        # empty range, e.g. a part clipped away entirely
        return np.full_like(lo, np.inf), np.full_like(hi, -np.inf)
    return lo, hi


def _quadratic_interval(A, B, C):
    """Interval where A t^2 + B t + C <= 0 (A >= 0)."""
    disc = B * B - 4.0 * A * C
    ok = (disc >= 0) & (A > 1e-15)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    A_safe = np.where(ok, A, 1.0)
    lo = np.where(ok, (-B - sq) / (2 * A_safe), np.inf)
    hi = np.where(ok, (-B + sq) / (2 * A_safe), -np.inf)
    degenerate = A <= 1e-15
    lo = np.where(degenerate, np.where(C <= 0, -np.inf, np.inf), lo)
    hi = np.where(degenerate, np.where(C <= 0, np.inf, -np.inf), hi)
    return lo, hi


def _entry(lo, hi):
    t = np.maximum(lo, 0.0)
    return np.where((lo <= hi) & (hi > 0.0), t, np.inf)


def ray_cylinder(origin, dirs, base, axis, radius, s0, s1) -> np.ndarray:
    """Entry distance of each ray into the solid cylinder of given radius whose
    axial coordinate ``(p - base) . axis`` lies in [s0, s1]; ``inf`` on a miss."""
    axis = np.asarray(axis, float)
    w = np.asarray(origin, float) - np.asarray(base, float)
    va = dirs @ axis
    wa = w @ axis
    v_perp = dirs - va[:, None] * axis
    w_perp = w - wa * axis
    A = np.einsum("ij,ij->i", v_perp, v_perp)
    B = 2.0 * (v_perp @ w_perp)
    C = float(w_perp @ w_perp) - radius * radius
    lo1, hi1 = _quadratic_interval(A, B, np.full_like(A, C))
    lo2, hi2 = _slab(np.full_like(va, wa), va, s0, s1)
    return _entry(np.maximum(lo1, lo2), np.minimum(hi1, hi2))


def ray_spheroid(origin, dirs, center, axis, eq_radius, polar_radius,
                 s_min=-np.inf) -> np.ndarray:
    """Entry distance into a spheroid (symmetry axis ``axis``) clipped to axial
    coordinate >= ``s_min``; ``inf`` on a miss."""
    axis = np.asarray(axis, float)
    w = np.asarray(origin, float) - np.asarray(center, float)
    va = dirs @ axis
    wa = float(w @ axis)
    v_perp = dirs - va[:, None] * axis
    w_perp = w - wa * axis
    # scale to a unit sphere
    a2, c2 = eq_radius**2, polar_radius**2
    A = np.einsum("ij,ij->i", v_perp, v_perp) / a2 + va * va / c2
    B = 2.0 * ((v_perp @ w_perp) / a2 + va * wa / c2)
    C = float(w_perp @ w_perp) / a2 + wa * wa / c2 - 1.0
    lo1, hi1 = _quadratic_interval(A, B, np.full_like(A, C))
    lo2, hi2 = _slab(np.full_like(va, wa), va, s_min, np.inf)
    return _entry(np.maximum(lo1, lo2), np.minimum(hi1, hi2))


def screw_hits(origin, dirs, spec: ScrewSpec, head_center, axis,
               s_min: float = -np.inf) -> tuple[np.ndarray, np.ndarray]:
    """Entry distances for (shaft, head) of a screw; parts with axial coordinate
    (relative to the head centre) below ``s_min`` are clipped away."""
    t_shaft = ray_cylinder(origin, dirs, head_center, axis, spec.shaft_radius,
                           max(-spec.tip_offset, s_min), 0.0)
    t_head = ray_spheroid(origin, dirs, head_center, axis, spec.head_radius,
                          spec.head_height / 2.0, s_min)
    return t_shaft, t_head


# --- top view --------------------------------------------------------------------


def _screw_pixel_box(cam: CameraModel, screw: PlacedScrew, margin: int = 3):
    s = screw.spec
    pts = []
    for end in (screw.tip, screw.head_center + screw.axis * s.head_height / 2.0):
        for dx in (-1, 1):
            for dy in (-1, 1):
                for dz in (-1, 1):
                    pts.append(end + s.head_radius * np.array([dx, dy, dz]))
    pts = np.array(pts)
    if np.any(cam.depth(pts) <= 0):
        return 0, cam.width, 0, cam.height
    uv = cam.project(pts)
    u0 = int(max(0, math.floor(uv[:, 0].min()) - margin))
    u1 = int(min(cam.width, math.ceil(uv[:, 0].max()) + margin + 1))
    v0 = int(max(0, math.floor(uv[:, 1].min()) - margin))
    v1 = int(min(cam.height, math.ceil(uv[:, 1].max()) + margin + 1))
    return u0, u1, v0, v1


def render_cloud(scene: Scene, cam: CameraModel, noise_sigma: float) -> LabeledCloud:
    """Sample one point per pixel on the nearest visible surface.

    Screw ``i`` in ``scene.screws`` gets label ``i + 1``. Table hits are kept
    on a sparse grid with label 0. Gaussian noise of ``noise_sigma`` meters
    is added to every coordinate after sampling, seeded by the scene seed.
    """
    if noise_sigma < 0:
        raise InvalidArgument("noise_sigma must be >= 0")
    origin, dirs = cam.rays()
    n = len(dirs)
    depth = np.full(n, np.inf)
    labels = np.zeros(n, dtype=np.int64)

    with np.errstate(divide="ignore", invalid="ignore"):
        t_table = (scene.table_height - origin[2]) / dirs[:, 2]
    t_table = np.where(t_table > 0, t_table, np.inf)
    depth[:] = t_table

    for idx, screw in enumerate(scene.screws, start=1):
        u0, u1, v0, v1 = _screw_pixel_box(cam, screw)
        if u0 >= u1 or v0 >= v1:
            continue
        cols = np.arange(u0, u1)
        rows = np.arange(v0, v1)
        flat = (rows[:, None] * cam.width + cols[None, :]).reshape(-1)
        t_s, t_h = screw_hits(origin, dirs[flat], screw.spec, screw.head_center, screw.axis)
        t = np.minimum(t_s, t_h)
        closer = t < depth[flat]
        depth[flat[closer]] = t[closer]
        labels[flat[closer]] = idx

    rows_all = np.repeat(np.arange(cam.height), cam.width)
    cols_all = np.tile(np.arange(cam.width), cam.height)
    keep_bg = (rows_all % BACKGROUND_STRIDE == 0) & (cols_all % BACKGROUND_STRIDE == 0)
    keep = np.isfinite(depth) & ((labels > 0) | keep_bg)

    pts = origin + dirs[keep] * depth[keep, None]
    lab = labels[keep]
    if noise_sigma > 0:
        rng = np.random.default_rng([scene.seed & 0xFFFFFFFFFFFFFFFF, 0xC10D])
        pts = pts + rng.normal(0.0, noise_sigma, size=pts.shape)
    return LabeledCloud(pts, lab)


# --- side view -------------------------------------------------------------------


def inhand_axis(alpha: float) -> np.ndarray:
    """Head direction in the fingertip frame for in-hand angle ``alpha``."""
    return np.array([math.sin(alpha), math.cos(alpha), 0.0])


def head_pixel(state, cam: CameraModel) -> PixelPoint:
    """Where the head centre of an in-hand screw projects in the side image."""
    uv = cam.project([state.x, state.y, 0.0])[0]
    return PixelPoint(float(uv[0]), float(uv[1]))


def image_alpha(alpha: float) -> float:
    """In-hand angle expressed in the endpoint-ordered image-angle convention.

    With x right / y down and the left endpoint first, a head-up screw leaning
    towards +x rises to the right, so the image angle is ``-alpha`` folded into
    [-pi/2, pi/2].
    """
    a = -alpha
    while a > math.pi / 2:
        a -= math.pi
    while a < -math.pi / 2:
        a += math.pi
    return a


def _side_levels(origin, dirs, spec, head, u, s_min, show_head):
    t_shaft, t_head = screw_hits(origin, dirs, spec, head, u, s_min)
    if not show_head:
        t_head = np.full_like(t_head, np.inf)
    level = np.full(len(dirs), float(BACKGROUND_LEVEL))
    level[np.isfinite(t_shaft)] = SHAFT_LEVEL
    level[np.isfinite(t_head) & (t_head <= t_shaft)] = HEAD_LEVEL
    return level


def render_side_image(state, spec: ScrewSpec, cam: CameraModel | None = None,
                      noise_pct: float = 0.0, *, show_head: bool = True,
                      rng: np.random.Generator | None = None,
                      occlusion: float = FINGERTIP_OCCLUSION,
                      supersample: int = SIDE_SUPERSAMPLE) -> GrayImage:
    """Render the in-hand screw as seen by the side camera.

    ``state`` needs ``x``, ``y`` (head centre in the groove plane, meters) and
    ``alpha``. The part of the screw within ``occlusion`` of the pivot along
    its own axis is hidden by the turntable. Pixels on a silhouette boundary
    are averaged over a ``supersample`` x ``supersample`` grid, as a sensor
    integrates light over its pixel area. ``noise_pct`` is a fraction
    (0.05 = 5 %) of multiplicative uniform per-pixel noise.
    """
    cam = cam or side_camera()
    if not 0 <= noise_pct < 1:
        raise InvalidArgument("noise_pct must be a fraction in [0, 1)")
    if supersample < 1:
        raise InvalidArgument("supersample must be >= 1")
    u = inhand_axis(state.alpha)
    head = np.array([state.x, state.y, 0.0])
    s_min = occlusion - float(head @ u)
    origin, dirs = cam.rays()
    img = _side_levels(origin, dirs, spec, head, u, s_min, show_head)
    img = img.reshape(cam.height, cam.width)

    if supersample > 1:
        # a pixel needs supersampling when its 3x3 neighbourhood is not uniform
        pad = np.pad(img, 1, mode="edge")
        lo = np.minimum.reduce([pad[dy:dy + cam.height, dx:dx + cam.width]
                                for dy in range(3) for dx in range(3)])
        hi = np.maximum.reduce([pad[dy:dy + cam.height, dx:dx + cam.width]
                                for dy in range(3) for dx in range(3)])
        rows, cols = np.nonzero(hi > lo)
        if len(rows):
            offs = (np.arange(supersample) + 0.5) / supersample - 0.5
            ou, ov = np.meshgrid(offs, offs)
            su = (cols[:, None] + ou.ravel()[None, :]).ravel()
            sv = (rows[:, None] + ov.ravel()[None, :]).ravel()
            _, sub_dirs = cam.rays_at(su, sv)
            sub = _side_levels(origin, sub_dirs, spec, head, u, s_min, show_head)
            img[rows, cols] = sub.reshape(len(rows), -1).mean(axis=1)

    if noise_pct > 0:
        rng = rng if rng is not None else np.random.default_rng(0)
        img = img * (1.0 + rng.uniform(-noise_pct, noise_pct, size=img.shape))
    img = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return GrayImage(cam.width, cam.height, img)
