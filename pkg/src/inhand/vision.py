"""In-hand pose estimation from the side-camera image.

Pipeline: fixed ROI crop -> bright-blob head detector -> Canny edges ->
probabilistic Hough segments -> angle of the top-voted segment.
Pixel coordinates are x-right / y-down, relative to the ROI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import InvalidArgument, InvalidROI
from .geometry import GrayImage, PixelPoint

_EIGHT = np.ones((3, 3), dtype=bool)
# pixels excluded at each end of a run when fitting its direction
END_MARGIN = 5.0


@dataclass(frozen=True)
class ROI:
    x: int = 0
    y: int = 0
    width: int = 270
    height: int = 270


@dataclass(frozen=True)
class PerceptionParams:
    roi: ROI = field(default_factory=ROI)
    canny_low: float = 40.0
    canny_high: float = 120.0
    canny_sigma: float = 1.4
    rho_step: float = 1.0
    theta_step: float = math.pi / 180
    hough_threshold: int = 30
    min_len: float = 40.0
    max_gap: int = 5
    head_threshold: int = 215
    head_min_area: int = 40
    head_max_area: int = 3000
    hough_seed: int = 0
    subpixel: bool = True


@dataclass(frozen=True)
class LineSegment:
    """Hough segment with ``p1`` the left endpoint (upper one if vertical)."""

    p1: PixelPoint
    p2: PixelPoint
    votes: int

    def __post_init__(self):
        a, b = self.p1, self.p2
        if (b.x, b.y) < (a.x, a.y):
            object.__setattr__(self, "p1", b)
            object.__setattr__(self, "p2", a)

    @property
    def dx(self) -> float:
        return self.p2.x - self.p1.x

    @property
    def dy(self) -> float:
        return self.p2.y - self.p1.y

    @property
    def length(self) -> float:
        return math.hypot(self.dx, self.dy)


@dataclass(frozen=True)
class InHandObservation:
    alpha: float
    head: PixelPoint | None
    segments: tuple[LineSegment, ...] = ()

    @property
    def head_xy(self) -> tuple[float, float]:
        """Head location with the (0, 0) sentinel for "not detected"."""
        if self.head is None:
            return (0.0, 0.0)
        return (self.head.x, self.head.y)


def segment_alpha(dx: float, dy: float) -> float:
    """Angle between an endpoint-ordered segment and the image vertical.

    Two-argument arctangent of (dx, dy), folded into [-pi/2, pi/2]; a
    horizontal segment (dy == 0) gives pi/2.
    """
    if dy == 0:
        return math.pi / 2
    a = math.atan2(dx, dy)
    if a > math.pi / 2:
        a -= math.pi
    elif a < -math.pi / 2:
        a += math.pi
    return a


def get_roi(img: GrayImage, roi: ROI | None = None) -> GrayImage:
    roi = roi or ROI()
    if (roi.x < 0 or roi.y < 0 or roi.width <= 0 or roi.height <= 0
            or roi.x + roi.width > img.width or roi.y + roi.height > img.height):
        raise InvalidROI(f"{roi} does not fit a {img.width}x{img.height} image")
    crop = img.data[roi.y:roi.y + roi.height, roi.x:roi.x + roi.width]
    return GrayImage(roi.width, roi.height, crop.copy())


# --- Canny -----------------------------------------------------------------------


def gaussian_kernel(sigma: float) -> np.ndarray:
    radius = max(1, int(math.ceil(3.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=float)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _correlate_1d(img: np.ndarray, k: np.ndarray, axis: int) -> np.ndarray:
    r = len(k) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (r, r)
    p = np.pad(img, pad, mode="edge")
    out = np.zeros_like(img, dtype=float)
    n = img.shape[axis]
    for i, w in enumerate(k):
        if w == 0:
            continue
        sl = [slice(None), slice(None)]
        sl[axis] = slice(i, i + n)
        out += w * p[tuple(sl)]
    return out


def sobel(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    smooth = np.array([1.0, 2.0, 1.0])
    diff = np.array([-1.0, 0.0, 1.0])
    gx = _correlate_1d(_correlate_1d(img, smooth, 0), diff, 1)
    gy = _correlate_1d(_correlate_1d(img, smooth, 1), diff, 0)
    return gx, gy


def _shift(a: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """``out[y, x] = a[y + dy, x + dx]``, zero outside."""
    h, w = a.shape
    out = np.zeros_like(a)
    ys = slice(max(0, -dy), min(h, h - dy))
    xs = slice(max(0, -dx), min(w, w - dx))
    yd = slice(max(0, dy), min(h, h + dy))
    xd = slice(max(0, dx), min(w, w + dx))
    out[ys, xs] = a[yd, xd]
    return out


def non_max_suppression(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Keep pixels that are maxima along the gradient direction.

    A pixel must beat its backward neighbour strictly and match or beat its
    forward neighbour, so plateaus two pixels wide thin to one.
    """
    ang = np.degrees(np.arctan2(gy, gx)) % 180.0
    out = np.zeros_like(mag)
    bins = [
        ((ang < 22.5) | (ang >= 157.5), (1, 0)),
        ((ang >= 22.5) & (ang < 67.5), (1, 1)),
        ((ang >= 67.5) & (ang < 112.5), (0, 1)),
        ((ang >= 112.5) & (ang < 157.5), (-1, 1)),
    ]
    for sel, (dx, dy) in bins:
        fwd = _shift(mag, dx, dy)
        back = _shift(mag, -dx, -dy)
        keep = sel & (mag > back) & (mag >= fwd) & (mag > 0)
        out[keep] = mag[keep]
    return out


def gradient(img: GrayImage, sigma: float = 1.4) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sobel magnitude and components of the Gaussian-smoothed image."""
    a = img.data.astype(float)
    if sigma > 0:
        k = gaussian_kernel(sigma)
        a = _correlate_1d(_correlate_1d(a, k, 0), k, 1)
    gx, gy = sobel(a)
    return np.hypot(gx, gy), gx, gy


def canny_edges(img: GrayImage, low: float = 40.0, high: float = 120.0,
                sigma: float = 1.4) -> GrayImage:
    """Binary Canny edge map with values in {0, 255}.

    Gradient magnitudes are rescaled so the strongest is 255 before the
    ``low``/``high`` thresholds apply, which makes the result independent of
    overall image brightness.
    """
    if not 0 <= low < high <= 255:
        raise InvalidArgument("need 0 <= low < high <= 255")
    mag, gx, gy = gradient(img, sigma)
    peak = mag.max()
    # flat images carry only round-off gradients
    if peak < 1e-6:
        return GrayImage(img.width, img.height, np.zeros_like(img.data))
    mag = mag * (255.0 / peak)
    nms = non_max_suppression(mag, gx, gy)
    strong = nms >= high
    weak = nms >= low
    labels, n = ndimage.label(weak, structure=_EIGHT)
    keep = np.zeros(n + 1, dtype=bool)
    keep[np.unique(labels[strong])] = True
    keep[0] = False
    edges = np.where(keep[labels], 255, 0).astype(np.uint8)
    return GrayImage(img.width, img.height, edges)


# --- probabilistic Hough ----------------------------------------------------------


def _walk(mask, x0, y0, step, max_gap):
    """Follow the line from (x0, y0) in steps of ``step``; return set pixels hit
    (with a one-pixel tolerance across the line) up to the first long gap."""
    h, w = mask.shape
    if abs(step[0]) >= abs(step[1]):
        across = (0, 1)
    else:
        across = (1, 0)
    hits = []
    gap = 0
    px, py = float(x0), float(y0)
    while True:
        px += step[0]
        py += step[1]
        ix, iy = int(round(px)), int(round(py))
        if not (0 <= ix < w and 0 <= iy < h):
            break
        found = False
        for k in (0, -1, 1):
            jx, jy = ix + k * across[0], iy + k * across[1]
            if 0 <= jx < w and 0 <= jy < h and mask[jy, jx]:
                hits.append((jx, jy))
                found = True
        if found:
            gap = 0
        else:
            gap += 1
            if gap > max_gap:
                break
    return hits


def _tls(pixels: np.ndarray):
    c = pixels.mean(axis=0)
    d = pixels - c
    _, v = np.linalg.eigh(d.T @ d)
    return c, v[:, -1], v[:, 0]


def _fit_segment(pixels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Total-least-squares line through the pixels; endpoints are the extreme
    projections onto it.

    The direction comes from the run's interior with pixels more than a
    pixel off the line removed, so corner rounding and stray contour pixels
    picked up by the walk tolerance do not tilt it.
    """
    c, e, n = _tls(pixels)
    t = (pixels - c) @ e
    # smoothing rounds corners, so the last few pixels at each end bend away
    core = (t >= t.min() + END_MARGIN) & (t <= t.max() - END_MARGIN)
    if core.sum() >= 10:
        c, e, n = _tls(pixels[core])
    else:
        core = np.ones(len(pixels), dtype=bool)
    keep = core & (np.abs((pixels - c) @ n) <= 1.0)
    if 2 <= keep.sum() < core.sum():
        c, e, _ = _tls(pixels[keep])
    t = (pixels - c) @ e
    return c + t.min() * e, c + t.max() * e


def hough_lines(edges: GrayImage, rho_step: float = 1.0, theta_step: float = math.pi / 180,
                threshold: int = 30, min_len: float = 40.0, max_gap: int = 5,
                seed: int = 0) -> list[LineSegment]:
    """Progressive probabilistic Hough transform.

    Edge pixels are visited in a seeded random order and vote into a
    (theta, rho) accumulator. Once a pixel's best bin reaches ``threshold``
    the corresponding line is walked in both directions, bridging gaps of
    up to ``max_gap`` pixels. Runs of at least ``min_len`` pixels become
    segments and their pixels are withdrawn from the accumulator. Endpoints
    are refined by a least-squares fit to the run's pixels. ``votes`` is the
    number of edge pixels supporting a segment.
    """
    mask = np.asarray(edges.data) > 0
    h, w = mask.shape
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        return []
    mask = mask.copy()
    n_theta = max(1, int(round(math.pi / theta_step)))
    thetas = np.arange(n_theta) * theta_step
    cos_t, sin_t = np.cos(thetas), np.sin(thetas)
    max_rho = math.hypot(w, h)
    offset = int(math.ceil(max_rho / rho_step))
    acc = np.zeros((n_theta, 2 * offset + 1), dtype=np.int64)
    rows = np.arange(n_theta)
    voted = np.zeros_like(mask)

    def rho_bins(x, y):
        return np.rint((x * cos_t + y * sin_t) / rho_step).astype(np.int64) + offset

    rng = np.random.default_rng(seed)
    segments = []
    for idx in rng.permutation(len(xs)):
        x, y = int(xs[idx]), int(ys[idx])
        if not mask[y, x]:
            continue
        bins = rho_bins(x, y)
        acc[rows, bins] += 1
        voted[y, x] = True
        scores = acc[rows, bins]
        k = int(np.argmax(scores))
        if scores[k] < threshold:
            continue
        # line direction is perpendicular to the normal angle
        dx, dy = -sin_t[k], cos_t[k]
        norm = max(abs(dx), abs(dy))
        step = (dx / norm, dy / norm)
        run = {(x, y)}
        run.update(_walk(mask, x, y, step, max_gap))
        run.update(_walk(mask, x, y, (-step[0], -step[1]), max_gap))
        pix = np.array(sorted(run), dtype=float)
        a, b = _fit_segment(pix)
        if math.hypot(*(b - a)) < min_len:
            continue
        for px, py in run:
            if voted[py, px]:
                acc[rows, rho_bins(px, py)] -= 1
                voted[py, px] = False
            mask[py, px] = False
        segments.append(
            LineSegment(PixelPoint(float(a[0]), float(a[1])),
                        PixelPoint(float(b[0]), float(b[1])), len(run))
        )
    segments.sort(key=lambda s: (-s.votes, -s.length, abs(segment_alpha(s.dx, s.dy))))
    return segments


def refine_segment(seg: LineSegment, mag: np.ndarray, reach: int = 3) -> LineSegment:
    """Move a segment onto the sub-pixel ridge of the gradient magnitude.

    The ridge is scanned row by row for steep segments (column by column
    for shallow ones): in each scan line the largest magnitude within
    ``reach`` pixels of the segment is located to sub-pixel precision with
    a parabola through it and its two neighbours. A total-least-squares
    line through those peaks replaces the segment's direction and the
    endpoints are projected onto it. Segments too short to scan are
    returned unchanged.
    """
    steep = abs(seg.dy) >= abs(seg.dx)
    # work in (along, across) pixel axes so both cases share one code path
    m = mag if steep else mag.T
    a0, a1 = (seg.p1.y, seg.p2.y) if steep else (seg.p1.x, seg.p2.x)
    c0, c1 = (seg.p1.x, seg.p2.x) if steep else (seg.p1.y, seg.p2.y)
    if a0 > a1:
        a0, a1, c0, c1 = a1, a0, c1, c0
    n_lines, n_across = m.shape
    lines = np.arange(math.ceil(a0 + END_MARGIN), math.floor(a1 - END_MARGIN) + 1)
    lines = lines[(lines >= 0) & (lines < n_lines)]
    if len(lines) < 10:
        return seg
    centre = np.rint(c0 + (lines - a0) * (c1 - c0) / (a1 - a0)).astype(int)
    cols = centre[:, None] + np.arange(-reach, reach + 1)[None, :]
    valid = (cols >= 1) & (cols < n_across - 1)
    prof = np.where(valid, m[lines[:, None], np.clip(cols, 0, n_across - 1)], -np.inf)
    k = np.argmax(prof, axis=1)
    peak_col = cols[np.arange(len(lines)), k]
    ok = (k > 0) & (k < 2 * reach) & valid[np.arange(len(lines)), k]
    if ok.sum() < 10:
        return seg
    lines, peak_col = lines[ok], peak_col[ok]
    left = m[lines, peak_col - 1]
    mid = m[lines, peak_col]
    right = m[lines, peak_col + 1]
    denom = left - 2.0 * mid + right
    safe = np.where(denom < 0, denom, -1.0)
    shift = np.where(denom < 0, 0.5 * (left - right) / safe, 0.0)
    across = peak_col + shift
    pts = np.stack([across, lines], axis=1) if steep else np.stack([lines, across], axis=1)
    pts = pts.astype(float)
    c, d, nn = _tls(pts)
    keep = np.abs((pts - c) @ nn) <= 0.5
    if 10 <= keep.sum() < len(pts):
        c, d, _ = _tls(pts[keep])
    p1 = np.array([seg.p1.x, seg.p1.y])
    p2 = np.array([seg.p2.x, seg.p2.y])
    a = c + ((p1 - c) @ d) * d
    b = c + ((p2 - c) @ d) * d
    return LineSegment(PixelPoint(float(a[0]), float(a[1])),
                       PixelPoint(float(b[0]), float(b[1])), seg.votes)


# --- head detection and composition ----------------------------------------------


def detect_screw_head(roi: GrayImage, threshold: int = 215, min_area: int = 40,
                      max_area: int = 3000) -> PixelPoint | None:
    """Centroid of the largest bright blob whose area is within bounds."""
    bright = np.asarray(roi.data) >= threshold
    labels, n = ndimage.label(bright, structure=_EIGHT)
    if n == 0:
        return None
    areas = np.bincount(labels.ravel())
    areas[0] = 0
    ok = (areas >= min_area) & (areas <= max_area)
    if not ok.any():
        return None
    best = int(np.argmax(np.where(ok, areas, -1)))
    ys, xs = np.nonzero(labels == best)
    return PixelPoint(float(xs.mean()), float(ys.mean()))


def estimate_inhand_pose(img: GrayImage, params: PerceptionParams | None = None) -> InHandObservation:
    """Angle of the screw against the image vertical plus the head location."""
    p = params or PerceptionParams()
    roi = get_roi(img, p.roi)
    head = detect_screw_head(roi, p.head_threshold, p.head_min_area, p.head_max_area)
    edges = canny_edges(roi, p.canny_low, p.canny_high, p.canny_sigma)
    segments = hough_lines(edges, p.rho_step, p.theta_step, p.hough_threshold,
                           p.min_len, p.max_gap, p.hough_seed)
    if not segments:
        return InHandObservation(0.0, head, ())
    top = segments[0]
    if p.subpixel:
        top = refine_segment(top, gradient(roi, p.canny_sigma)[0])
        segments = [top] + segments[1:]
    return InHandObservation(segment_alpha(top.dx, top.dy), head, tuple(segments))


# --- PGM (P5) --------------------------------------------------------------------


def write_pgm(path, img: GrayImage) -> None:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(img.data, dtype=np.uint8).tobytes())


def _pgm_tokens(buf: bytes, count: int):
    tokens, i = [], 2
    while len(tokens) < count:
        while i < len(buf) and buf[i:i + 1].isspace():
            i += 1
        if buf[i:i + 1] == b"#":
            while i < len(buf) and buf[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(buf) and not buf[j:j + 1].isspace():
            j += 1
        tokens.append(int(buf[i:j]))
        i = j
    return tokens, i + 1


def read_pgm(path) -> GrayImage:
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:2] != b"P5":
        raise InvalidArgument("not a binary PGM (P5) file")
    (w, h, maxval), start = _pgm_tokens(buf, 3)
    if maxval != 255:
        raise InvalidArgument("only 8-bit PGM is supported")
    data = np.frombuffer(buf[start:start + w * h], dtype=np.uint8)
    if data.size != w * h:
        raise InvalidArgument("truncated PGM data")
    return GrayImage(w, h, data.reshape(h, w))
