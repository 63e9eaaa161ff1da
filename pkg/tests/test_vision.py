import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from inhand.errors import InvalidArgument, InvalidROI
from inhand.geometry import GrayImage, PixelPoint
from inhand.vision import (ROI, LineSegment, PerceptionParams, canny_edges, detect_screw_head,
                           estimate_inhand_pose, get_roi, hough_lines, read_pgm,
                           segment_alpha, write_pgm)

N = 270


def canvas(fill=40):
    return np.full((N, N), float(fill))


def draw_band(a, p0, p1, half_width, level):
    """Paint the pixels within ``half_width`` of the segment p0-p1."""
    yy, xx = np.mgrid[:N, :N]
    p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
    d = p1 - p0
    t = np.clip(((xx - p0[0]) * d[0] + (yy - p0[1]) * d[1]) / (d @ d), 0, 1)
    dist = np.hypot(xx - (p0[0] + t * d[0]), yy - (p0[1] + t * d[1]))
    a[dist <= half_width] = level
    return a


def draw_disk(a, c, r, level):
    yy, xx = np.mgrid[:N, :N]
    a[np.hypot(xx - c[0], yy - c[1]) <= r] = level
    return a


def img(a):
    return GrayImage.from_array(np.clip(np.rint(a), 0, 255).astype(np.uint8))


def test_uniform_image_has_no_edges():
    assert canny_edges(img(canvas(123))).data.max() == 0


def test_vertical_step_gives_a_one_pixel_line():
    a = canvas()
    a[:, 135:] = 200
    e = canny_edges(img(a)).data > 0
    rows = e[20:-20]
    assert np.all(rows.sum(axis=1) == 1)
    cols = np.nonzero(rows)[1]
    assert set(cols.tolist()) <= {134, 135}


def test_vertical_band_edges_hug_its_borders():
    a = draw_band(canvas(), (135, 20), (135, 250), 7, 180)
    e = canny_edges(img(a)).data > 0
    ys, xs = np.nonzero(e[40:230])
    assert np.all(np.minimum(np.abs(xs - 128), np.abs(xs - 142)) <= 2)


def test_hough_on_blank_is_empty():
    assert hough_lines(GrayImage.from_array(np.zeros((N, N), np.uint8))) == []


def test_hough_recovers_a_45_degree_line():
    e = np.zeros((N, N), np.uint8)
    for k in range(100):
        e[80 + k, 60 + k] = 255
    segs = hough_lines(GrayImage.from_array(e))
    assert len(segs) == 1
    s = segs[0]
    assert abs(math.degrees(math.atan2(s.dy, s.dx)) - 45.0) < 1.0
    assert s.length == pytest.approx(99 * math.sqrt(2), abs=3)


def test_hough_dominant_segment_of_a_vertical_band():
    a = draw_band(canvas(), (135, 20), (135, 250), 7, 180)
    segs = hough_lines(canny_edges(img(a)))
    assert segs and abs(segs[0].dx) <= 2


def test_hough_is_seeded():
    a = draw_band(canvas(), (60, 40), (200, 230), 6, 180)
    e = canny_edges(img(a))
    assert hough_lines(e, seed=3) == hough_lines(e, seed=3)


coord = st.floats(0, 269, allow_nan=False)


@given(coord, coord, coord, coord)
def test_segment_endpoints_are_ordered(x1, y1, x2, y2):
    s = LineSegment(PixelPoint(x1, y1), PixelPoint(x2, y2), 1)
    assert (s.p1.x, s.p1.y) <= (s.p2.x, s.p2.y)
    a = segment_alpha(s.dx, s.dy)
    assert -math.pi / 2 <= a <= math.pi / 2


@pytest.mark.parametrize("dx,dy,expected", [
    (0, 10, 0.0), (10, 0, math.pi / 2), (10, 10, math.pi / 4), (10, -10, -math.pi / 4),
    (0, -5, 0.0)])
def test_segment_alpha_examples(dx, dy, expected):
    assert segment_alpha(dx, dy) == pytest.approx(expected)


def test_head_detection_examples():
    a = draw_disk(canvas(), (200, 80), 12, 250)
    h = detect_screw_head(img(a))
    assert h is not None and math.hypot(h.x - 200, h.y - 80) < 0.5
    assert detect_screw_head(img(draw_band(canvas(), (135, 20), (135, 250), 7, 180))) is None
    assert detect_screw_head(img(canvas())) is None
    tiny = draw_disk(canvas(), (50, 50), 2, 250)
    assert detect_screw_head(img(tiny)) is None


def test_pose_of_a_vertical_band():
    obs = estimate_inhand_pose(img(draw_band(canvas(), (135, 20), (135, 250), 7, 180)))
    assert abs(obs.alpha) < math.radians(0.5)
    assert obs.head is None and obs.head_xy == (0.0, 0.0)


def test_pose_of_a_horizontal_band():
    obs = estimate_inhand_pose(img(draw_band(canvas(), (20, 135), (250, 135), 7, 180)))
    assert abs(obs.alpha) == pytest.approx(math.pi / 2, abs=math.radians(0.5))


def test_pose_of_a_diagonal_screw_with_head():
    a = draw_band(canvas(), (60, 20), (200, 160), 6, 180)
    a = draw_disk(a, (200, 80), 12, 250)
    obs = estimate_inhand_pose(img(a))
    # descending to the right in image coordinates
    assert obs.alpha == pytest.approx(math.pi / 4, abs=math.radians(1.0))
    a = draw_band(canvas(), (60, 160), (200, 20), 6, 180)
    a = draw_disk(a, (200, 80), 12, 250)
    obs = estimate_inhand_pose(img(a))
    assert obs.alpha == pytest.approx(-math.pi / 4, abs=math.radians(1.0))
    assert math.hypot(obs.head.x - 200, obs.head.y - 80) < 1.0


@pytest.mark.parametrize("gain", [0.5, 0.75, 1.25, 1.5])
def test_angle_is_brightness_invariant(gain):
    a = draw_band(canvas(), (90, 30), (170, 240), 6, 160)
    ref = estimate_inhand_pose(img(a)).alpha
    got = estimate_inhand_pose(img(a * gain)).alpha
    assert got == pytest.approx(ref, abs=math.radians(0.5))


def test_canny_of_an_edge_map_keeps_to_its_pixels_neighbourhood():
    a = draw_band(canvas(), (80, 30), (190, 240), 6, 180)
    e1 = canny_edges(img(a))
    e2 = canny_edges(e1)
    near = np.zeros((N, N), bool)
    ys, xs = np.nonzero(e1.data)
    for dy in range(-2, 3):
        for dx in range(-2, 3):
            near[np.clip(ys + dy, 0, N - 1), np.clip(xs + dx, 0, N - 1)] = True
    assert np.all(near[e2.data > 0])


def test_roi_crop_and_validation():
    a = canvas()
    a[10, 20] = 99
    crop = get_roi(img(a), ROI(20, 10, 5, 5))
    assert crop.data[0, 0] == 99 and crop.data.shape == (5, 5)
    for bad in (ROI(-1, 0, 10, 10), ROI(0, 0, 0, 10), ROI(265, 0, 10, 10)):
        with pytest.raises(InvalidROI):
            get_roi(img(a), bad)
    with pytest.raises(InvalidROI):
        estimate_inhand_pose(img(a), PerceptionParams(roi=ROI(0, 0, 300, 300)))


def test_canny_rejects_bad_thresholds():
    with pytest.raises(InvalidArgument):
        canny_edges(img(canvas()), 130, 120)


@given(st.integers(1, 40), st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_pgm_round_trip_is_bit_exact(tmp_path_factory, w, h, seed):
    data = np.random.default_rng(seed).integers(0, 256, (h, w), dtype=np.uint8)
    path = tmp_path_factory.mktemp("pgm") / "x.pgm"
    write_pgm(path, GrayImage.from_array(data))
    assert np.array_equal(read_pgm(path).data, data)


def test_pgm_header_comments_and_errors(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# made by hand\n2 1\n255\n\x01\x02")
    assert read_pgm(p).data.tolist() == [[1, 2]]
    p.write_bytes(b"P2\n2 1\n255\n1 2\n")
    with pytest.raises(InvalidArgument):
        read_pgm(p)
    p.write_bytes(b"P5\n2 2\n255\n\x01")
    with pytest.raises(InvalidArgument):
        read_pgm(p)
