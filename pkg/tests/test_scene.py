import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from inhand.errors import InvalidArgument, SceneGenerationError
from inhand.scene import (BIN_HALF_EXTENT, Scene, ScrewSpec, clearance, generate_bin_scene,
                          place_screw, segment_distance)


def brute_segment_distance(p0, p1, q0, q1, n=400):
    t = np.linspace(0, 1, n)
    a = p0 + t[:, None] * (p1 - p0)
    b = q0 + t[:, None] * (q1 - q0)
    return np.min(np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2))


@given(st.integers(0, 100_000))
def test_segment_distance_matches_sampling(seed):
    rng = np.random.default_rng(seed)
    p0, p1, q0, q1 = rng.uniform(-1, 1, (4, 3))
    exact = segment_distance(p0, p1, q0, q1)
    approx = brute_segment_distance(p0, p1, q0, q1)
    # the sampled minimum can only overshoot, by at most a grid step
    assert exact <= approx + 1e-12
    assert approx - exact < 0.02


def test_segment_distance_degenerate():
    assert segment_distance([0, 0, 0], [0, 0, 0], [1, 0, 0], [1, 0, 0]) == pytest.approx(1.0)
    assert segment_distance([0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]) == pytest.approx(1.0)


@pytest.mark.parametrize("mode", ["flat", "tilted", "mixed"])
def test_generated_scene_invariants(spec, mode):
    scene = generate_bin_scene(spec, 12, mode, seed=7)
    assert len(scene.screws) == 12
    for s in scene.screws:
        assert s.lowest_z() == pytest.approx(scene.table_height, abs=1e-12)
        assert s.support in ("flat", "tilted")
        if mode != "mixed":
            assert s.support == mode
        pitch = math.degrees(math.asin(abs(s.axis[2])))
        if s.support == "flat":
            assert pitch == pytest.approx(0.0, abs=1e-9)
        else:
            assert 15.0 - 1e-9 <= pitch <= 60.0 + 1e-9
        for end in (s.tip, s.head_center):
            assert abs(end[0]) <= BIN_HALF_EXTENT[0]
            assert abs(end[1]) <= BIN_HALF_EXTENT[1]
    for a, b in itertools.combinations(scene.screws, 2):
        assert clearance(a, b) > 0


def test_generation_is_deterministic(spec):
    a = generate_bin_scene(spec, 8, "mixed", seed=3)
    b = generate_bin_scene(spec, 8, "mixed", seed=3)
    c = generate_bin_scene(spec, 8, "mixed", seed=4)
    assert a.to_json() == b.to_json()
    assert a.to_json() != c.to_json()


def test_scene_json_round_trip(spec):
    scene = generate_bin_scene(spec, 5, "tilted", seed=11)
    again = Scene.from_json(scene.to_json())
    assert again.to_json() == scene.to_json()
    assert again == scene


def test_scene_version_is_checked(spec):
    d = generate_bin_scene(spec, 1, "flat", seed=0).to_dict()
    d["version"] = 99
    with pytest.raises(InvalidArgument):
        Scene.from_dict(d)


def test_empty_scene_and_bad_arguments(spec):
    assert generate_bin_scene(spec, 0, "flat", seed=0).screws == ()
    with pytest.raises(InvalidArgument):
        generate_bin_scene(spec, 1, "upright", seed=0)
    with pytest.raises(InvalidArgument):
        generate_bin_scene(spec, -1, "flat", seed=0)


def test_overfull_bin_is_reported(spec):
    with pytest.raises(SceneGenerationError):
        generate_bin_scene(spec, 400, "flat", seed=0)


def test_screw_spec_validation():
    with pytest.raises(InvalidArgument):
        ScrewSpec(shaft_length=-1.0)
    with pytest.raises(InvalidArgument):
        ScrewSpec(head_radius=0.002)


def test_place_screw_geometry(spec):
    s = place_screw(spec, (0.0, 0.0), 0.0, math.radians(30), "tilted")
    assert np.linalg.norm(s.head_center - s.tip) == pytest.approx(spec.tip_offset)
    assert s.axis[2] == pytest.approx(0.5)
    assert s.lowest_z() == pytest.approx(0.0, abs=1e-12)


def test_default_hole_clearance(spec):
    scene = generate_bin_scene(spec, 1, "flat", seed=0)
    assert scene.hole.radius == pytest.approx(1.1 * spec.shaft_radius)
