import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import depth_of, floor_cloud
from oracles import exhaustive_otsu
from travel_aid.errors import ConfigError, DegenerateHistogram, GroundFitError
from travel_aid.geometry import PointCloud, reconstruct_pointcloud
from travel_aid.ground import (GroundClass, GroundConfig, GroundPlane, GroundState,
                               blend_threshold, classify_ground, detect_ground,
                               detect_ground_memoryless, fit_plane_ransac, ground_height,
                               ground_pitch_angle, otsu_height_threshold,
                               otsu_threshold_from_histogram, refine_ground, select_candidates)
from travel_aid.synth import ramp_scene, render_frame

CFG = GroundConfig()


def heights(*groups):
    y = np.concatenate([np.full(n, h) for n, h in groups])
    return PointCloud(np.column_stack((np.zeros_like(y), y, np.full_like(y, 1.0))))


def _oracle_for(cloud, bins=64):
    y = cloud.y
    counts, _ = np.histogram(y, bins=bins, range=(y.min(), y.max()))
    return exhaustive_otsu([int(c) for c in counts], float(y.min()), float(y.max()))


def test_otsu_two_groups_matches_oracle():
    cloud = heights((500, -1.5), (100, -0.2))
    ty = otsu_height_threshold(cloud, CFG)
    assert -1.5 < ty < -0.2
    assert ty == _oracle_for(cloud)


def test_otsu_three_groups_matches_oracle():
    cloud = heights((300, -1.5), (200, -0.8), (150, -0.1))
    assert otsu_height_threshold(cloud, CFG) == _oracle_for(cloud)


def test_otsu_single_height_is_degenerate():
    with pytest.raises(DegenerateHistogram):
        otsu_height_threshold(heights((200, -1.5)), CFG)


def test_otsu_too_few_points():
    with pytest.raises(GroundFitError):
        otsu_height_threshold(heights((5, -1.5), (5, -1.0)), CFG)


def test_otsu_tie_goes_low():
    # symmetric: splits after bin 0 and before bin 3 have equal variance
    counts = [1, 0, 0, 1, 0, 0, 0, 1]
    assert otsu_threshold_from_histogram(counts, 0.0, 8.0) == exhaustive_otsu(counts, 0.0, 8.0)


@settings(max_examples=200)
@given(st.lists(st.integers(0, 50), min_size=16, max_size=64), st.floats(-3, 0), st.floats(0.01, 3))
def test_otsu_matches_exhaustive_search(counts, lo, span):
    expected = exhaustive_otsu(counts, lo, lo + span)
    if expected is None:
        with pytest.raises(DegenerateHistogram):
            otsu_threshold_from_histogram(counts, lo, lo + span)
    else:
        assert otsu_threshold_from_histogram(counts, lo, lo + span) == expected


def test_blend_examples():
    assert math.isclose(blend_threshold(-1.2, GroundState(-1.4), CFG), -1.28)
    assert blend_threshold(-1.2, GroundState(-1.4), GroundConfig(lam=1.0, mu=0.0)) == -1.2
    assert math.isclose(blend_threshold(-1.3, GroundState(-1.3), CFG), -1.3)
    assert blend_threshold(-1.2, GroundState(), CFG) == -1.2


@given(st.floats(0, 1), st.floats(-3, 1), st.floats(-3, 1))
def test_blend_is_convex(lam, roi, pre):
    cfg = GroundConfig(lam=lam, mu=1.0 - lam)
    ty = blend_threshold(roi, GroundState(pre), cfg)
    assert min(roi, pre) - 1e-12 <= ty <= max(roi, pre) + 1e-12


def test_weights_must_sum_to_one():
    with pytest.raises(ConfigError) as err:
        GroundConfig(lam=0.5, mu=0.4)
    assert err.value.key == "lambda"


def test_select_candidates_predicates():
    cloud = PointCloud(np.array([[0, -1.5, 2], [0, -1.0, 2], [0, -1.5, 3.5]], dtype=float))
    kept = select_candidates(cloud, -1.3, GroundConfig(tz=3.0))
    assert kept.xyz.tolist() == [[0.0, -1.5, 2.0]]


def test_ransac_with_outliers():
    rng = np.random.default_rng(0)
    pts = np.vstack((floor_cloud(300, rng), rng.uniform([-1, -1.5, 0.5], [1, 0, 2.9], (30, 3))))
    plane = fit_plane_ransac(PointCloud(pts), CFG, seed=1)
    assert ground_pitch_angle(plane) < 1.0
    assert abs(plane.d - 1.5) < 0.01


def test_ransac_noiseless_plane_exact():
    rng = np.random.default_rng(1)
    plane = fit_plane_ransac(PointCloud(floor_cloud(300, rng)), CFG, seed=0)
    assert np.allclose([plane.a, plane.b, plane.c, plane.d], [0, 1, 0, 1.5], atol=1e-12)


def test_ransac_collinear_points_fail():
    pts = np.column_stack((np.linspace(0, 1, 10), np.full(10, -1.5), np.linspace(1, 2, 10)))
    with pytest.raises(GroundFitError):
        fit_plane_ransac(PointCloud(pts), GroundConfig(min_ground_points=3), seed=0)


def test_ransac_deterministic_per_seed():
    rng = np.random.default_rng(2)
    pts = PointCloud(floor_cloud(500, rng, noise=0.01))
    assert fit_plane_ransac(pts, CFG, 7) == fit_plane_ransac(pts, CFG, 7)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(-20, 20), st.floats(-2, -0.5))
def test_returned_plane_is_normalized(seed, tilt_deg, h):
    rng = np.random.default_rng(seed)
    pts = floor_cloud(200, rng, noise=0.01)
    pts[:, 1] = h + math.tan(math.radians(tilt_deg)) * pts[:, 2] + rng.normal(0, 0.01, 200)
    plane = fit_plane_ransac(PointCloud(pts), CFG, seed)
    assert abs(plane.a ** 2 + plane.b ** 2 + plane.c ** 2 - 1) < 1e-12
    assert plane.b >= 0


def test_pitch_angle_examples():
    ten = math.radians(10)
    assert ground_pitch_angle(GroundPlane(0, 1, 0, 0)) == 0
    assert math.isclose(ground_pitch_angle(GroundPlane(0, math.cos(ten), math.sin(ten), 0)), 10)
    assert ground_pitch_angle(GroundPlane(1, 0, 0, 0)) == 90


def _tilted(deg, rising=True):
    t = math.radians(deg)
    # floor y = tan(t) z rises along +Z: normal (0, cos, -sin)
    return GroundPlane.from_normal([0, math.cos(t), -math.sin(t) if rising else math.sin(t)], 1.5)


def test_classification_bands():
    assert classify_ground(_tilted(0.5), CFG) is GroundClass.HORIZONTAL
    assert classify_ground(_tilted(6), CFG) is GroundClass.UPSLOPE
    assert classify_ground(_tilted(6, rising=False), CFG) is GroundClass.DOWNSLOPE
    assert classify_ground(_tilted(25), CFG) is GroundClass.NON_GROUND


def test_refine_examples():
    plane = GroundPlane(0, 1, 0, 1.5)
    cloud = PointCloud(np.array([[0, -1.5, 1], [0, -1.4, 1]], dtype=float))
    assert refine_ground(cloud, plane, GroundConfig(sigma=0.02)).xyz.tolist() == [[0, -1.5, 1]]
    assert len(refine_ground(cloud, plane, GroundConfig(sigma=math.inf))) == 2


@settings(max_examples=50)
@given(st.floats(0.001, 0.5), st.floats(0.001, 0.5))
def test_refinement_monotone(s1, s2):
    rng = np.random.default_rng(0)
    cloud = PointCloud(floor_cloud(200, rng, noise=0.1))
    plane = GroundPlane(0, 1, 0, 1.5)
    lo, hi = sorted((s1, s2))
    small = refine_ground(cloud, plane, GroundConfig(sigma=lo))
    big = refine_ground(cloud, plane, GroundConfig(sigma=hi))
    small_rows = {tuple(p) for p in small.xyz}
    assert small_rows <= {tuple(p) for p in big.xyz} <= {tuple(p) for p in cloud.xyz}


def test_ground_height_examples():
    assert math.isclose(ground_height(heights((1, -1.5), (1, -1.49), (1, -1.51))), -1.5)
    assert ground_height(heights((1, -1.2))) == -1.2
    rng = np.random.default_rng(8)
    assert abs(ground_height(PointCloud(floor_cloud(100_000, rng, noise=0.01))) + 1.5) < 1e-3
    with pytest.raises(GroundFitError):
        ground_height(PointCloud.empty())


def test_flat_floor_frame(flat_frame):
    spec, frame = flat_frame
    cloud = reconstruct_pointcloud(depth_of(frame), spec.intrinsics, frame.attitude)
    result, state = detect_ground(cloud, GroundState(), CFG)
    assert result.cls is GroundClass.HORIZONTAL
    assert np.allclose([result.plane.a, result.plane.b, result.plane.c], [0, 1, 0], atol=1e-9)
    assert abs(result.plane.d + result.height_h) < 1e-9
    assert abs(result.height_h + 1.5) < 1e-9
    assert state.initialized and math.isclose(state.ty_pre, result.height_h + CFG.height_margin)


def _table_frame(rng):
    floor = floor_cloud(400, rng, noise=0.003)
    table = floor_cloud(1200, rng, height=-0.7, noise=0.003, x=(-0.6, 0.6), z=(1.2, 2.4))
    # wall clutter above the table pulls the per-frame split above the table top
    clutter = np.column_stack((rng.uniform(-1, 1, 1500), rng.uniform(-0.3, 0.5, 1500),
                               rng.uniform(0.5, 2.9, 1500)))
    return PointCloud(np.vstack((floor, table, clutter)))


def test_table_rejected_with_height_memory():
    cloud = _table_frame(np.random.default_rng(0))
    result, _ = detect_ground(cloud, GroundState(ty_pre=-1.35), CFG, seed=0)
    assert abs(result.height_h + 1.5) < 0.03
    baseline = detect_ground_memoryless(cloud, CFG, seed=0)
    assert abs(baseline.height_h + 0.7) < 0.03


def test_ramp_is_not_ground():
    spec = ramp_scene(30.0)
    frame = render_frame(spec, 0)
    cloud = reconstruct_pointcloud(depth_of(frame), spec.intrinsics, frame.attitude)
    state = GroundState(ty_pre=-1.2)
    result, new_state = detect_ground(cloud, state, CFG)
    assert result.cls is GroundClass.NON_GROUND and not result.is_ground
    assert new_state == state
    assert result.reason


def test_too_few_points_is_not_ground():
    cloud = heights((10, -1.5), (10, -1.0))
    result, state = detect_ground(cloud, GroundState(), CFG)
    assert result.cls is GroundClass.NON_GROUND and not state.initialized


def test_detect_ground_deterministic(flat_frame):
    spec, frame = flat_frame
    rng = np.random.default_rng(3)
    noisy = frame.depth + np.where(frame.depth > 0, rng.normal(0, 0.01, frame.depth.shape), 0)
    from travel_aid.geometry import DepthFrame
    cloud = reconstruct_pointcloud(DepthFrame(np.maximum(noisy, 0)), spec.intrinsics, frame.attitude)
    a, sa = detect_ground(cloud, GroundState(), CFG, seed=5)
    b, sb = detect_ground(cloud, GroundState(), CFG, seed=5)
    assert a.plane == b.plane and a.height_h == b.height_h and sa == sb
    assert np.array_equal(a.refined.xyz, b.refined.xyz)
