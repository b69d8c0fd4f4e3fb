import json

import numpy as np
import pytest

from conftest import depth_of
from travel_aid.dataset import Dataset, DatasetError, read_extrinsics, read_intrinsics
from travel_aid.errors import SceneError
from travel_aid.geometry import reconstruct_image
from travel_aid.synth import (Box, SceneSpec, flat_floor_scene, generate_synthetic_scene,
                              render_frame, truth_detections)


def test_flat_floor_is_exact():
    spec = SceneSpec(pitch_deg=(0.0,), roll_deg=(0.0,), noise_sigma=0.0)
    frame = render_frame(spec, 0)
    world = reconstruct_image(depth_of(frame), spec.intrinsics, frame.attitude)
    assert frame.ground_mask.sum() > 1000
    assert np.abs(world[frame.ground_mask, 1] + 1.5).max() < 1e-6


def test_floor_exact_under_attitude():
    spec = SceneSpec(pitch_deg=(20.0,), roll_deg=(-4.0,))
    frame = render_frame(spec, 0)
    world = reconstruct_image(depth_of(frame), spec.intrinsics, frame.attitude)
    assert np.abs(world[frame.ground_mask, 1] + 1.5).max() < 1e-6


def test_no_obstacles_no_object_pixels():
    frame = render_frame(flat_floor_scene(), 0)
    assert not frame.object_ids.any()


def test_box_surface_is_exact():
    box = Box((-0.3, -1.5, 2.0), (0.3, -0.9, 2.4))
    spec = SceneSpec(pitch_deg=(25.0,), obstacles=(box,))
    frame = render_frame(spec, 0)
    world = reconstruct_image(depth_of(frame), spec.intrinsics, frame.attitude)
    pts = world[frame.object_ids == 1]
    lo, hi = np.array(box.lo), np.array(box.hi)
    assert len(pts) > 100
    assert np.all(pts >= lo - 1e-9) and np.all(pts <= hi + 1e-9)
    on_face = np.isclose(pts, lo, atol=1e-9) | np.isclose(pts, hi, atol=1e-9)
    assert on_face.any(axis=1).all()


def test_camera_inside_box_rejected():
    with pytest.raises(SceneError):
        render_frame(SceneSpec(obstacles=(Box((-1, -1, -1), (1, 1, 1)),)), 0)


def test_spec_validation():
    with pytest.raises(SceneError):
        SceneSpec(width=0)
    with pytest.raises(SceneError):
        SceneSpec(noise_sigma=-0.1)
    with pytest.raises(SceneError):
        SceneSpec(n_frames=3, pitch_deg=(1.0, 2.0))


def test_spec_dict_round_trip():
    spec = SceneSpec(obstacles=(Box((0, 0, 2), (1, 1, 3), label="a"),), n_frames=2,
                     pitch_deg=(10.0, 11.0))
    assert SceneSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec


def test_truth_detections_cover_labeled_boxes():
    box = Box((-0.3, -1.5, 2.0), (0.3, -0.9, 2.4), label="chair")
    spec = SceneSpec(pitch_deg=(25.0,), obstacles=(box, Box((1, -1.5, 2), (1.2, -1, 2.2))))
    frame = render_frame(spec, 0)
    (det,) = truth_detections(spec, frame)
    x, y, w, h = det.bbox
    rows, cols = np.nonzero(frame.object_ids == 1)
    assert (x, y, x + w - 1, y + h - 1) == (cols.min(), rows.min(), cols.max(), rows.max())


def _files(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_generation_is_byte_identical(tmp_path):
    spec = SceneSpec(pitch_deg=(10.0, 12.0, 14.0), n_frames=3, noise_sigma=0.01,
                     obstacles=(Box((-0.3, -1.5, 2.0), (0.3, -0.9, 2.4), label="box"),))
    a = _files(generate_synthetic_scene(spec, tmp_path / "a", seed=4))
    b = _files(generate_synthetic_scene(spec, tmp_path / "b", seed=4))
    c = _files(generate_synthetic_scene(spec, tmp_path / "c", seed=5))
    assert a == b
    assert a != c


def test_dataset_round_trip(tmp_path):
    spec = SceneSpec(pitch_deg=(10.0,), roll_deg=(1.5,), n_frames=2, speed=0.1)
    root = generate_synthetic_scene(spec, tmp_path / "ds", seed=0)
    ds = Dataset(root)
    assert len(ds) == 2 and ds.intrinsics == spec.intrinsics
    for f in ds:
        meta = dict(line.split("=") for line in f.depth_path.with_name(f"{f.frame_index:06d}.meta")
                    .read_text().split())
        assert float(meta["pitch_deg"]) == 10.0 and float(meta["roll_deg"]) == 1.5
        assert f.attitude == spec.attitude(f.frame_index)
        rendered = render_frame(spec, f.frame_index)
        depth = f.load_depth()
        assert np.abs(depth.values - rendered.depth).max() <= 0.0005 + 1e-12
        assert np.array_equal(ds.truth_mask(f.frame_index), rendered.ground_mask)
        assert f.load_rgb().pixels.shape == (240, 320, 3)
    assert [f.timestamp_us for f in ds] == [0, 33333]


def test_missing_intrinsics(tmp_path):
    with pytest.raises(DatasetError):
        Dataset(tmp_path)


def test_bad_calibration_files(tmp_path):
    (tmp_path / "i.txt").write_text("fx=1\nfy\n")
    with pytest.raises(DatasetError):
        read_intrinsics(tmp_path / "i.txt")
    (tmp_path / "e.txt").write_text("1 0 0 0 1 0 0 0 1\n0 0\n")
    with pytest.raises(DatasetError):
        read_extrinsics(tmp_path / "e.txt")


def test_missing_truth_mask(tmp_path):
    root = generate_synthetic_scene(SceneSpec(), tmp_path / "ds")
    with pytest.raises(DatasetError):
        Dataset(root).truth_mask(5)
