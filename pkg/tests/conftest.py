import numpy as np
import pytest

from travel_aid.geometry import CameraIntrinsics, DepthFrame
from travel_aid.synth import (corridor_scene, flat_floor_scene, generate_synthetic_scene,
                              render_frame)


@pytest.fixture
def k_small():
    return CameraIntrinsics(fx=100.0, fy=100.0, u0=31.5, v0=23.5, width=64, height=48)


@pytest.fixture(scope="session")
def flat_frame():
    spec = flat_floor_scene(noise_sigma=0.0)
    return spec, render_frame(spec, 0)


@pytest.fixture(scope="session")
def corridor_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("corridor")
    return generate_synthetic_scene(corridor_scene(), root / "ds", seed=0)


def depth_of(frame):
    return DepthFrame(frame.depth, frame.index)


def floor_cloud(n, rng, height=-1.5, noise=0.0, x=(-1.0, 1.0), z=(0.5, 2.9)):
    pts = np.column_stack((rng.uniform(*x, n), np.full(n, height), rng.uniform(*z, n)))
    pts[:, 1] += rng.normal(0.0, noise, n) if noise else 0.0
    return pts


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
