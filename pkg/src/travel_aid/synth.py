"""Analytic ray-cast renderer for synthetic RGB-D sequences.

The scene lives in a fixed world frame whose axes match the camera's world
frame (Y up, Z forward). The camera starts at the origin and moves along +Z
by ``speed`` meters per frame. The floor is the plane
``y = ground_height + tan(ground_slope) * z``. Obstacles are axis-aligned
boxes; painted patches only change the floor color.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import SceneError
from .geometry import Attitude, CameraIntrinsics, attitude_rotation, pixel_rays

_PALETTE = np.array([[200, 60, 60], [60, 160, 60], [60, 80, 200], [200, 160, 40],
                     [150, 60, 170], [40, 170, 170]], dtype=np.uint8)
FLOOR_RGB = (128, 128, 128)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in scene coordinates (meters)."""

    lo: tuple
    hi: tuple
    label: str = ""
    kind: str = "box"  # box | slab | plane; informational only

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != 3 or len(hi) != 3 or any(a >= b for a, b in zip(lo, hi)):
            raise SceneError(f"box {self.label!r} needs lo < hi on every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains(self, p):
        return all(a < v < b for a, v, b in zip(self.lo, p, self.hi))


@dataclass(frozen=True)
class Patch:
    """Flat texture painted on the floor over an x/z rectangle."""

    x_range: tuple
    z_range: tuple
    label: str = ""
    color: tuple = (230, 230, 30)


@dataclass(frozen=True)
class SceneSpec:
    width: int = 320
    height: int = 240
    hfov_deg: float = 58.0
    ground_height: float = -1.5
    ground_slope_deg: float = 0.0
    pitch_deg: tuple = (15.0,)  # per frame; a single value is held constant
    roll_deg: tuple = (0.0,)
    speed: float = 0.0
    obstacles: tuple = ()
    patches: tuple = ()
    noise_sigma: float = 0.0
    n_frames: int = 1
    max_range: float = 8.0
    frame_rate: float = 30.0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise SceneError("resolution must be positive")
        if self.noise_sigma < 0:
            raise SceneError("noise_sigma must be >= 0")
        if self.n_frames < 1:
            raise SceneError("n_frames must be >= 1")
        if abs(self.ground_slope_deg) >= 89:
            raise SceneError("ground slope must be below 89 degrees")
        for name in ("pitch_deg", "roll_deg"):
            value = getattr(self, name)
            value = (float(value),) if np.isscalar(value) else tuple(float(v) for v in value)
            if len(value) not in (1, self.n_frames):
                raise SceneError(f"{name} needs 1 or n_frames entries")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "obstacles", tuple(
            o if isinstance(o, Box) else Box(**o) for o in self.obstacles))
        object.__setattr__(self, "patches", tuple(
            p if isinstance(p, Patch) else Patch(**p) for p in self.patches))

    @property
    def intrinsics(self):
        return CameraIntrinsics.from_fov(self.width, self.height, self.hfov_deg)

    def attitude(self, i):
        pitch = self.pitch_deg[i if len(self.pitch_deg) > 1 else 0]
        roll = self.roll_deg[i if len(self.roll_deg) > 1 else 0]
        return Attitude.from_degrees(pitch, roll)

    def camera_position(self, i):
        return np.array([0.0, 0.0, self.speed * i])

    def floor_y(self, z):
        return self.ground_height + np.tan(np.radians(self.ground_slope_deg)) * z

    def to_dict(self):
        d = asdict(self)
        d["pitch_deg"] = list(self.pitch_deg)
        d["roll_deg"] = list(self.roll_deg)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["obstacles"] = tuple(Box(**o) for o in d.get("obstacles", ()))
        d["patches"] = tuple(Patch(**p) for p in d.get("patches", ()))
        return cls(**d)


@dataclass(frozen=True, eq=False)
class RenderedFrame:
    index: int
    depth: np.ndarray  # float meters, noise applied, 0 = no return
    clean_depth: np.ndarray  # float meters before noise
    rgb: np.ndarray
    ground_mask: np.ndarray
    object_ids: np.ndarray  # 0 = none, i + 1 = obstacles[i]
    attitude: Attitude
    camera_position: np.ndarray
    painted_mask: np.ndarray = field(default=None)


def _ray_box(origin, dirs, box: Box):
    """Entry distance along each ray into ``box`` (inf when missed)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t1 = (np.asarray(box.lo) - origin) * inv
        t2 = (np.asarray(box.hi) - origin) * inv
    tmin = np.nanmax(np.minimum(t1, t2), axis=-1)
    tmax = np.nanmin(np.maximum(t1, t2), axis=-1)
    hit = (tmax >= tmin) & (tmax > 0) & (tmin > 0)
    return np.where(hit, tmin, np.inf)


def _check_camera(spec: SceneSpec, pos):
    if pos[1] <= spec.floor_y(pos[2]):
        raise SceneError("camera is at or below the floor")
    for box in spec.obstacles:
        if box.contains(pos):
            raise SceneError(f"camera is inside obstacle {box.label or box.kind!r}")


def render_frame(spec: SceneSpec, i, rng=None) -> RenderedFrame:
    """Ray-cast frame ``i``. Depth is the camera-frame z of the first hit."""
    k = spec.intrinsics
    att = spec.attitude(i)
    pos = spec.camera_position(i)
    _check_camera(spec, pos)
    # camera rays with unit z component: the ray parameter equals the depth
    dirs = pixel_rays(k) @ attitude_rotation(att).T
    slope = np.tan(np.radians(spec.ground_slope_deg))
    denom = dirs[..., 1] - slope * dirs[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_ground = (spec.ground_height + slope * pos[2] - pos[1]) / denom
    t_ground = np.where((t_ground > 0) & np.isfinite(t_ground), t_ground, np.inf)

    t_best = t_ground.copy()
    ids = np.zeros(t_best.shape, dtype=np.uint8)
    for j, box in enumerate(spec.obstacles):
        t_box = _ray_box(pos, dirs, box)
        closer = t_box < t_best
        t_best = np.where(closer, t_box, t_best)
        ids[closer] = j + 1
    valid = np.isfinite(t_best) & (t_best <= spec.max_range)
    clean = np.where(valid, t_best, 0.0)
    ground = valid & (ids == 0)
    ids[~valid] = 0

    depth = clean
    if spec.noise_sigma > 0:
        rng = rng if rng is not None else np.random.default_rng(0)
        noise = rng.normal(0.0, spec.noise_sigma, clean.shape)
        depth = np.where(valid, np.maximum(clean + noise, 1e-3), 0.0)

    rgb = np.zeros(clean.shape + (3,), dtype=np.uint8)
    rgb[ground] = FLOOR_RGB
    painted = np.zeros(clean.shape, dtype=bool)
    if spec.patches:
        hit = pos + dirs * np.where(ground, clean, 0.0)[..., None]
        for patch in spec.patches:
            inside = (ground & (hit[..., 0] >= patch.x_range[0]) & (hit[..., 0] <= patch.x_range[1])
                      & (hit[..., 2] >= patch.z_range[0]) & (hit[..., 2] <= patch.z_range[1]))
            rgb[inside] = patch.color
            painted |= inside
    for j in range(len(spec.obstacles)):
        rgb[ids == j + 1] = _PALETTE[j % len(_PALETTE)]
    return RenderedFrame(i, depth, clean, rgb, ground, ids, att, pos, painted)


def render_sequence(spec: SceneSpec, seed=0):
    """Yield every frame; noise draws come from one generator seeded with ``seed``."""
    rng = np.random.default_rng(seed)
    for i in range(spec.n_frames):
        yield render_frame(spec, i, rng)


def mask_bbox(mask):
    rows, cols = np.nonzero(mask)
    if len(rows) == 0:
        return None
    return (int(cols.min()), int(rows.min()), int(cols.max() - cols.min() + 1),
            int(rows.max() - rows.min() + 1))


def truth_detections(spec: SceneSpec, frame: RenderedFrame, min_pixels=20):
    """Perfect 2-D detections: the bounding box of every labeled, visible primitive."""
    from .fusion import Detection2D

    out = []
    for j, box in enumerate(spec.obstacles):
        if not box.label:
            continue
        m = frame.object_ids == j + 1
        if m.sum() >= min_pixels:
            out.append(Detection2D(box.label, 1.0, mask_bbox(m), frame.index))
    if spec.patches:
        k = spec.intrinsics
        dirs = pixel_rays(k) @ attitude_rotation(frame.attitude).T
        hit = frame.camera_position + dirs * frame.clean_depth[..., None]
        for patch in spec.patches:
            if not patch.label:
                continue
            m = (frame.ground_mask & (hit[..., 0] >= patch.x_range[0])
                 & (hit[..., 0] <= patch.x_range[1]) & (hit[..., 2] >= patch.z_range[0])
                 & (hit[..., 2] <= patch.z_range[1]))
            if m.sum() >= min_pixels:
                out.append(Detection2D(patch.label, 1.0, mask_bbox(m), frame.index))
    return out


def generate_synthetic_scene(spec: SceneSpec, out_dir, seed=0):
    """Render ``spec`` and write a dataset directory.

    Layout: ``intrinsics.txt``, ``extrinsics.txt``, ``frames/NNNNNN.{depth.png,
    rgb.png,meta}``, ``detections.ndrec``, ``truth/NNNNNN.mask.png`` (ground),
    ``truth/NNNNNN.objects.png`` (obstacle ids) and ``truth/objects.json``.
    Output is byte-identical for the same spec and seed.
    """
    from .dataset import write_dataset_frame, write_extrinsics, write_intrinsics
    from .detector import dump_detections

    out = Path(out_dir)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    (out / "truth").mkdir(parents=True, exist_ok=True)
    k = spec.intrinsics
    write_intrinsics(out / "intrinsics.txt", k)
    write_extrinsics(out / "extrinsics.txt", np.eye(3), np.zeros(3))
    detections = []
    visible = {}
    for frame in render_sequence(spec, seed):
        timestamp_us = int(round(frame.index * 1e6 / spec.frame_rate))
        i = frame.index
        attitude_deg = (spec.pitch_deg[i if len(spec.pitch_deg) > 1 else 0],
                        spec.roll_deg[i if len(spec.roll_deg) > 1 else 0])
        write_dataset_frame(out, frame, timestamp_us, k.depth_scale, attitude_deg)
        detections.extend(truth_detections(spec, frame))
        visible[f"{frame.index:06d}"] = sorted(int(v) for v in np.unique(frame.object_ids) if v)
    dump_detections(detections, out / "detections.ndrec")
    truth = {"scene": spec.to_dict(), "seed": seed,
             "obstacles": [{"id": j + 1, **asdict(b)} for j, b in enumerate(spec.obstacles)],
             "visible": visible}
    (out / "truth" / "objects.json").write_text(json.dumps(truth, indent=1, sort_keys=True) + "\n")
    return out


# -- preset scenes -----------------------------------------------------------

def flat_floor_scene(**kw):
    return SceneSpec(**{"pitch_deg": (15.0,), **kw})


def corridor_scene(n_frames=80, **kw):
    """Walk down a 2.4 m corridor toward a box standing in the middle.

    The gaps beside the box (0.6 m) are narrower than the default passable
    width, so the path ends blocked about 0.45 m short of the box.
    """
    walls = (Box((-1.6, -1.5, -1.0), (-1.2, 1.0, 30.0), kind="wall"),
             Box((1.2, -1.5, -1.0), (1.6, 1.0, 30.0), kind="wall"))
    box = Box((-0.6, -1.5, 4.0), (0.6, -0.7, 4.5), label="box")
    return SceneSpec(**{"pitch_deg": (20.0,), "speed": 0.045, "n_frames": n_frames,
                        "obstacles": walls + (box,), "noise_sigma": 0.005, **kw})


def table_distractor_scene(n_frames=100, ramp_frames=5, **kw):
    """Raise the gaze from the floor toward a table between two cabinets.

    The pitch eases from 35 to 10 degrees over ``ramp_frames`` frames. At the
    final pitch the table top dominates the points below the per-frame Otsu
    threshold while covering about a third of the in-range points.
    """
    table = Box((-1.0, -0.85, 2.0), (1.0, -0.8, 2.9), label="dining table", kind="plane")
    walls = (Box((-1.5, -1.5, -1.0), (-1.2, 0.5, 30.0), kind="wall"),
             Box((1.2, -1.5, -1.0), (1.5, 0.5, 30.0), kind="wall"))
    pitch = tuple(35.0 - 25.0 * min(i, ramp_frames) / ramp_frames for i in range(n_frames))
    return SceneSpec(**{"pitch_deg": pitch, "speed": 0.002, "n_frames": n_frames,
                        "obstacles": (table,) + walls, "noise_sigma": 0.005, **kw})


def ramp_scene(slope_deg=30.0, **kw):
    return SceneSpec(**{"pitch_deg": (15.0,), "ground_slope_deg": slope_deg, **kw})


def painted_floor_scene(**kw):
    patch = Patch((-0.4, 0.4), (2.0, 2.8), label="stop sign")
    return SceneSpec(**{"pitch_deg": (20.0,), "patches": (patch,), **kw})


PRESETS = {
    "flat": flat_floor_scene,
    "corridor": corridor_scene,
    "table": table_distractor_scene,
    "ramp": ramp_scene,
    "painted": painted_floor_scene,
}
