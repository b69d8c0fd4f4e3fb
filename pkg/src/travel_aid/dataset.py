"""On-disk dataset layout.

::

    intrinsics.txt          fx=..., fy=..., u0=..., v0=..., depth_scale=..., width=..., height=...
    extrinsics.txt          line 1: R row-major (9 numbers); line 2: t (3 numbers, meters)
    frames/NNNNNN.depth.png 16-bit single channel, raw units (depth_scale m per unit)
    frames/NNNNNN.rgb.png   8-bit color
    frames/NNNNNN.meta      timestamp_us=..., pitch_deg=..., roll_deg=...
    detections.ndrec        line-delimited detection records
    truth/NNNNNN.mask.png   ground truth ground mask (0 / 255)
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .errors import TravelAidError
from .fusion import Extrinsics
from .geometry import Attitude, CameraIntrinsics, DepthFrame, RgbFrame


class DatasetError(TravelAidError):
    pass


def _read_kv(path):
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DatasetError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = value
    return values


def _write_kv(path, items):
    Path(path).write_text("".join(f"{k}={v}\n" for k, v in items))


def write_intrinsics(path, k: CameraIntrinsics):
    _write_kv(path, [("fx", repr(float(k.fx))), ("fy", repr(float(k.fy))), ("u0", repr(float(k.u0))),
                     ("v0", repr(float(k.v0))), ("depth_scale", repr(float(k.depth_scale))),
                     ("width", int(k.width)), ("height", int(k.height))])


def read_intrinsics(path, width=None, height=None) -> CameraIntrinsics:
    kv = _read_kv(path)
    try:
        w = int(kv.get("width", width))
        h = int(kv.get("height", height))
        return CameraIntrinsics(float(kv["fx"]), float(kv["fy"]), float(kv["u0"]), float(kv["v0"]),
                                w, h, float(kv.get("depth_scale", 0.001)))
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"{path}: bad intrinsics ({exc})") from None


def write_extrinsics(path, r, t):
    r = np.asarray(r, dtype=np.float64).ravel()
    t = np.asarray(t, dtype=np.float64).ravel()
    Path(path).write_text(" ".join(repr(float(v)) for v in r) + "\n"
                          + " ".join(repr(float(v)) for v in t) + "\n")


def read_extrinsics(path) -> Extrinsics:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    try:
        r = [float(v) for v in lines[0].split()]
        t = [float(v) for v in lines[1].split()]
        if len(r) != 9 or len(t) != 3:
            raise ValueError("need 9 rotation and 3 translation values")
        return Extrinsics(np.array(r).reshape(3, 3), np.array(t))
    except (IndexError, ValueError) as exc:
        raise DatasetError(f"{path}: bad extrinsics ({exc})") from None


def frame_stem(index):
    return f"{index:06d}"


def write_dataset_frame(root, frame, timestamp_us, depth_scale, attitude_deg=None):
    """Write one rendered frame (see ``synth.RenderedFrame``) plus its truth masks.

    ``attitude_deg`` gives (pitch, roll) in degrees to store verbatim; by
    default they are converted from the frame's attitude.
    """
    root = Path(root)
    stem = frame_stem(frame.index)
    raw = np.round(frame.depth / depth_scale)
    raw = np.clip(raw, 0, 65535).astype(np.uint16)
    _imwrite(root / "frames" / f"{stem}.depth.png", raw)
    _imwrite(root / "frames" / f"{stem}.rgb.png", cv2.cvtColor(frame.rgb, cv2.COLOR_RGB2BGR))
    if attitude_deg is None:
        attitude_deg = np.degrees(frame.attitude.pitch), np.degrees(frame.attitude.roll)
    pitch, roll = attitude_deg
    _write_kv(root / "frames" / f"{stem}.meta",
              [("timestamp_us", timestamp_us), ("pitch_deg", repr(float(pitch))),
               ("roll_deg", repr(float(roll)))])
    _imwrite(root / "truth" / f"{stem}.mask.png", frame.ground_mask.astype(np.uint8) * 255)
    _imwrite(root / "truth" / f"{stem}.objects.png", frame.object_ids.astype(np.uint8))


def _imwrite(path, image):
    if not cv2.imwrite(str(path), image):
        raise DatasetError(f"could not write {path}")


def _imread(path, flags):
    image = cv2.imread(str(path), flags)
    if image is None:
        raise DatasetError(f"could not read {path}")
    return image


@dataclass(frozen=True)
class DatasetFrame:
    frame_index: int
    depth_path: Path
    rgb_path: Path
    attitude: Attitude
    timestamp_us: int
    depth_scale: float

    def load_depth(self) -> DepthFrame:
        raw = _imread(self.depth_path, cv2.IMREAD_UNCHANGED)
        if raw.ndim != 2:
            raise DatasetError(f"{self.depth_path}: depth must be single-channel")
        return DepthFrame.from_raw(raw, self.depth_scale, self.frame_index)

    def load_rgb(self) -> RgbFrame:
        bgr = _imread(self.rgb_path, cv2.IMREAD_COLOR)
        return RgbFrame(cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB), self.frame_index)


class Dataset:
    """Read-only view of a dataset directory; rasters load lazily per frame."""

    def __init__(self, root):
        self.root = Path(root)
        if not (self.root / "intrinsics.txt").exists():
            raise DatasetError(f"{self.root}: missing intrinsics.txt")
        self.intrinsics = read_intrinsics(self.root / "intrinsics.txt")
        ext_path = self.root / "extrinsics.txt"
        self.extrinsics = read_extrinsics(ext_path) if ext_path.exists() else Extrinsics()
        self.frames = self._scan()
        if not self.frames:
            raise DatasetError(f"{self.root}: no frames")

    def _scan(self):
        frames = []
        for meta in sorted((self.root / "frames").glob("*.meta")):
            stem = meta.name[:-len(".meta")]
            kv = _read_kv(meta)
            try:
                att = Attitude.from_degrees(float(kv.get("pitch_deg", 0)), float(kv.get("roll_deg", 0)))
                ts = int(kv.get("timestamp_us", 0))
            except ValueError as exc:
                raise DatasetError(f"{meta}: {exc}") from None
            frames.append(DatasetFrame(int(stem), meta.with_name(f"{stem}.depth.png"),
                                       meta.with_name(f"{stem}.rgb.png"), att, ts,
                                       self.intrinsics.depth_scale))
        indices = [f.frame_index for f in frames]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise DatasetError("frame indices must increase")
        return frames

    def __len__(self):
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    @property
    def detections_path(self):
        return self.root / "detections.ndrec"

    def truth_mask(self, frame_index):
        path = self.root / "truth" / f"{frame_stem(frame_index)}.mask.png"
        if not path.exists():
            raise DatasetError(f"missing truth mask {path}")
        return _imread(path, cv2.IMREAD_UNCHANGED) > 0
