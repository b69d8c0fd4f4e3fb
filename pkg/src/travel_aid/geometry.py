"""Camera model, attitude rotation and depth-to-world reconstruction.

Coordinate conventions
----------------------
Image frame: ``u`` grows to the right, ``v`` grows downward, origin top-left.

World frame: origin at the camera center, ``Y`` points up, ``Z`` points along
the user's facing direction. ``X`` grows with ``u`` at zero attitude, so a
positive azimuth ``atan2(x, z)`` is to the user's right.

A pixel ``(u, v)`` with depth ``z`` maps to::

    p_w = z * E @ [(u - u0) / fx, -(v - v0) / fy, 1]

with ``E = Rz(roll) @ Rx(pitch)``. A positive pitch tilts the optical axis
toward the floor.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import GeometryError

DEFAULT_DEPTH_SCALE = 0.001


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    u0: float
    v0: float
    width: int
    height: int
    depth_scale: float = DEFAULT_DEPTH_SCALE

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise GeometryError("focal lengths must be positive")
        if self.depth_scale <= 0:
            raise GeometryError("depth_scale must be positive")
        if self.width <= 0 or self.height <= 0:
            raise GeometryError("image dimensions must be positive")
        if not (0 <= self.u0 < self.width and 0 <= self.v0 < self.height):
            raise GeometryError("principal point outside the image")

    @classmethod
    def from_fov(cls, width, height, hfov_deg=58.0, depth_scale=DEFAULT_DEPTH_SCALE):
        """Square-pixel intrinsics with the principal point at the image center."""
        f = (width / 2.0) / np.tan(np.radians(hfov_deg) / 2.0)
        return cls(f, f, (width - 1) / 2.0, (height - 1) / 2.0, width, height, depth_scale)

    @property
    def matrix(self):
        return np.array([[self.fx, 0.0, self.u0], [0.0, self.fy, self.v0], [0.0, 0.0, 1.0]])

    def scaled(self, width, height):
        """Intrinsics for the same lens at another resolution."""
        sx = width / self.width
        sy = height / self.height
        return CameraIntrinsics(self.fx * sx, self.fy * sy, (self.u0 + 0.5) * sx - 0.5,
                                (self.v0 + 0.5) * sy - 0.5, width, height, self.depth_scale)


@dataclass(frozen=True)
class Attitude:
    """Camera attitude from the IMU, radians."""

    pitch: float = 0.0
    roll: float = 0.0

    def __post_init__(self):
        for name in ("pitch", "roll"):
            value = getattr(self, name)
            if not np.isfinite(value) or abs(value) > np.pi:
                raise GeometryError(f"{name} must lie in [-pi, pi], got {value}")

    @classmethod
    def from_degrees(cls, pitch_deg=0.0, roll_deg=0.0):
        return cls(np.radians(pitch_deg), np.radians(roll_deg))


@dataclass(frozen=True, eq=False)
class DepthFrame:
    """Depth raster in meters; 0 marks a missing measurement."""

    values: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        # private read-only copy; the caller's array stays writable
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise GeometryError("depth raster must be 2-D")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise GeometryError("depth values must be finite and non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_raw(cls, raw, depth_scale=DEFAULT_DEPTH_SCALE, frame_index=0):
        return cls(np.asarray(raw, dtype=np.float64) * depth_scale, frame_index)

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def valid(self):
        return self.values > 0


@dataclass(frozen=True, eq=False)
class RgbFrame:
    pixels: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 3 or pixels.shape[2] != 3 or 0 in pixels.shape:
            raise GeometryError("RGB raster must be H x W x 3 with positive dimensions")
        object.__setattr__(self, "pixels", pixels)

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]


class Point3(NamedTuple):
    x: float
    y: float
    z: float
    u: int | None = None
    v: int | None = None


@dataclass(frozen=True, eq=False)
class PointCloud:
    """World-frame points stored column-wise.

    ``uv`` holds the source pixel ``(u, v)`` of every point (or -1 when the
    point was not produced from a raster).
    """

    xyz: np.ndarray
    uv: np.ndarray = field(default=None)

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        uv = self.uv
        if uv is None:
            uv = np.full((len(xyz), 2), -1, dtype=np.int64)
        else:
            uv = np.asarray(uv, dtype=np.int64).reshape(-1, 2)
        if len(uv) != len(xyz):
            raise GeometryError("uv and xyz lengths differ")
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "uv", uv)

    @classmethod
    def from_points(cls, points):
        points = list(points)
        xyz = [(p.x, p.y, p.z) for p in points]
        uv = [(-1 if p.u is None else p.u, -1 if p.v is None else p.v) for p in points]
        return cls(np.array(xyz, dtype=np.float64).reshape(-1, 3), np.array(uv).reshape(-1, 2))

    @classmethod
    def empty(cls):
        return cls(np.empty((0, 3)))

    def __len__(self):
        return len(self.xyz)

    def __iter__(self):
        for (x, y, z), (u, v) in zip(self.xyz, self.uv):
            yield Point3(float(x), float(y), float(z),
                         None if u < 0 else int(u), None if v < 0 else int(v))

    @property
    def x(self):
        return self.xyz[:, 0]

    @property
    def y(self):
        return self.xyz[:, 1]

    @property
    def z(self):
        return self.xyz[:, 2]

    def subset(self, keep):
        return PointCloud(self.xyz[keep], self.uv[keep])

    def pixel_mask(self, height, width):
        """Boolean raster marking the source pixels of the points."""
        mask = np.zeros((height, width), dtype=bool)
        ok = self.uv[:, 0] >= 0
        mask[self.uv[ok, 1], self.uv[ok, 0]] = True
        return mask


def rot_x(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_z(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def attitude_rotation(att: Attitude) -> np.ndarray:
    """Camera-to-world rotation ``Rz(roll) @ Rx(pitch)``."""
    return rot_z(att.roll) @ rot_x(att.pitch)


def _check_dims(depth: DepthFrame, k: CameraIntrinsics):
    if (depth.width, depth.height) != (k.width, k.height):
        raise GeometryError(
            f"frame is {depth.width}x{depth.height} but intrinsics are {k.width}x{k.height}")


def pixel_rays(k: CameraIntrinsics):
    """Per-pixel camera-frame rays scaled to unit depth, shape (H, W, 3)."""
    u = (np.arange(k.width) - k.u0) / k.fx
    v = -(np.arange(k.height) - k.v0) / k.fy
    rays = np.empty((k.height, k.width, 3))
    rays[..., 0] = u[None, :]
    rays[..., 1] = v[:, None]
    rays[..., 2] = 1.0
    return rays


def reconstruct_image(depth: DepthFrame, k: CameraIntrinsics, att: Attitude) -> np.ndarray:
    """World coordinates for every pixel, shape (H, W, 3); invalid pixels are 0."""
    _check_dims(depth, k)
    e = attitude_rotation(att)
    return (pixel_rays(k) @ e.T) * depth.values[..., None]


def reconstruct_pointcloud(depth: DepthFrame, k: CameraIntrinsics, att: Attitude) -> PointCloud:
    """Back-project every valid pixel into the world frame, in raster order."""
    _check_dims(depth, k)
    vs, us = np.nonzero(depth.values > 0)
    z = depth.values[vs, us]
    rays = np.column_stack(((us - k.u0) / k.fx, -(vs - k.v0) / k.fy, np.ones_like(z)))
    xyz = (rays * z[:, None]) @ attitude_rotation(att).T
    return PointCloud(xyz, np.column_stack((us, vs)))


def project_points(xyz, k: CameraIntrinsics, att: Attitude):
    """Vectorized inverse of the reconstruction: returns ``(u, v, z)`` arrays.

    Raises GeometryError if any point lies at or behind the image plane.
    """
    cam = np.atleast_2d(np.asarray(xyz, dtype=np.float64)) @ attitude_rotation(att)
    z = cam[:, 2]
    if np.any(z <= 0):
        raise GeometryError("point behind camera")
    u = k.u0 + k.fx * cam[:, 0] / z
    v = k.v0 - k.fy * cam[:, 1] / z
    return u, v, z


def project_pixel(p, k: CameraIntrinsics, att: Attitude):
    """Project one world point to ``(u, v, z)`` with sub-pixel ``u, v``."""
    u, v, z = project_points([p[0], p[1], p[2]], k, att)
    return float(u[0]), float(v[0]), float(z[0])
