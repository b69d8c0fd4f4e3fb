"""Depth-image obstacle extraction and fusion with 2-D category detections."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import cv2
import numpy as np
from scipy import ndimage

from .errors import ConfigError, FusionError
from .geometry import Attitude, CameraIntrinsics, DepthFrame, reconstruct_image
from .ground import GroundResult

logger = logging.getLogger(__name__)

REFERENCE_RESOLUTION = (640, 480)
LEFT_FRONT, FRONT, RIGHT_FRONT = "left-front", "front", "right-front"
UNLABELED = "obstacle"


@dataclass(frozen=True)
class FusionConfig:
    min_contour_area: float = 300.0
    zeta: float = 0.7
    close_kernel: int = 2
    direction_band: float = 5.0

    def __post_init__(self):
        if self.min_contour_area <= 0:
            raise ConfigError("min_contour_area", "must be > 0")
        if not 0 < self.zeta <= 1:
            raise ConfigError("zeta", "must lie in (0, 1]")
        if self.close_kernel < 1:
            raise ConfigError("close_kernel", "must be >= 1")
        if self.direction_band < 0:
            raise ConfigError("direction_band", "must be >= 0")

    def area_for(self, width, height):
        """``min_contour_area`` is given at 640x480; scale it by pixel count."""
        ref_w, ref_h = REFERENCE_RESOLUTION
        return self.min_contour_area * (width * height) / (ref_w * ref_h)


@dataclass(frozen=True)
class Extrinsics:
    """Rigid map from RGB-camera to depth-camera coordinates: ``p_d = r @ p_rgb + t``.

    Both camera frames use the usual pinhole convention (x right, y down,
    z forward).
    """

    r: np.ndarray = field(default_factory=lambda: np.eye(3))
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.asarray(self.r, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.t, dtype=np.float64).reshape(3)
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-6:
            raise FusionError("extrinsic rotation is not orthonormal")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "t", t)


@dataclass(frozen=True)
class Detection2D:
    label: str
    score: float
    bbox: tuple  # (x, y, w, h) in RGB pixels
    frame_index: int = 0

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")
        x, y, w, h = self.bbox
        if w <= 0 or h <= 0:
            raise ValueError("bbox must have positive size")
        object.__setattr__(self, "bbox", (int(x), int(y), int(w), int(h)))


@dataclass(frozen=True)
class DepthBox:
    """Axis-aligned depth-frame region, half-open: columns x0..x1-1, rows y0..y1-1."""

    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def area(self):
        return max(0, self.x1 - self.x0) * max(0, self.y1 - self.y0)

    def as_xywh(self):
        return (self.x0, self.y0, self.x1 - self.x0, self.y1 - self.y0)

    def mask(self, shape):
        m = np.zeros(shape, dtype=bool)
        m[self.y0:self.y1, self.x0:self.x1] = True
        return m

    def contains(self, rows, cols):
        return (cols >= self.x0) & (cols < self.x1) & (rows >= self.y0) & (rows < self.y1)


@dataclass(frozen=True, eq=False)
class ObstacleContour:
    rows: np.ndarray
    cols: np.ndarray
    shape: tuple
    boundary: list
    centroid: tuple
    z_center: float | None

    @property
    def area(self):
        return len(self.rows)

    def mask(self):
        m = np.zeros(self.shape, dtype=bool)
        m[self.rows, self.cols] = True
        return m


@dataclass(frozen=True)
class ObstacleLocation:
    theta_h: float  # degrees, from the column offset; negative to the left
    theta_v: float  # degrees, from the row offset; negative upward
    z: float


@dataclass(frozen=True)
class FusedObject:
    label: str
    distance: float
    location: ObstacleLocation
    direction_bucket: str
    intersection_ratio: float
    score: float | None = None


def direction_bucket(theta_h, band=5.0):
    """Three-way bucket; the ``[-band, band]`` interval is closed."""
    if theta_h < -band:
        return LEFT_FRONT
    if theta_h > band:
        return RIGHT_FRONT
    return FRONT


def remove_ground(depth: DepthFrame, ground: GroundResult, k: CameraIntrinsics,
                  att: Attitude, sigma) -> np.ndarray:
    """Mask of valid pixels more than ``sigma`` above the ground plane."""
    if not ground.is_ground:
        raise FusionError("cannot remove ground from a non-ground frame")
    world = reconstruct_image(depth, k, att)
    height = ground.plane.signed_distance(world)
    return depth.valid & (height > sigma)


def close_mask(mask, radius):
    """Morphological closing with a square element, treating the outside as empty."""
    mask = np.asarray(mask, dtype=np.uint8)
    size = 2 * radius + 1
    kernel = np.ones((size, size), dtype=np.uint8)
    padded = cv2.copyMakeBorder(mask, radius, radius, radius, radius, cv2.BORDER_CONSTANT, value=0)
    closed = cv2.erode(cv2.dilate(padded, kernel), kernel)
    return closed[radius:-radius, radius:-radius].astype(bool)


def contour_centroid(region) -> tuple:
    """Moment centroid ``(M10/M00, M01/M00)`` of a boolean region, as (x, y)."""
    rows, cols = np.nonzero(region)
    return _centroid(rows, cols)


def _centroid(rows, cols):
    m00 = len(rows)
    if m00 == 0:
        raise FusionError("zero-area region")
    return float(cols.sum()) / m00, float(rows.sum()) / m00


def _min_nonzero(values):
    values = values[values > 0]
    return float(values.min()) if len(values) else None


def _boundary(rows, cols, shape):
    m = np.zeros(shape, dtype=np.uint8)
    m[rows, cols] = 1
    contours, _ = cv2.findContours(m, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE)
    return [c.reshape(-1, 2) for c in contours]


def _make_contour(rows, cols, shape, depth):
    cx, cy = _centroid(rows, cols)
    z = None
    if depth is not None:
        z = depth.values[int(round(cy)), int(round(cx))]
        if z <= 0:
            z = _min_nonzero(depth.values[rows, cols])
        else:
            z = float(z)
    return ObstacleContour(rows, cols, shape, _boundary(rows, cols, shape), (cx, cy), z)


def close_and_extract_contours(mask, cfg: FusionConfig, depth: DepthFrame | None = None,
                               min_area=None) -> list:
    """Closed, hole-filled obstacle regions with area at least ``min_area``.

    Regions smaller than ``min_area`` join the nearest large region when the
    gap between them is at most ``close_kernel`` pixels and are dropped
    otherwise. ``min_area`` defaults to ``cfg.min_contour_area``.
    """
    min_area = cfg.min_contour_area if min_area is None else min_area
    closed = close_mask(mask, cfg.close_kernel)
    # filling holes before labeling keeps only outermost (external) contours
    filled = ndimage.binary_fill_holes(closed)
    labels, count = ndimage.label(filled, structure=np.ones((3, 3)))
    if count == 0:
        return []
    areas = np.bincount(labels.ravel(), minlength=count + 1)
    big = np.flatnonzero(areas >= min_area)
    big = big[big > 0]
    small = np.flatnonzero((areas < min_area) & (areas > 0))
    small = small[small > 0]
    if len(big) and len(small):
        dist, (ir, ic) = ndimage.distance_transform_edt(~np.isin(labels, big), return_indices=True)
        owner = labels[ir, ic]
        for lab in small:
            sel = labels == lab
            d = dist[sel]
            j = int(np.argmin(d))
            # pixel-center distance minus one is the number of empty pixels between
            if d[j] - 1 <= cfg.close_kernel:
                labels[sel] = owner[sel][j]
    contours = []
    for lab in big:
        rows, cols = np.nonzero(labels == lab)
        contours.append(_make_contour(rows, cols, labels.shape, depth))
    return contours


def locate_obstacle(centroid, depth: DepthFrame, k: CameraIntrinsics, region=None) -> ObstacleLocation:
    """Angles of the centroid ray and the depth at the centroid.

    ``region`` is a boolean mask or ``(rows, cols)`` pair; its minimum
    non-zero depth is used when the centroid pixel has no measurement.
    """
    x, y = centroid
    col, row = int(round(x)), int(round(y))
    if not (0 <= col < depth.width and 0 <= row < depth.height):
        raise FusionError("centroid outside the frame")
    theta_h = math.degrees(math.atan((x - k.u0) / k.fx))
    theta_v = math.degrees(math.atan((y - k.v0) / k.fy))
    z = float(depth.values[row, col])
    if z <= 0:
        z = None
        if region is not None:
            if isinstance(region, tuple):
                z = _min_nonzero(depth.values[region[0], region[1]])
            else:
                z = _min_nonzero(depth.values[np.asarray(region, dtype=bool)])
        if z is None:
            raise FusionError("region has no valid depth")
    return ObstacleLocation(theta_h, theta_v, z)


def _map_corners(corners, z, ext: Extrinsics, k_rgb: CameraIntrinsics, k_depth: CameraIntrinsics):
    u, v = corners[:, 0], corners[:, 1]
    rays = np.column_stack(((u - k_rgb.u0) / k_rgb.fx, (v - k_rgb.v0) / k_rgb.fy, np.ones(len(u))))
    if z is None:
        p = rays @ ext.r.T  # point at infinity: translation drops out
    else:
        p = (rays * z) @ ext.r.T + ext.t
    if np.any(p[:, 2] <= 0):
        raise FusionError("mapped detection lies behind the depth camera")
    return (np.column_stack((k_depth.u0 + k_depth.fx * p[:, 0] / p[:, 2],
                             k_depth.v0 + k_depth.fy * p[:, 1] / p[:, 2])))


def map_detection_to_depth(det: Detection2D, ext: Extrinsics, k_rgb: CameraIntrinsics,
                           k_depth: CameraIntrinsics, depth: DepthFrame, z=None) -> DepthBox:
    """Reproject a detection box into depth-frame pixels.

    The box corners are lifted to depth ``z`` (default: median valid depth
    under the box's rotation-only footprint) and reprojected; the bounding
    rectangle of the result is clipped to the frame.
    """
    x, y, w, h = det.bbox
    corners = np.array([[x, y], [x + w, y], [x, y + h], [x + w, y + h]], dtype=np.float64)
    if z is None:
        approx = _bounding_box(_map_corners(corners, None, ext, k_rgb, k_depth), depth)
        if approx is not None:
            patch = depth.values[approx.y0:approx.y1, approx.x0:approx.x1]
            patch = patch[patch > 0]
            if len(patch):
                z = float(np.median(patch))
    box = _bounding_box(_map_corners(corners, z, ext, k_rgb, k_depth), depth)
    if box is None:
        raise FusionError(f"detection {det.label!r} maps outside the depth frame")
    return box


def _bounding_box(uv, depth: DepthFrame):
    eps = 1e-6
    x0 = max(0, math.floor(uv[:, 0].min() + eps))
    y0 = max(0, math.floor(uv[:, 1].min() + eps))
    x1 = min(depth.width, math.ceil(uv[:, 0].max() - eps))
    y1 = min(depth.height, math.ceil(uv[:, 1].max() - eps))
    if x1 <= x0 or y1 <= y0:
        return None
    return DepthBox(x0, y0, x1, y1)


def intersection_ratio(box: DepthBox, contour: ObstacleContour):
    """``S_C / max(S_A, S_B)`` and the boolean selector of contour pixels in ``C``."""
    inside = box.contains(contour.rows, contour.cols)
    s_c = int(inside.sum())
    return s_c / max(box.area, contour.area), inside


def fuse_detections(regions, contours, depth: DepthFrame, cfg: FusionConfig,
                    k: CameraIntrinsics) -> list:
    """Attach category labels to depth contours.

    ``regions`` is a list of ``(Detection2D, DepthBox)``. Each contour takes
    the label of the detection with the highest intersection ratio at or
    above ``zeta``; every detection labels at most one contour. Contours
    left unmatched are reported with the label ``"obstacle"``. Detections
    whose frame index differs from the depth frame are ignored.
    """
    current = [(det, box) for det, box in regions if det.frame_index == depth.frame_index]
    if len(current) != len(regions):
        logger.warning("dropped %d stale detections", len(regions) - len(current))
    pairs = []
    for di, (det, box) in enumerate(current):
        for ci, contour in enumerate(contours):
            ratio, inside = intersection_ratio(box, contour)
            if ratio >= cfg.zeta:
                pairs.append((ratio, di, ci, inside))
    pairs.sort(key=lambda p: (-p[0], p[1], p[2]))
    used_det, matched = set(), {}
    for ratio, di, ci, inside in pairs:
        if di in used_det or ci in matched:
            continue
        rows, cols = contours[ci].rows[inside], contours[ci].cols[inside]
        if _min_nonzero(depth.values[rows, cols]) is None:
            continue
        used_det.add(di)
        matched[ci] = (ratio, current[di][0], rows, cols)

    objects = []
    for ci, contour in enumerate(contours):
        if ci in matched:
            ratio, det, rows, cols = matched[ci]
            label, score = det.label, det.score
        else:
            ratio, label, score = 0.0, UNLABELED, None
            rows, cols = contour.rows, contour.cols
        distance = _min_nonzero(depth.values[rows, cols])
        if distance is None:
            logger.debug("contour %d has no valid depth; skipped", ci)
            continue
        loc = locate_obstacle(_centroid(rows, cols), depth, k, region=(rows, cols))
        objects.append(FusedObject(label, distance, loc,
                                   direction_bucket(loc.theta_h, cfg.direction_band), ratio, score))
    return objects
