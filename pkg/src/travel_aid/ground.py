"""Time-dependent adaptive ground detection.

Per frame: Otsu height threshold on the range-limited cloud, blend with the
previous frame's ground height, select candidates below the blended threshold,
RANSAC plane fit, slope classification, tolerance refinement, and the mean
refined height which seeds the next frame.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DegenerateHistogram, GroundFitError
from .geometry import PointCloud

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GroundConfig:
    lam: float = 0.6
    mu: float = 0.4
    tz: float = 3.0
    sigma: float = 0.03
    slope_min: float = 3.0
    slope_max: float = 15.0
    ransac_iters: int = 200
    ransac_inlier_tol: float = 0.02
    otsu_bins: int = 64
    min_ground_points: int = 100
    height_margin: float = 0.15
    # hypotheses are scored on at most this many candidates; 0 scores on all
    ransac_score_points: int = 2048

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError("lambda", "must be >= 0")
        if self.mu < 0:
            raise ConfigError("mu", "must be >= 0")
        if abs(self.lam + self.mu - 1.0) > 1e-9:
            raise ConfigError("lambda", "lambda + mu must equal 1")
        if self.tz <= 0:
            raise ConfigError("tz", "must be > 0")
        if self.sigma <= 0:
            raise ConfigError("sigma", "must be > 0")
        if not 0 < self.slope_min < self.slope_max < 90:
            raise ConfigError("slope_min", "need 0 < slope_min < slope_max < 90")
        if self.ransac_iters < 1:
            raise ConfigError("ransac_iters", "must be >= 1")
        if self.ransac_inlier_tol <= 0:
            raise ConfigError("ransac_inlier_tol", "must be > 0")
        if self.otsu_bins < 16:
            raise ConfigError("otsu_bins", "must be >= 16")
        if self.min_ground_points < 3:
            raise ConfigError("min_ground_points", "must be >= 3")
        if self.height_margin < 0:
            raise ConfigError("height_margin", "must be >= 0")
        if self.ransac_score_points < 0:
            raise ConfigError("ransac_score_points", "must be >= 0")


@dataclass(frozen=True)
class GroundState:
    """Per-stream memory: the selection threshold carried to the next frame."""

    ty_pre: float | None = None

    @property
    def initialized(self):
        return self.ty_pre is not None


@dataclass(frozen=True)
class GroundPlane:
    """``a*x + b*y + c*z + d = 0`` with a unit, up-facing normal (b >= 0)."""

    a: float
    b: float
    c: float
    d: float

    @classmethod
    def from_normal(cls, normal, d):
        n = np.asarray(normal, dtype=np.float64)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise GroundFitError("zero plane normal")
        n, d = n / norm, d / norm
        if n[1] < 0 or (n[1] == 0 and (n[2] > 0 or (n[2] == 0 and n[0] < 0))):
            n, d = -n, -d
        return cls(float(n[0]), float(n[1]), float(n[2]), float(d))

    @property
    def normal(self):
        return np.array([self.a, self.b, self.c])

    def signed_distance(self, xyz):
        """Height above the plane along its up-facing normal."""
        return np.asarray(xyz) @ self.normal + self.d


class GroundClass(enum.Enum):
    HORIZONTAL = "horizontal"
    UPSLOPE = "upslope"
    DOWNSLOPE = "downslope"
    NON_GROUND = "non_ground"


@dataclass(frozen=True, eq=False)
class GroundResult:
    cls: GroundClass
    plane: GroundPlane | None
    refined: PointCloud
    height_h: float | None
    ty_used: float | None
    reason: str = ""

    @property
    def is_ground(self):
        return self.cls is not GroundClass.NON_GROUND


def range_limited(cloud: PointCloud, tz):
    return cloud.subset((cloud.z > 0) & (cloud.z < tz))


def otsu_threshold_from_histogram(counts, lo, hi):
    """Otsu threshold over equal-width bins spanning ``[lo, hi]``.

    Returns the bin boundary that maximizes the between-class variance,
    taking the lowest boundary among exact ties.
    """
    counts = np.asarray(counts, dtype=np.int64)
    nbins = len(counts)
    # Equal-width bins: the argmax is invariant to the affine map index -> value,
    # so work with integer bin indices and keep the tie test exact.
    idx = np.arange(nbins, dtype=np.int64)
    n0 = np.cumsum(counts)[:-1]
    s0 = np.cumsum(counts * idx)[:-1]
    total, stotal = int(counts.sum()), int((counts * idx).sum())
    n1 = total - n0
    s1 = stotal - s0
    ok = (n0 > 0) & (n1 > 0)
    if not ok.any():
        raise DegenerateHistogram("degenerate histogram: a single occupied bin")
    # between-class variance ∝ (n0*s1 - n1*s0)^2 / (n0*n1)
    num = (n0 * s1 - n1 * s0).astype(np.float64) ** 2
    score = np.where(ok, num / np.where(ok, n0 * n1, 1), -1.0)
    best = score.max()
    if best <= 0:
        raise DegenerateHistogram("degenerate histogram: zero between-class variance")
    near = np.flatnonzero(score >= best * (1 - 1e-9))
    k = int(near[0])
    if len(near) > 1:
        # resolve float near-ties exactly: compare num_i/den_i with integer arithmetic
        def key(i):
            return (int(n0[i]) * int(s1[i]) - int(n1[i]) * int(s0[i])) ** 2, int(n0[i]) * int(n1[i])
        bn, bd = key(k)
        for i in near[1:]:
            cn, cd = key(int(i))
            if cn * bd > bn * cd:
                k, bn, bd = int(i), cn, cd
    return lo + (k + 1) * (hi - lo) / nbins


def otsu_height_threshold(cloud: PointCloud, cfg: GroundConfig) -> float:
    """Otsu split of the y-coordinate histogram of the range-limited cloud."""
    pts = range_limited(cloud, cfg.tz)
    if len(pts) < cfg.min_ground_points:
        raise GroundFitError(f"only {len(pts)} points within {cfg.tz} m")
    y = pts.y
    lo, hi = float(y.min()), float(y.max())
    if hi - lo <= 1e-9 * max(1.0, abs(lo)):
        raise DegenerateHistogram("degenerate histogram: all heights equal")
    counts, _ = np.histogram(y, bins=cfg.otsu_bins, range=(lo, hi))
    return otsu_threshold_from_histogram(counts, lo, hi)


def blend_threshold(ty_roi, state: GroundState, cfg: GroundConfig) -> float:
    if not state.initialized:
        return float(ty_roi)
    return cfg.lam * ty_roi + cfg.mu * state.ty_pre


def select_candidates(cloud: PointCloud, ty, cfg: GroundConfig) -> PointCloud:
    return cloud.subset((cloud.y < ty) & (cloud.z > 0) & (cloud.z < cfg.tz))


def _lstsq_plane(xyz):
    centroid = xyz.mean(axis=0)
    _, _, vt = np.linalg.svd(xyz - centroid, full_matrices=False)
    normal = vt[-1]
    return GroundPlane.from_normal(normal, -normal @ centroid)


def fit_plane_ransac(f_init: PointCloud, cfg: GroundConfig, seed=0) -> GroundPlane:
    """Best-consensus 3-point RANSAC plane, refit by least squares on its inliers."""
    xyz = f_init.xyz
    n = len(xyz)
    if n < max(3, cfg.min_ground_points):
        raise GroundFitError(f"RANSAC needs {cfg.min_ground_points} points, got {n}")
    rng = np.random.default_rng(seed)
    # three distinct indices per hypothesis
    i0 = rng.integers(0, n, cfg.ransac_iters)
    i1 = (i0 + rng.integers(1, n, cfg.ransac_iters)) % n
    i2 = rng.integers(0, n - 2, cfg.ransac_iters)
    lo, hi = np.minimum(i0, i1), np.maximum(i0, i1)
    i2 = i2 + (i2 >= lo)
    i2 = i2 + (i2 >= hi)
    p0, p1, p2 = xyz[i0], xyz[i1], xyz[i2]
    normals = np.cross(p1 - p0, p2 - p0)
    norms = np.linalg.norm(normals, axis=1)
    scale = np.maximum(np.linalg.norm(p1 - p0, axis=1) * np.linalg.norm(p2 - p0, axis=1), 1e-300)
    good = norms > 1e-9 * scale
    if not good.any():
        raise GroundFitError("all RANSAC samples are collinear")
    normals = normals[good] / norms[good, None]
    offsets = -np.einsum("ij,ij->i", normals, p0[good])
    scored = xyz
    if 0 < cfg.ransac_score_points < n:
        scored = xyz[rng.choice(n, cfg.ransac_score_points, replace=False)]
    dist = scored.astype(np.float32) @ normals.T.astype(np.float32) + offsets.astype(np.float32)
    counts = (np.abs(dist) <= cfg.ransac_inlier_tol).sum(axis=0)
    best = int(np.argmax(counts))
    inliers = np.abs(xyz @ normals[best] + offsets[best]) <= cfg.ransac_inlier_tol
    if inliers.sum() < 3:
        raise GroundFitError("RANSAC consensus set too small")
    plane = _lstsq_plane(xyz[inliers])
    if not np.all(np.isfinite([plane.a, plane.b, plane.c, plane.d])):
        raise GroundFitError("non-finite plane refit")
    return plane


def ground_pitch_angle(plane: GroundPlane) -> float:
    """Angle in degrees between the plane normal and world up."""
    n = plane.normal
    cos = abs(n[1]) / np.linalg.norm(n)
    return float(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))


def classify_ground(plane: GroundPlane, cfg: GroundConfig) -> GroundClass:
    phi = ground_pitch_angle(plane)
    if phi < cfg.slope_min:
        return GroundClass.HORIZONTAL
    if phi > cfg.slope_max:
        return GroundClass.NON_GROUND
    # y = -(a x + c z + d)/b: the grade along +Z is -c/b
    return GroundClass.UPSLOPE if -plane.c / plane.b > 0 else GroundClass.DOWNSLOPE


def refine_ground(f_init: PointCloud, plane: GroundPlane, cfg: GroundConfig) -> PointCloud:
    return f_init.subset(np.abs(plane.signed_distance(f_init.xyz)) <= cfg.sigma)


def ground_height(f: PointCloud) -> float:
    if len(f) == 0:
        raise GroundFitError("empty refined ground")
    return float(np.mean(f.y))


def _failure(reason, ty=None, plane=None):
    logger.debug("non_ground: %s", reason)
    return GroundResult(GroundClass.NON_GROUND, plane, PointCloud.empty(), None, ty, reason)


def detect_ground(cloud: PointCloud, state: GroundState, cfg: GroundConfig, seed=0):
    """Run the full per-frame ground detector.

    Returns ``(result, new_state)``. On any failure or a non-ground
    classification the state is returned unchanged.
    """
    try:
        ty_roi = otsu_height_threshold(cloud, cfg)
    except DegenerateHistogram:
        # one height group (e.g. a bare noiseless floor): every in-range point is a candidate
        ty_roi = float(range_limited(cloud, cfg.tz).y.max()) + cfg.height_margin
    except GroundFitError as exc:
        return _failure(str(exc)), state
    ty = blend_threshold(ty_roi, state, cfg)
    f_init = select_candidates(cloud, ty, cfg)
    try:
        plane = fit_plane_ransac(f_init, cfg, seed)
    except GroundFitError as exc:
        return _failure(str(exc), ty), state
    cls = classify_ground(plane, cfg)
    if cls is GroundClass.NON_GROUND:
        return _failure(f"slope {ground_pitch_angle(plane):.1f} deg exceeds band", ty, plane), state
    refined = refine_ground(f_init, plane, cfg)
    if len(refined) == 0:
        return _failure("refinement left no points", ty, plane), state
    h = ground_height(refined)
    result = GroundResult(cls, plane, refined, h, ty)
    return result, replace(state, ty_pre=h + cfg.height_margin)


def detect_ground_memoryless(cloud: PointCloud, cfg: GroundConfig, seed=0) -> GroundResult:
    """Per-frame RANSAC baseline: the same pipeline without height memory."""
    return detect_ground(cloud, GroundState(), cfg, seed)[0]
