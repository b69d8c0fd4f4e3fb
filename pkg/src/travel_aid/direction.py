"""Optimal walkable direction search over polar sectors of the ground fan."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GroundFitError
from .geometry import PointCloud
from .ground import GroundResult


@dataclass(frozen=True)
class DirectionConfig:
    theta: float = 0.5
    n_sectors: int = 116
    w_sw: float = 0.7
    epsilon: float = 0.2
    award_angle_weight: float = 1.0
    award_dist_weight: float = 30.0
    tau: float = 0.8
    straight_band: float = 5.0
    centered_window: bool = False
    # points within this height of the fitted plane are floor, not obstacles
    floor_clearance: float = 0.1

    def __post_init__(self):
        if self.theta <= 0:
            raise ConfigError("theta", "must be > 0")
        if self.n_sectors < 2 or self.n_sectors % 2:
            raise ConfigError("n_sectors", "must be even and >= 2")
        if self.w_sw <= 0:
            raise ConfigError("w_sw", "must be > 0")
        if self.tau <= 0:
            raise ConfigError("tau", "must be > 0")
        if self.epsilon < 0:
            raise ConfigError("epsilon", "must be >= 0")
        if self.award_angle_weight < 0 or self.award_dist_weight < 0:
            raise ConfigError("award_angle_weight", "weights must be >= 0")
        if self.award_angle_weight == 0 and self.award_dist_weight == 0:
            raise ConfigError("award_angle_weight", "weights cannot both be zero")
        if self.straight_band < 0:
            raise ConfigError("straight_band", "must be >= 0")
        if self.floor_clearance < 0:
            raise ConfigError("floor_clearance", "must be >= 0")


@dataclass(frozen=True, eq=False)
class SectorScan:
    nearest: np.ndarray
    tz: float
    config: DirectionConfig

    def __post_init__(self):
        nearest = np.asarray(self.nearest, dtype=np.float64)
        if nearest.shape != (self.config.n_sectors,):
            raise ValueError(f"expected {self.config.n_sectors} sectors, got {nearest.shape}")
        nearest.setflags(write=False)
        object.__setattr__(self, "nearest", nearest)


class Action(enum.Enum):
    BLOCKED = "blocked"
    STRAIGHT = "straight"
    TURN = "turn"


@dataclass(frozen=True)
class DirectionDecision:
    action: Action
    sector: int
    award: float
    turn_angle: float | None = None  # degrees, positive to the right; None when blocked

    @property
    def side(self):
        if self.action is not Action.TURN:
            return None
        return "right" if self.turn_angle > 0 else "left"


def select_walkable_points(cloud: PointCloud, ground: GroundResult, cfg: DirectionConfig) -> PointCloud:
    """Points above the floor inside the ground's x/z extent and below head height."""
    if not ground.is_ground or len(ground.refined) == 0:
        raise GroundFitError("direction search needs a detected ground")
    f = ground.refined
    plane = ground.plane
    top = ground.height_h + abs(plane.d) / np.linalg.norm(plane.normal) + cfg.epsilon
    x, y, z = cloud.x, cloud.y, cloud.z
    keep = ((x >= f.x.min()) & (x <= f.x.max())
            & (y >= ground.height_h) & (y <= top)
            & (z >= 0) & (z <= f.z.max()))
    if cfg.floor_clearance > 0:
        keep &= plane.signed_distance(cloud.xyz) > cfg.floor_clearance
    return cloud.subset(keep)


def sector_index(x, z, cfg: DirectionConfig):
    """Sector of each (x, z) point; values outside [0, N) fall outside the fan."""
    azimuth = np.degrees(np.arctan2(x, z))
    return np.floor(azimuth / cfg.theta).astype(np.int64) + cfg.n_sectors // 2


def sector_nearest(points: PointCloud, cfg: DirectionConfig, tz) -> SectorScan:
    nearest = np.full(cfg.n_sectors, float(tz))
    z = points.z
    ok = z > 0
    idx = sector_index(points.x[ok], z[ok], cfg)
    inside = (idx >= 0) & (idx < cfg.n_sectors)
    np.minimum.at(nearest, idx[inside], np.minimum(z[ok][inside], tz))
    return SectorScan(nearest, float(tz), cfg)


def window_spans(nearest, cfg: DirectionConfig):
    """Number of sectors ``n_i`` covering the passable width at each sector's depth."""
    ratio = np.minimum(cfg.w_sw / np.asarray(nearest), 1.0)
    return np.floor(np.degrees(np.arcsin(ratio)) / cfg.theta).astype(np.int64)


def sector_awards(scan: SectorScan, cfg: DirectionConfig | None = None) -> np.ndarray:
    cfg = cfg or scan.config
    z = scan.nearest
    big_n = cfg.n_sectors
    i = np.arange(big_n)
    n = window_spans(z, cfg)
    if cfg.centered_window:
        lo, hi = i - n // 2, i + n // 2
    else:
        lo, hi = i, i + n
    lo = np.clip(lo, 0, big_n - 1)
    hi = np.clip(hi, 0, big_n - 1)
    inside = (i[None, :] >= lo[:, None]) & (i[None, :] <= hi[:, None])
    dist_award = np.where(inside, z[None, :], np.inf).min(axis=1)
    angle_award = 90.0 - cfg.theta * np.abs(i - big_n // 2)
    return cfg.award_angle_weight * angle_award + cfg.award_dist_weight * dist_award


def optimal_direction(scan: SectorScan, awards, cfg: DirectionConfig | None = None) -> DirectionDecision:
    cfg = cfg or scan.config
    awards = np.asarray(awards, dtype=np.float64)
    if awards.shape != (cfg.n_sectors,):
        raise ValueError("awards length must equal n_sectors")
    center = cfg.n_sectors // 2
    ties = np.flatnonzero(awards == awards.max())
    i_max = int(min(ties, key=lambda i: (abs(i - center), i)))
    award = float(awards[i_max])
    if scan.nearest[i_max] < cfg.tau:
        return DirectionDecision(Action.BLOCKED, i_max, award)
    gamma = cfg.theta * (i_max - center)
    if abs(gamma) <= cfg.straight_band:
        return DirectionDecision(Action.STRAIGHT, i_max, award, gamma)
    return DirectionDecision(Action.TURN, i_max, award, gamma)


def search_direction(cloud: PointCloud, ground: GroundResult, cfg: DirectionConfig, tz):
    """Walkable-point selection, sector scan, awards and decision in one call."""
    points = select_walkable_points(cloud, ground, cfg)
    scan = sector_nearest(points, cfg, tz)
    return optimal_direction(scan, sector_awards(scan, cfg), cfg), scan

