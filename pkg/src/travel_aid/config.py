"""INI configuration holding every tunable threshold.

Sections and keys (defaults shown by ``default_config_text()``)::

    [ground]     lambda, mu, tz, sigma, slope_min, slope_max, ransac_iters,
                 ransac_inlier_tol, otsu_bins, min_ground_points, height_margin,
                 ransac_score_points
    [direction]  theta, n_sectors, w_sw, epsilon, alpha, beta, tau,
                 straight_band, centered_window, floor_clearance
    [fusion]     min_contour_area, zeta, close_kernel, direction_band
    [pipeline]   seed, triggers
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .direction import DirectionConfig
from .errors import ConfigError
from .fusion import FusionConfig
from .ground import GroundConfig

# file key -> dataclass field, where they differ
_RENAMES = {
    "ground": {"lambda": "lam"},
    "direction": {"alpha": "award_angle_weight", "beta": "award_dist_weight"},
    "fusion": {},
}
_SECTIONS = {"ground": GroundConfig, "direction": DirectionConfig, "fusion": FusionConfig}


@dataclass(frozen=True)
class PipelineConfig:
    ground: GroundConfig = field(default_factory=GroundConfig)
    direction: DirectionConfig = field(default_factory=DirectionConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    seed: int = 0
    triggers: tuple = ()  # frame indices where 2.5-D detection runs


def _convert(section, key, raw, default):
    try:
        if isinstance(default, bool):
            return {"true": True, "yes": True, "1": True, "on": True,
                    "false": False, "no": False, "0": False, "off": False}[raw.strip().lower()]
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except (KeyError, ValueError):
        raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r}") from None
    return raw


def _build(section, cls, items):
    renames = _RENAMES[section]
    defaults = {f.name: f.default for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, raw in items:
        name = renames.get(key, key)
        if name not in defaults or name in renames.values() and key not in renames:
            raise ConfigError(f"{section}.{key}", "unknown key")
        kwargs[name] = _convert(section, key, raw, defaults[name])
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        inverse = {v: k for k, v in renames.items()}
        key = inverse.get(exc.key, exc.key)
        raise ConfigError(f"{section}.{key}", str(exc).split(": ", 1)[-1]) from None


def parse_config(text) -> PipelineConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("config", str(exc).splitlines()[0]) from None
    built = {}
    for section in parser.sections():
        if section == "pipeline":
            continue
        if section not in _SECTIONS:
            raise ConfigError(section, "unknown section")
        built[section] = _build(section, _SECTIONS[section], parser.items(section))
    seed, triggers = 0, ()
    if parser.has_section("pipeline"):
        for key, raw in parser.items("pipeline"):
            if key == "seed":
                seed = _convert("pipeline", key, raw, 0)
            elif key == "triggers":
                try:
                    triggers = tuple(sorted({int(v) for v in raw.replace(",", " ").split()}))
                except ValueError:
                    raise ConfigError("pipeline.triggers", f"cannot parse {raw!r}") from None
            else:
                raise ConfigError(f"pipeline.{key}", "unknown key")
    return PipelineConfig(seed=seed, triggers=triggers, **built)


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


def default_config_text(cfg: PipelineConfig | None = None) -> str:
    cfg = cfg or PipelineConfig()
    out = []
    for section, cls in _SECTIONS.items():
        inverse = {v: k for k, v in _RENAMES[section].items()}
        obj = getattr(cfg, section)
        out.append(f"[{section}]")
        for f in dataclasses.fields(cls):
            value = getattr(obj, f.name)
            out.append(f"{inverse.get(f.name, f.name)} = {str(value).lower() if isinstance(value, bool) else value}")
        out.append("")
    out.append("[pipeline]")
    out.append(f"seed = {cfg.seed}")
    out.append(f"triggers = {', '.join(str(t) for t in cfg.triggers)}")
    return "\n".join(out) + "\n"
