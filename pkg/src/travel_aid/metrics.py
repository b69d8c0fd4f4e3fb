"""Ground-detection scoring: intersection-over-sum and precision by distance band."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import CameraIntrinsics, reconstruct_pointcloud
from .ground import GroundConfig, GroundResult, GroundState, detect_ground

TEMPORAL = "temporal"
BASELINE = "ransac"
DEFAULT_BANDS = ((1.0, 1.5), (1.5, 2.0), (2.0, 2.5), (2.5, 3.0))
DEFAULT_THRESHOLDS = (0.2, 0.3, 0.4, 0.45)


def ground_iou(detected, truth) -> float:
    """``N_overlap / (N_detected + N_truth)``; identical masks score 0.5.

    Two empty masks score 0.
    """
    detected = np.asarray(detected, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if detected.shape != truth.shape:
        raise ValueError(f"mask shapes differ: {detected.shape} vs {truth.shape}")
    total = int(detected.sum()) + int(truth.sum())
    if total == 0:
        return 0.0
    return int((detected & truth).sum()) / total


def ground_pixel_mask(result: GroundResult, shape) -> np.ndarray:
    """Source pixels of the refined ground points (empty for non-ground frames)."""
    if not result.is_ground:
        return np.zeros(shape, dtype=bool)
    return result.refined.pixel_mask(*shape)


@dataclass
class GroundEvaluation:
    bands: tuple
    thresholds: tuple
    # precision[method][band_index][threshold_index]; None when no frame has truth in the band
    precision: dict = field(default_factory=dict)
    iou: dict = field(default_factory=dict)  # method -> per-frame full-frame IOU
    height: dict = field(default_factory=dict)  # method -> per-frame H (None when non-ground)

    def rows(self):
        for method, table in self.precision.items():
            for (lo, hi), values in zip(self.bands, table):
                yield method, lo, hi, values


def precision_table(detected, truth, depths, bands, thresholds):
    """Fraction of frames whose banded IOU reaches each threshold.

    Both masks are restricted to pixels whose depth lies in ``[lo, hi)``;
    frames without ground truth in a band do not count toward that band.
    """
    table = []
    for lo, hi in bands:
        scores = []
        for det, tru, depth in zip(detected, truth, depths):
            band = (depth >= lo) & (depth < hi)
            if not (tru & band).any():
                continue
            scores.append(ground_iou(det & band, tru & band))
        scores = np.asarray(scores)
        table.append([float((scores >= t).mean()) if len(scores) else None for t in thresholds])
    return table


def precision_curve(frames, truth_masks, k: CameraIntrinsics, cfg: GroundConfig,
                    bands=DEFAULT_BANDS, thresholds=DEFAULT_THRESHOLDS, seed=0) -> GroundEvaluation:
    """Run the temporal detector and the memoryless baseline over a sequence.

    ``frames`` yields ``(DepthFrame, Attitude)`` pairs in order; ``truth_masks``
    holds one boolean ground mask per frame.
    """
    detected = {TEMPORAL: [], BASELINE: []}
    heights = {TEMPORAL: [], BASELINE: []}
    depths = []
    state = GroundState()
    for depth, att in frames:
        cloud = reconstruct_pointcloud(depth, k, att)
        frame_seed = seed + depth.frame_index
        temporal, state = detect_ground(cloud, state, cfg, frame_seed)
        baseline, _ = detect_ground(cloud, GroundState(), cfg, frame_seed)
        for name, res in ((TEMPORAL, temporal), (BASELINE, baseline)):
            detected[name].append(ground_pixel_mask(res, depth.values.shape))
            heights[name].append(res.height_h)
        depths.append(depth.values)
    truth_masks = list(truth_masks)
    if len(truth_masks) != len(depths):
        raise ValueError(f"{len(depths)} frames but {len(truth_masks)} truth masks")
    report = GroundEvaluation(tuple(bands), tuple(thresholds))
    for name in detected:
        report.precision[name] = precision_table(detected[name], truth_masks, depths, bands, thresholds)
        report.iou[name] = [ground_iou(d, t) for d, t in zip(detected[name], truth_masks)]
        report.height[name] = heights[name]
    return report


def evaluate_dataset(dataset, cfg: GroundConfig, bands=DEFAULT_BANDS,
                     thresholds=DEFAULT_THRESHOLDS, seed=0) -> GroundEvaluation:
    truth = [dataset.truth_mask(f.frame_index) for f in dataset]
    frames = ((f.load_depth(), f.attitude) for f in dataset)
    return precision_curve(frames, truth, dataset.intrinsics, cfg, bands, thresholds, seed)


def format_evaluation(report: GroundEvaluation) -> str:
    head = "method    band (m)    " + "  ".join(f"IOU>={t:<5g}" for t in report.thresholds)
    lines = [head, "-" * len(head)]
    for method, lo, hi, values in report.rows():
        cells = "  ".join(f"{'n/a':>9}" if v is None else f"{v:9.3f}" for v in values)
        lines.append(f"{method:<9} {lo:4.1f}-{hi:<4.1f}    {cells}")
    return "\n".join(lines)

