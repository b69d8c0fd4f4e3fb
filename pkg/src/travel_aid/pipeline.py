"""Per-frame driver: ground detection, direction search, feedback and on-demand fusion."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from .config import PipelineConfig
from .detector import DetectionProvider, ReplaySource
from .direction import search_direction
from .errors import DetectorError, FusionError
from .feedback import (EventKind, FeedbackEvent, FeedbackState, describe_objects,
                       navigation_feedback, no_ground_feedback)
from .fusion import (Extrinsics, close_and_extract_contours, fuse_detections,
                     map_detection_to_depth, remove_ground)
from .geometry import Attitude, CameraIntrinsics, DepthFrame, RgbFrame, reconstruct_pointcloud
from .ground import GroundState, detect_ground

logger = logging.getLogger(__name__)

ACQUISITION = "acquisition"
GROUND = "ground"
DIRECTION = "direction"
DETECTION = "detection"
STAGES = (ACQUISITION, GROUND, DIRECTION, DETECTION)
NO_GROUND_SPEECH = "ground not detected"


@dataclass
class FrameOutput:
    frame_index: int
    ground: object
    decision: object = None  # None on non-ground frames
    events: list = field(default_factory=list)
    objects: list | None = None  # set only on triggered frames
    timings: dict = field(default_factory=dict)  # stage -> seconds


class Navigator:
    """Holds the cross-frame state (ground height memory, beep flag).

    Frames must be fed in order. ``clock`` returns seconds and is injectable
    so tests can make timings deterministic.
    """

    def __init__(self, k: CameraIntrinsics, config: PipelineConfig | None = None,
                 extrinsics: Extrinsics | None = None, clock=time.perf_counter):
        self.k = k
        self.config = config or PipelineConfig()
        self.extrinsics = extrinsics or Extrinsics()
        self.clock = clock
        self.ground_state = GroundState()
        self.feedback_state = FeedbackState()

    def process(self, depth: DepthFrame, att: Attitude, timestamp=0.0, rgb: RgbFrame | None = None,
                detections=None, trigger=False) -> FrameOutput:
        cfg = self.config
        idx = depth.frame_index
        out = FrameOutput(idx, None)
        t0 = self.clock()
        cloud = reconstruct_pointcloud(depth, self.k, att)
        ground, self.ground_state = detect_ground(cloud, self.ground_state, cfg.ground,
                                                  cfg.seed + idx)
        t1 = self.clock()
        out.ground = ground
        out.timings[GROUND] = t1 - t0
        if ground.is_ground:
            out.decision, _ = search_direction(cloud, ground, cfg.direction, cfg.ground.tz)
            out.events, self.feedback_state = navigation_feedback(
                out.decision, self.feedback_state, idx, timestamp)
        else:
            out.events, self.feedback_state = no_ground_feedback(self.feedback_state, idx, timestamp)
        out.timings[DIRECTION] = self.clock() - t1
        if trigger:
            t2 = self.clock()
            out.events = out.events + self._describe(depth, att, ground, rgb, detections or [],
                                                     timestamp, out)
            out.timings[DETECTION] = self.clock() - t2
        return out

    def _describe(self, depth, att, ground, rgb, detections, timestamp, out):
        cfg = self.config
        if not ground.is_ground:
            out.objects = []
            return [FeedbackEvent(depth.frame_index, EventKind.SPEECH, NO_GROUND_SPEECH, timestamp)]
        mask = remove_ground(depth, ground, self.k, att, cfg.ground.sigma)
        contours = close_and_extract_contours(mask, cfg.fusion, depth,
                                              cfg.fusion.area_for(depth.width, depth.height))
        k_rgb = self.k
        if rgb is not None and (rgb.width, rgb.height) != (self.k.width, self.k.height):
            k_rgb = self.k.scaled(rgb.width, rgb.height)
        regions = []
        for det in detections:
            try:
                regions.append((det, map_detection_to_depth(det, self.extrinsics, k_rgb, self.k, depth)))
            except FusionError as exc:
                logger.warning("frame %d: %s", depth.frame_index, exc)
        out.objects = fuse_detections(regions, contours, depth, cfg.fusion, self.k)
        return describe_objects(out.objects, depth.frame_index, timestamp, cfg.fusion.direction_band)


def event_record(event: FeedbackEvent, timestamp_us, timings=None):
    """One output line: frame, kind, payload, timestamp and per-stage microseconds."""
    rec = {"frame": event.frame_index, "kind": event.kind.value, "payload": event.payload,
           "timestamp_us": int(timestamp_us)}
    if timings is not None:
        rec["elapsed_us"] = {k: int(round(v * 1e6)) for k, v in timings.items()}
    return rec


@dataclass
class RunReport:
    n_frames: int = 0
    n_ground: int = 0
    events: list = field(default_factory=list)
    timings: list = field(default_factory=list)  # per frame: stage -> seconds


def _provider(dataset, source):
    if source is None:
        if not dataset.detections_path.exists():
            return None
        source = ReplaySource(dataset.detections_path)
    if isinstance(source, ReplaySource) and source.frame_size is None:
        k = dataset.intrinsics
        source = ReplaySource(source.path, (k.width, k.height))
    return DetectionProvider(source)


def run_pipeline(dataset, config: PipelineConfig | None = None, source=None, output_path=None,
                 triggers=None, clock=time.perf_counter, timing=True) -> RunReport:
    """Process every frame of ``dataset`` in order and stream events.

    ``triggers`` (default: ``config.triggers``) lists the frames where object
    fusion and speech run. ``source`` is a replay or remote detection source;
    by default the dataset's own detection file is replayed when present.
    Detector failures are logged and the frame proceeds without detections.
    With ``timing=False`` the ``elapsed_us`` field is omitted so that two runs
    produce identical files.
    """
    config = config or PipelineConfig()
    triggers = set(config.triggers if triggers is None else triggers)
    provider = _provider(dataset, source) if triggers else None
    nav = Navigator(dataset.intrinsics, config, dataset.extrinsics, clock)
    report = RunReport()
    fh = Path(output_path).open("w") if output_path is not None else None
    try:
        for frame in dataset:
            t0 = clock()
            depth = frame.load_depth()
            rgb = frame.load_rgb()
            acquisition = clock() - t0
            trigger = frame.frame_index in triggers
            detections = []
            if trigger and provider is not None:
                try:
                    detections = provider.detections_for(rgb)
                except DetectorError as exc:
                    logger.warning("frame %d: detector failed: %s", frame.frame_index, exc)
            out = nav.process(depth, frame.attitude, frame.timestamp_us * 1e-6, rgb, detections, trigger)
            out.timings = {ACQUISITION: acquisition, **out.timings}
            report.n_frames += 1
            report.n_ground += bool(out.ground.is_ground)
            report.timings.append(out.timings)
            report.events.extend(out.events)
            if fh is not None:
                for ev in out.events:
                    rec = event_record(ev, frame.timestamp_us, out.timings if timing else None)
                    fh.write(json.dumps(rec) + "\n")
    finally:
        if fh is not None:
            fh.close()
    return report
