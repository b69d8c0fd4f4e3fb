"""Sources of 2-D detections: line-delimited replay files and a remote HTTP detector.

Record format, one JSON object per line::

    {"frame": 3, "label": "chair", "score": 0.91, "bbox": [100, 120, 60, 140]}

``bbox`` is ``[x, y, w, h]`` in RGB pixels. Blank lines are ignored.

The remote detector receives ``POST`` requests whose body is the PNG-encoded
RGB frame and whose ``X-Frame-Index`` header carries the frame index; it
answers with records in the same format (``frame`` optional).
"""
from __future__ import annotations

import json
import logging
import socket
import urllib.error
import urllib.request
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .errors import (DetectionFormatError, DetectorTimeout, DetectorTransportError,
                     MalformedResponse)
from .fusion import Detection2D
from .geometry import RgbFrame

logger = logging.getLogger(__name__)

FRAME_HEADER = "X-Frame-Index"


@dataclass(frozen=True)
class ReplaySource:
    path: Path
    frame_size: tuple | None = None  # (width, height) used for bbox clipping


@dataclass(frozen=True)
class RemoteSource:
    url: str
    timeout_ms: float = 2000.0
    retries: int = 1

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be > 0")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


def _clip_bbox(bbox, frame_size):
    x, y, w, h = bbox
    width, height = frame_size
    x0, y0 = max(0, x), max(0, y)
    x1, y1 = min(width, x + w), min(height, y + h)
    return (x0, y0, x1 - x0, y1 - y0)


def parse_record(obj, line=None, strict=False):
    """Turn one decoded record into ``(frame, label, score, bbox)``.

    With ``strict`` an out-of-range score is an error; otherwise it is clamped.
    """
    if not isinstance(obj, dict):
        raise DetectionFormatError("record must be an object", line)
    try:
        frame = obj.get("frame")
        label = obj["label"]
        score = obj["score"]
        bbox = obj["bbox"]
    except KeyError as exc:
        raise DetectionFormatError(f"missing field {exc.args[0]!r}", line) from None
    if frame is not None and (not isinstance(frame, int) or isinstance(frame, bool) or frame < 0):
        raise DetectionFormatError("frame must be a non-negative integer", line)
    if not isinstance(label, str) or not label:
        raise DetectionFormatError("label must be a non-empty string", line)
    if not isinstance(score, (int, float)) or isinstance(score, bool) or not np.isfinite(score):
        raise DetectionFormatError("score must be a number", line)
    if (not isinstance(bbox, list) or len(bbox) != 4
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in bbox)):
        raise DetectionFormatError("bbox must be 4 integers [x, y, w, h]", line)
    if bbox[2] <= 0 or bbox[3] <= 0:
        raise DetectionFormatError("bbox width and height must be positive", line)
    if not 0.0 <= score <= 1.0:
        if strict:
            raise DetectionFormatError(f"score {score} outside [0, 1]", line)
        score = min(max(score, 0.0), 1.0)
    return frame, label, float(score), tuple(bbox)


def load_detections(path, frame_size=None) -> dict:
    """Group the records of a replay file by frame index.

    Scores are clamped to [0, 1]; boxes are clipped to ``frame_size`` when
    given, and boxes left empty by clipping are dropped.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    grouped = defaultdict(list)
    with path.open() as fh:
        for lineno, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise DetectionFormatError(f"invalid JSON: {exc.msg}", lineno) from None
            frame, label, score, bbox = parse_record(obj, lineno)
            if frame is None:
                raise DetectionFormatError("missing field 'frame'", lineno)
            if frame_size is not None:
                clipped = _clip_bbox(bbox, frame_size)
                if clipped != bbox:
                    logger.warning("line %d: bbox %s clipped to %s", lineno, bbox, clipped)
                if clipped[2] <= 0 or clipped[3] <= 0:
                    logger.warning("line %d: bbox lies outside the frame; dropped", lineno)
                    continue
                bbox = clipped
            grouped[frame].append(Detection2D(label, score, bbox, frame))
    return dict(grouped)


def dump_detections(detections, path):
    """Write detections in the replay format, ordered by frame."""
    with Path(path).open("w") as fh:
        for det in sorted(detections, key=lambda d: d.frame_index):
            fh.write(json.dumps({"frame": det.frame_index, "label": det.label,
                                 "score": det.score, "bbox": list(det.bbox)}) + "\n")


def encode_rgb(rgb: RgbFrame) -> bytes:
    ok, buf = cv2.imencode(".png", cv2.cvtColor(np.ascontiguousarray(rgb.pixels, dtype=np.uint8),
                                                cv2.COLOR_RGB2BGR))
    if not ok:
        raise ValueError("PNG encoding failed")
    return buf.tobytes()


def parse_response(body: bytes, frame_index, frame_size=None) -> list:
    try:
        lines = body.decode("utf-8").splitlines()
    except UnicodeDecodeError:
        raise MalformedResponse("response is not UTF-8") from None
    detections = []
    for lineno, text in enumerate(lines, start=1):
        if not text.strip():
            continue
        try:
            frame, label, score, bbox = parse_record(json.loads(text), lineno, strict=True)
        except (json.JSONDecodeError, DetectionFormatError) as exc:
            raise MalformedResponse(f"line {lineno}: {exc}") from None
        if frame is not None and frame != frame_index:
            raise MalformedResponse(f"line {lineno}: frame {frame} does not match request {frame_index}")
        if frame_size is not None:
            bbox = _clip_bbox(bbox, frame_size)
            if bbox[2] <= 0 or bbox[3] <= 0:
                continue
        detections.append(Detection2D(label, score, bbox, frame_index))
    return detections


def query_remote_detector(rgb: RgbFrame, source: RemoteSource) -> list:
    """One request/response round trip; retries on timeouts and transport failures.

    Either the whole detection list is returned or an exception is raised.
    """
    body = encode_rgb(rgb)
    attempts = source.retries + 1
    last = None
    for attempt in range(attempts):
        request = urllib.request.Request(
            source.url, data=body, method="POST",
            headers={"Content-Type": "image/png", FRAME_HEADER: str(rgb.frame_index)})
        try:
            with urllib.request.urlopen(request, timeout=source.timeout_ms / 1000.0) as resp:
                payload = resp.read()
        except (socket.timeout, TimeoutError):
            last = DetectorTimeout(f"no response within {source.timeout_ms} ms")
            logger.info("attempt %d/%d timed out", attempt + 1, attempts)
            continue
        except urllib.error.HTTPError as exc:
            last = DetectorTransportError(f"HTTP {exc.code}")
            continue
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, (socket.timeout, TimeoutError)):
                last = DetectorTimeout(f"no response within {source.timeout_ms} ms")
            else:
                last = DetectorTransportError(str(exc.reason))
            continue
        except OSError as exc:
            last = DetectorTransportError(str(exc))
            continue
        return parse_response(payload, rgb.frame_index, (rgb.width, rgb.height))
    raise last


class DetectionProvider:
    """Uniform per-frame access to either source variant."""

    def __init__(self, source):
        self.source = source
        self._replay = None
        if isinstance(source, ReplaySource):
            self._replay = load_detections(source.path, source.frame_size)

    def detections_for(self, rgb: RgbFrame) -> list:
        if self._replay is not None:
            return list(self._replay.get(rgb.frame_index, []))
        return query_remote_detector(rgb, self.source)
