"""Per-stage latency benchmark."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import PipelineConfig
from .pipeline import ACQUISITION, DETECTION, DIRECTION, GROUND, run_pipeline

TOTAL = "total"
ROWS = (
    (ACQUISITION, "RGB and Depth images acquisition", 0.66),
    (GROUND, "Ground detection", 13.53),
    (DIRECTION, "Optimal walkable direction search", 7.19),
    (DETECTION, "2.5-D Object detection", 114.13),
    (TOTAL, "Total (except 2.5-D object detection)", 22.17),
)
FOOTNOTE = ("* two reference totals are in circulation, 22.17 ms (shown) and 27.17 ms; "
            "neither equals the 21.38 ms sum of the reference rows above")


@dataclass
class StageStats:
    key: str
    label: str
    reference_ms: float
    n: int
    mean_ms: float | None = None
    median_ms: float | None = None
    p95_ms: float | None = None


@dataclass
class BenchReport:
    repetitions: int
    n_frames: int
    resolution: tuple
    triggers: tuple
    rows: list = field(default_factory=list)
    # non-timing outcome of every repetition; identical across repetitions and runs
    events: list = field(default_factory=list)

    def row(self, key) -> StageStats:
        return next(r for r in self.rows if r.key == key)


def _stats(samples_s):
    ms = np.asarray(samples_s, dtype=np.float64) * 1e3
    return float(ms.mean()), float(np.median(ms)), float(np.percentile(ms, 95))


def benchmark(dataset, config: PipelineConfig | None = None, repetitions=3, triggers=None,
              timing=True, clock=time.perf_counter) -> BenchReport:
    """Time each stage over ``repetitions`` passes of the dataset.

    The detection stage is measured only on trigger frames (default:
    ``config.triggers``, or every frame when the config lists none). The
    total row sums acquisition, ground and direction per frame. With
    ``timing=False`` the statistics are left empty.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    config = config or PipelineConfig()
    if triggers is None:
        triggers = config.triggers or tuple(f.frame_index for f in dataset)
    triggers = tuple(sorted(set(triggers)))
    samples = {key: [] for key, _, _ in ROWS}
    events = None
    for _ in range(repetitions):
        run = run_pipeline(dataset, config, triggers=triggers, clock=clock)
        records = [ev.to_record() for ev in run.events]
        if events is None:
            events = records
        for t in run.timings:
            for key in (ACQUISITION, GROUND, DIRECTION, DETECTION):
                if key in t:
                    samples[key].append(t[key])
            samples[TOTAL].append(t[ACQUISITION] + t[GROUND] + t[DIRECTION])
    k = dataset.intrinsics
    report = BenchReport(repetitions, len(dataset), (k.width, k.height), triggers, events=events)
    for key, label, ref in ROWS:
        row = StageStats(key, label, ref, len(samples[key]))
        if timing and samples[key]:
            row.mean_ms, row.median_ms, row.p95_ms = _stats(samples[key])
        report.rows.append(row)
    return report


def format_report(report: BenchReport) -> str:
    def cell(v):
        return f"{'n/a':>9}" if v is None else f"{v:9.2f}"

    w, h = report.resolution
    lines = [f"{report.n_frames} frames at {w}x{h}, {report.repetitions} repetition(s), "
             f"{len(report.triggers)} detection frame(s)",
             f"{'stage':<40}{'n':>6}{'mean ms':>10}{'median ms':>10}{'p95 ms':>10}{'ref ms':>10}"]
    lines.append("-" * len(lines[1]))
    for r in report.rows:
        star = "*" if r.key == TOTAL else " "
        lines.append(f"{r.label:<40}{r.n:>6} {cell(r.mean_ms)} {cell(r.median_ms)} "
                     f"{cell(r.p95_ms)} {r.reference_ms:8.2f}{star}")
    lines.append(FOOTNOTE)
    return "\n".join(lines)
