"""Compare the temporal ground detector with a memoryless RANSAC baseline.

The camera tilts up from the floor toward a table top. Without height
memory the per-frame fit locks onto the table; with it the floor is kept.

    python3 demos/table_distractor.py
"""
import numpy as np

from travel_aid.geometry import DepthFrame
from travel_aid.ground import GroundConfig
from travel_aid.metrics import BASELINE, TEMPORAL, format_evaluation, precision_curve
from travel_aid.synth import render_sequence, table_distractor_scene


def main():
    spec = table_distractor_scene()
    frames = list(render_sequence(spec, seed=0))
    report = precision_curve(((DepthFrame(f.depth, f.index), f.attitude) for f in frames),
                             [f.ground_mask for f in frames], spec.intrinsics, GroundConfig())
    for name in (TEMPORAL, BASELINE):
        h = np.array([np.nan if v is None else v for v in report.height[name]])
        err = np.abs(h - spec.ground_height)
        print(f"{name:<9} median height error {100 * np.nanmedian(err):6.2f} cm, "
              f"frames off by more than 10 cm: {int(np.sum(~(err <= 0.1)))}")
    print()
    print(format_evaluation(report))


if __name__ == "__main__":
    main()
