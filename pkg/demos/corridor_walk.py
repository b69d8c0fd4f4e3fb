"""Walk down a corridor toward a box and print the feedback stream.

The walker receives turn hints while the box is far, then a continuous
beep once the gaps beside the box are too narrow to pass.

    python3 demos/corridor_walk.py [OUTPUT_DIR]
"""
import sys
import tempfile
from pathlib import Path

from travel_aid import Dataset, PipelineConfig, run_pipeline
from travel_aid.synth import corridor_scene, generate_synthetic_scene


def main(out_dir):
    root = generate_synthetic_scene(corridor_scene(), Path(out_dir) / "corridor", seed=0)
    report = run_pipeline(Dataset(root), PipelineConfig())
    print(f"{report.n_frames} frames, ground found in {report.n_ground}")
    for ev in report.events:
        print(f"frame {ev.frame_index:3d}  {ev.kind.value:<10} {ev.payload}")


if __name__ == "__main__":
    if len(sys.argv) > 1:
        main(sys.argv[1])
    else:
        with tempfile.TemporaryDirectory() as tmp:
            main(tmp)
