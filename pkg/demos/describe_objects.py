"""Ask for a scene description in front of a chair.

Trigger frame 0 replays the synthetic detections; the chair gets a
category, distance and bearing. A second pass without detections shows
the unlabeled fallback.

    python3 demos/describe_objects.py
"""
import tempfile
from pathlib import Path

from travel_aid import Dataset, PipelineConfig, run_pipeline
from travel_aid.detector import ReplaySource
from travel_aid.synth import Box, SceneSpec, generate_synthetic_scene


def main():
    chair = Box((0.2, -1.5, 2.0), (0.7, -1.0, 2.4), label="chair")
    spec = SceneSpec(pitch_deg=(25.0,), obstacles=(chair,), noise_sigma=0.003)
    with tempfile.TemporaryDirectory() as tmp:
        root = generate_synthetic_scene(spec, Path(tmp) / "chair", seed=1)
        ds = Dataset(root)
        cfg = PipelineConfig(triggers=(0,))
        for title, source in (("with detections", None),
                              ("without detections", ReplaySource(_empty(Path(tmp))))):
            report = run_pipeline(ds, cfg, source)
            print(title + ":")
            for ev in report.events:
                print(f"  {ev.kind.value:<10} {ev.payload}")


def _empty(tmp):
    path = tmp / "none.ndrec"
    path.write_text("")
    return path


if __name__ == "__main__":
    main()
