import json
import math
from itertools import count

import pytest

from travel_aid.bench import ROWS, TOTAL, benchmark, format_report
from travel_aid.config import PipelineConfig, default_config_text, load_config, parse_config
from travel_aid.dataset import Dataset
from travel_aid.detector import RemoteSource
from travel_aid.errors import ConfigError
from travel_aid.feedback import CANNOT_MOVE_ON, EventKind
from travel_aid.pipeline import DETECTION, Navigator, run_pipeline
from travel_aid.synth import Box, SceneSpec, generate_synthetic_scene, ramp_scene


@pytest.fixture(scope="module")
def chair_dataset(tmp_path_factory):
    chair = Box((-0.25, -1.5, 2.0), (0.25, -1.0, 2.4), label="chair")
    spec = SceneSpec(pitch_deg=(25.0,), obstacles=(chair,), n_frames=41, noise_sigma=0.003)
    return generate_synthetic_scene(spec, tmp_path_factory.mktemp("chair") / "ds", seed=1)


def _chair_depth():
    # optical-axis depth of the nearest chair corner (top front edge) at 25 deg pitch
    p = math.radians(25.0)
    return -math.sin(p) * -1.0 + math.cos(p) * 2.0


def _records(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


def test_config_defaults_round_trip():
    assert parse_config(default_config_text()) == PipelineConfig()


def test_config_overrides(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[ground]\nlambda = 0.7\nmu = 0.3\n[direction]\nbeta = 10\ncentered_window = yes\n"
                    "[pipeline]\nseed = 3\ntriggers = 4, 2 9\n")
    cfg = load_config(path)
    assert cfg.ground.lam == 0.7 and cfg.direction.award_dist_weight == 10.0
    assert cfg.direction.centered_window is True
    assert cfg.seed == 3 and cfg.triggers == (2, 4, 9)


@pytest.mark.parametrize("text, key", [
    ("[ground]\nlambda = 0.7\n", "ground.lambda"),
    ("[ground]\nlam = 0.7\n", "ground.lam"),
    ("[direction]\nwidth = 2\n", "direction.width"),
    ("[direction]\ntau = soon\n", "direction.tau"),
    ("[fusion]\nzeta = 1.5\n", "fusion.zeta"),
    ("[pipeline]\ntriggers = a\n", "pipeline.triggers"),
    ("[camera]\nfx = 1\n", "camera"),
])
def test_config_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.key == key and str(err.value).startswith(key)


def test_corridor_beeps_after_turning(corridor_dataset, tmp_path):
    out = tmp_path / "events.jsonl"
    report = run_pipeline(Dataset(corridor_dataset), PipelineConfig(), output_path=out)
    recs = _records(out)
    assert report.n_frames == 80
    kinds = [r["kind"] for r in recs]
    start = kinds.index("beep_start")
    assert any(r["payload"].startswith("turn ") for r in recs[:start])
    assert recs[start + 1]["payload"] == "search left or right"
    # the box front sits at z = 4.0; the walker stops short of it
    assert 4.0 - 0.045 * recs[start]["frame"] > 0.3
    assert all("elapsed_us" in r and set(r) >= {"frame", "kind", "payload"} for r in recs)


def test_trigger_speaks_on_that_frame(chair_dataset, tmp_path):
    out = tmp_path / "events.jsonl"
    run_pipeline(Dataset(chair_dataset), PipelineConfig(triggers=(40,)), output_path=out)
    speech = [r for r in _records(out) if r["kind"] == "speech"]
    assert speech and all(r["frame"] == 40 for r in speech)
    assert speech[0]["payload"].startswith(f"chair, {_chair_depth():.1f} meters, front")
    assert DETECTION in speech[0]["elapsed_us"]


def test_ramp_cannot_move_on(tmp_path):
    root = generate_synthetic_scene(ramp_scene(30.0, n_frames=4), tmp_path / "ramp")
    out = tmp_path / "events.jsonl"
    report = run_pipeline(Dataset(root), output_path=out)
    recs = _records(out)
    assert report.n_ground == 0
    assert [(r["frame"], r["kind"], r["payload"]) for r in recs] == [
        (i, "turn_hint", CANNOT_MOVE_ON) for i in range(4)]


def test_replay_is_deterministic(chair_dataset, tmp_path):
    cfg = PipelineConfig(triggers=(3, 40))
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    run_pipeline(Dataset(chair_dataset), cfg, output_path=a, timing=False)
    run_pipeline(Dataset(chair_dataset), cfg, output_path=b, timing=False)
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.jsonl"
    run_pipeline(Dataset(chair_dataset), cfg, output_path=c)
    strip = [{k: v for k, v in r.items() if k != "elapsed_us"} for r in _records(c)]
    assert strip == _records(a)


def test_detector_failure_is_not_fatal(chair_dataset, tmp_path):
    source = RemoteSource("http://127.0.0.1:9/detect", timeout_ms=200, retries=0)
    report = run_pipeline(Dataset(chair_dataset), PipelineConfig(), source, triggers=(40,))
    speech = [e for e in report.events if e.kind is EventKind.SPEECH]
    assert speech and speech[0].payload.startswith(f"obstacle, {_chair_depth():.1f} meters")


def test_navigator_uses_injected_clock(chair_dataset):
    ds = Dataset(chair_dataset)
    ticks = count()
    nav = Navigator(ds.intrinsics, clock=lambda: float(next(ticks)))
    frame = ds.frames[0]
    out = nav.process(frame.load_depth(), frame.attitude, trigger=True)
    assert out.timings == {"ground": 1.0, "direction": 1.0, "detection": 1.0}
    assert out.decision is not None and out.objects is not None


def test_bench_rows_and_determinism(chair_dataset):
    ds = Dataset(chair_dataset)
    a = benchmark(ds, repetitions=1, triggers=(0, 40), timing=False)
    b = benchmark(ds, repetitions=1, triggers=(0, 40), timing=False)
    assert [r.label for r in a.rows] == [label for _, label, _ in ROWS]
    assert a == b
    assert a.row(DETECTION).n == 2 and a.row(TOTAL).n == 41
    text = format_report(a)
    assert "Total (except 2.5-D object detection)" in text and "27.17" in text
    for ref in ("0.66", "13.53", "7.19", "114.13", "22.17"):
        assert ref in text


def test_bench_total_is_stage_sum(chair_dataset):
    ds = Dataset(chair_dataset)
    ticks = count()
    report = benchmark(ds, repetitions=2, triggers=(), clock=lambda: float(next(ticks)))
    # every clock read advances one second: acquisition, ground and direction take 1 s each
    assert report.row(TOTAL).mean_ms == 3000.0
    assert report.row(DETECTION).n == 0 and report.row(DETECTION).mean_ms is None
