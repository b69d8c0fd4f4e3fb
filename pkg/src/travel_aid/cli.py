"""Command-line entry point.

Exit codes: 0 success, 1 validation error (bad arguments, config, dataset
or scene), 2 runtime failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .bench import benchmark, format_report
from .config import PipelineConfig, default_config_text, load_config
from .dataset import Dataset, DatasetError
from .detector import RemoteSource, ReplaySource
from .errors import ConfigError, DetectionFormatError, SceneError
from .metrics import DEFAULT_BANDS, DEFAULT_THRESHOLDS, evaluate_dataset, format_evaluation
from .pipeline import run_pipeline
from .synth import PRESETS, SceneSpec, generate_synthetic_scene

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
_VALIDATION = (ConfigError, DatasetError, DetectionFormatError, SceneError)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _config(args) -> PipelineConfig:
    return load_config(args.config) if args.config else PipelineConfig()


def _triggers(text):
    try:
        return tuple(sorted({int(v) for v in text.replace(",", " ").split()}))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad frame list {text!r}") from None


def _cmd_run(args):
    cfg = _config(args)
    dataset = Dataset(args.dataset)
    if args.detector_url:
        source = RemoteSource(args.detector_url, args.timeout_ms)
    elif args.detections:
        source = ReplaySource(Path(args.detections))
    else:
        source = None
    report = run_pipeline(dataset, cfg, source, args.output, args.trigger, timing=not args.no_timing)
    print(f"{report.n_frames} frames, {report.n_ground} with ground, "
          f"{len(report.events)} events -> {args.output}")


def _cmd_bench(args):
    report = benchmark(Dataset(args.dataset), _config(args), args.repetitions, args.trigger,
                       timing=not args.no_timing)
    if args.json:
        print(json.dumps({"n_frames": report.n_frames, "repetitions": report.repetitions,
                          "resolution": list(report.resolution),
                          "rows": [dataclasses.asdict(r) for r in report.rows]}, indent=1))
    else:
        print(format_report(report))


def _cmd_eval(args):
    cfg = _config(args)
    report = evaluate_dataset(Dataset(args.dataset), cfg.ground, DEFAULT_BANDS,
                              args.thresholds or DEFAULT_THRESHOLDS, cfg.seed)
    if args.json:
        print(json.dumps({"bands": report.bands, "thresholds": report.thresholds,
                          "precision": report.precision, "iou": report.iou}, indent=1))
    else:
        print(format_evaluation(report))


def _scene(name_or_path, frames):
    if name_or_path in PRESETS:
        spec = PRESETS[name_or_path]()
    else:
        path = Path(name_or_path)
        if not path.exists():
            raise SceneError(f"{name_or_path!r} is neither a preset ({', '.join(PRESETS)}) nor a file")
        try:
            spec = SceneSpec.from_dict(json.loads(path.read_text()))
        except (json.JSONDecodeError, TypeError) as exc:
            raise SceneError(f"{path}: {exc}") from None
    if frames is not None:
        d = spec.to_dict()
        d["n_frames"] = frames
        for key in ("pitch_deg", "roll_deg"):
            if len(d[key]) > 1:
                d[key] = (d[key] + [d[key][-1]] * frames)[:frames]
        spec = SceneSpec.from_dict(d)
    return spec


def _cmd_synth(args):
    spec = _scene(args.scene, args.frames)
    out = generate_synthetic_scene(spec, args.output, args.seed)
    print(f"wrote {spec.n_frames} frames to {out}")


def build_parser():
    p = _Parser(prog="travel-aid", description="RGB-D navigation pipeline tools.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress and warnings")
    p.add_argument("--print-default-config", action="store_true",
                   help="print the default configuration file and exit")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    run = sub.add_parser("run", help="process a dataset and write the event stream")
    run.add_argument("dataset")
    run.add_argument("-o", "--output", required=True, help="event stream path (one JSON record per line)")
    run.add_argument("-c", "--config")
    run.add_argument("--trigger", type=_triggers, help="frames where object fusion runs, e.g. '10,40'")
    src = run.add_mutually_exclusive_group()
    src.add_argument("--detections", help="replay file (defaults to the dataset's detections.ndrec)")
    src.add_argument("--detector-url", help="remote detector endpoint")
    run.add_argument("--timeout-ms", type=float, default=2000.0)
    run.add_argument("--no-timing", action="store_true", help="omit elapsed_us fields")
    run.set_defaults(func=_cmd_run)

    bench = sub.add_parser("bench", help="per-stage latency table")
    bench.add_argument("dataset")
    bench.add_argument("-c", "--config")
    bench.add_argument("-n", "--repetitions", type=int, default=3)
    bench.add_argument("--trigger", type=_triggers, help="frames where detection is timed (default all)")
    bench.add_argument("--no-timing", action="store_true")
    bench.add_argument("--json", action="store_true")
    bench.set_defaults(func=_cmd_bench)

    ev = sub.add_parser("eval-ground", help="ground precision by distance band")
    ev.add_argument("dataset")
    ev.add_argument("-c", "--config")
    ev.add_argument("--thresholds", type=float, nargs="+")
    ev.add_argument("--json", action="store_true")
    ev.set_defaults(func=_cmd_eval)

    syn = sub.add_parser("synth", help="render a synthetic dataset")
    syn.add_argument("scene", help=f"preset ({', '.join(PRESETS)}) or a JSON scene file")
    syn.add_argument("output")
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--frames", type=int, help="override the frame count")
    syn.set_defaults(func=_cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.print_default_config:
        sys.stdout.write(default_config_text())
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_INVALID
    try:
        args.func(args)
    except _VALIDATION as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime exit code
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
