"""Command-line frontend.

Subcommands: ``segment`` (run the pipeline on a scan), ``eval`` (score
predictions against ground truth), ``accumulate`` (build voxelized partial
maps from pose-aligned scans), ``sweep`` (parameter-sensitivity harness)
and ``synth`` (materialize synthetic scenes).

Exit codes: 0 ok, 2 input/config error, 3 data-consistency error,
4 internal pipeline failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import io as dio
from .config import TgfConfig
from .errors import (
    ConfigError,
    CountMismatchError,
    LengthMismatchError,
    MalformedFileError,
    PoseParseError,
    SequenceLengthMismatchError,
    TriFieldError,
)
from .metrics import AmbiguousPolicy, confusion, metrics
from .pipeline import segment
from .sweep import sweep as run_sweep, write_table
from .synth import SceneSpec, default_sweep_suite, generate, load_scene_specs

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as err:
        print(f"IoError: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, MalformedFileError, PoseParseError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (CountMismatchError, SequenceLengthMismatchError, LengthMismatchError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA
    except OSError as err:
        print(f"IoError: {err}", file=sys.stderr)
        return EXIT_INPUT
    except TriFieldError as err:
        stage = getattr(err, "stage", None)
        tag = f"[stage={stage}] " if stage else ""
        print(f"error: {tag}{type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_INTERNAL


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="trifield",
        description="Traversable terrain modeling and segmentation on a tri-grid field.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="segment one scan or map")
    p.add_argument("--input", required=True, help="binary scan (float32 x,y,z,intensity)")
    p.add_argument("--preset", choices=("single-scan", "partial-map"), default="single-scan")
    p.add_argument("--config", help="key=value config file overriding the preset")
    p.add_argument("--no-completion", action="store_true", help="disable sparse-kernel completion")
    p.add_argument("--output", help="write labeled output here")
    p.add_argument("--format", choices=dio.RESULT_FORMATS, default="labeled-text")
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred", required=True, help="labeled result file")
    p.add_argument("--pred-format", choices=dio.RESULT_FORMATS, default="labeled-text")
    p.add_argument("--scan", help="source scan (for z values with binary predictions)")
    p.add_argument("--gt-labels", help="semantic label file (uint32 per point)")
    p.add_argument("--gt-classes", help="ground-truth class file (uint8 per point)")
    p.add_argument("--dataset-spec", help="dataset spec name or path")
    p.add_argument(
        "--policy",
        choices=("with-ambiguous", "without-ambiguous"),
        default="without-ambiguous",
    )
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("accumulate", help="build voxelized partial maps")
    p.add_argument("--scans-dir", required=True)
    p.add_argument("--labels-dir", required=True)
    p.add_argument("--poses", required=True)
    p.add_argument("--calib", help="calibration file with a Tr line")
    p.add_argument("--frames-per-map", type=int, required=True)
    p.add_argument("--voxel", type=float, default=0.2)
    p.add_argument("--dataset-spec", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_accumulate)

    p = sub.add_parser("sweep", help="parameter-sensitivity sweep over scenes")
    p.add_argument("--param", required=True, help="r_t, theta, or eps3")
    p.add_argument("--values", required=True, help="comma-separated values (>= 2)")
    p.add_argument("--modes", default="on,off", help="completion modes: on, off, or on,off")
    p.add_argument("--scenes", help="JSON scene spec file (default: built-in suite)")
    p.add_argument("--preset", choices=("single-scan", "partial-map"), default="single-scan")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="write the table here (default: stdout)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("synth", help="materialize a synthetic scene")
    p.add_argument("--spec", help="JSON scene spec file")
    p.add_argument("--kind", choices=("flat", "bumpy", "pit", "overhang", "slope"))
    p.add_argument("--extent", type=float, default=20.0)
    p.add_argument("--density", type=float, default=50.0)
    p.add_argument("--noise", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--amplitude", type=float, default=0.5)
    p.add_argument("--wavelength", type=float, default=8.0)
    p.add_argument("--radius", type=float, default=8.0)
    p.add_argument("--depth", type=float, default=2.0)
    p.add_argument("--observed", choices=("true", "false"), default="true")
    p.add_argument("--height", type=float, default=2.5)
    p.add_argument("--side", type=float, default=6.0)
    p.add_argument("--degrees", type=float, default=15.0)
    p.add_argument("--out", required=True, help="output scan path (.bin)")
    p.add_argument("--oracle-out", help="oracle label output (uint8 per point)")
    p.add_argument("--spec-out", help="also save the materialized spec as JSON")
    p.set_defaults(func=_cmd_synth)
    return parser


def _resolve_config(path_str):
    p = Path(path_str)
    if p.is_file():
        return p
    config_dir = os.environ.get(dio.CONFIG_DIR_ENV)
    if config_dir:
        candidate = Path(config_dir) / path_str
        if candidate.is_file():
            return candidate
    raise FileNotFoundError(f"config file {path_str!r} not found")


def _cmd_segment(args) -> int:
    config = TgfConfig.preset(args.preset)
    if args.config:
        config = TgfConfig.from_file(_resolve_config(args.config), base=config)
    if args.no_completion:
        config = config.replace(completion_enabled=False)
    cloud = dio.read_scan_bin(args.input)
    result = segment(cloud, config)
    if args.output:
        dio.write_result(result, args.output, format=args.format)
    for key in sorted(result.timings_ms):
        print(f"time_ms.{key}={result.timings_ms[key]:.3f}")
    for key in sorted(result.stats):
        print(f"stats.{key}={result.stats[key]}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    if args.pred_format == "labeled-text":
        xyz, pred = dio.read_labeled_text(args.pred)
        z = xyz[:, 2] if len(xyz) else None
    else:
        pred = dio.read_result_labels(args.pred, format="labeled-binary")
        z = None
    if args.scan:
        z = dio.read_scan_bin(args.scan).xyz[:, 2]

    if args.gt_classes:
        gt = dio.read_class_file(args.gt_classes)
        sensor_height = None
        if args.dataset_spec:
            sensor_height = dio.load_dataset_spec(args.dataset_spec).sensor_height
    elif args.gt_labels:
        if not args.dataset_spec:
            raise ConfigError("--gt-labels needs --dataset-spec to map semantic ids")
        spec = dio.load_dataset_spec(args.dataset_spec)
        gt = dio.read_labels(args.gt_labels, spec)
        sensor_height = spec.sensor_height
    else:
        raise ConfigError("eval needs --gt-labels or --gt-classes")

    if len(gt) != len(pred):
        raise CountMismatchError(f"{len(pred)} predictions vs {len(gt)} ground-truth points")
    if args.policy == "with-ambiguous":
        if sensor_height is None:
            raise ConfigError("with-ambiguous policy needs --dataset-spec for the sensor height")
        if z is None:
            raise ConfigError("with-ambiguous policy needs point z values (text pred or --scan)")
        if len(z) != len(pred):
            raise CountMismatchError(f"{len(pred)} predictions vs {len(z)} scan points")
        policy = AmbiguousPolicy.include_with_z_gate(sensor_height)
    else:
        policy = AmbiguousPolicy.exclude()
    p, r, f1, a = metrics(confusion(pred, gt, policy=policy, z=z))
    print(f"{100 * p:.1f} {100 * r:.1f} {100 * f1:.1f} {100 * a:.1f}")
    return EXIT_OK


def _cmd_accumulate(args) -> int:
    scan_paths = sorted(Path(args.scans_dir).glob("*.bin"))
    label_paths = sorted(Path(args.labels_dir).glob("*.label"))
    if not scan_paths:
        raise FileNotFoundError(f"no .bin scans in {args.scans_dir}")
    if len(scan_paths) != len(label_paths):
        raise SequenceLengthMismatchError(
            f"{len(scan_paths)} scans vs {len(label_paths)} label files"
        )
    spec = dio.load_dataset_spec(args.dataset_spec)
    poses = dio.read_poses(args.poses, calib=args.calib)
    if len(poses) < len(scan_paths):
        raise SequenceLengthMismatchError(
            f"{len(scan_paths)} scans vs {len(poses)} poses"
        )
    poses = poses[: len(scan_paths)]
    scans, classes = [], []
    for sp, lp in zip(scan_paths, label_paths):
        cloud = dio.read_scan_bin(sp)
        # labels align with the raw record count; re-filter like the scan
        raw = np.fromfile(lp, dtype="<u4")
        if len(raw) != len(cloud.xyz) + cloud.dropped:
            raise CountMismatchError(f"{lp}: {len(raw)} labels for scan {sp}")
        cls = spec.class_lookup()[(raw & 0xFFFF).astype(np.int64)]
        if cloud.dropped:
            keep = np.isfinite(np.fromfile(sp, dtype="<f4").reshape(-1, 4)[:, :3]).all(axis=1)
            cls = cls[keep]
        scans.append(cloud)
        classes.append(cls)
    maps = dio.accumulate_partial_map(
        scans, classes, poses, frames_per_map=args.frames_per_map, res=args.voxel
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, pm in enumerate(maps):
        dio.write_scan_bin(pm.xyz, out_dir / f"partial_map_{i:03d}.bin")
        dio.write_class_file(pm.labels, out_dir / f"partial_map_{i:03d}.cls")
        print(f"map={i} points={len(pm)}")
    print(f"maps={len(maps)}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    values = [v for v in args.values.split(",") if v.strip()]
    if len(values) < 2:
        raise ConfigError("sweep needs at least 2 values")
    modes = []
    for m in args.modes.split(","):
        m = m.strip().lower()
        if m == "on":
            modes.append(True)
        elif m == "off":
            modes.append(False)
        elif m:
            raise ConfigError(f"unknown mode {m!r}; use on/off")
    if not modes:
        raise ConfigError("no completion modes given")
    scenes = load_scene_specs(args.scenes) if args.scenes else default_sweep_suite()
    rows = run_sweep(
        scenes,
        args.param,
        [float(v) for v in values],
        completion_modes=modes,
        base_config=TgfConfig.preset(args.preset),
        jobs=args.jobs,
    )
    if args.out:
        with open(args.out, "w") as fh:
            write_table(rows, fh)
    else:
        write_table(rows, sys.stdout)
    succeeded = sum(r.n_runs for r in rows)
    failed = sum(r.n_failures for r in rows)
    if failed:
        print(f"warning: {failed} runs failed", file=sys.stderr)
    return EXIT_OK if succeeded > 0 else EXIT_INTERNAL


def _cmd_synth(args) -> int:
    if args.spec:
        spec = load_scene_specs(args.spec)[0]
    elif args.kind:
        spec = SceneSpec(
            kind=args.kind,
            extent=args.extent,
            density=args.density,
            noise_sigma=args.noise,
            rng_seed=args.seed,
            amplitude=args.amplitude,
            wavelength=args.wavelength,
            radius=args.radius,
            depth=args.depth,
            observed=args.observed == "true",
            height=args.height,
            side=args.side,
            degrees=args.degrees,
        )
    else:
        raise ConfigError("synth needs --spec or --kind")
    cloud, oracle, _ = generate(spec)
    dio.write_scan_bin(cloud.xyz, args.out)
    if args.oracle_out:
        dio.write_class_file(oracle, args.oracle_out)
    if args.spec_out:
        with open(args.spec_out, "w") as fh:
            json.dump(spec.to_dict(), fh, indent=2)
    print(f"points={len(cloud)}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
