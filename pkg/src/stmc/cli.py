"""Command-line interface: simulate, track, evaluate, solve."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from . import io as stmc_io
from .config import ConfigError, load_config
from .multicut import WeightedGraph, solve_exact, solve_heuristic
from .report import evaluate_scene, report_table, write_report
from .simulator import ScenarioSpec, generate


def _configure_logging() -> None:
    level = os.environ.get("STMC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(name)s: %(message)s")


def _cmd_simulate(args: argparse.Namespace) -> int:
    if args.spec:
        spec = ScenarioSpec.from_file(args.spec)
    else:
        spec = ScenarioSpec()
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    if args.cameras is not None:
        spec = dataclasses.replace(spec, num_cameras=args.cameras)
    if args.vehicles is not None:
        spec = dataclasses.replace(spec, num_vehicles=args.vehicles)
    if args.frames is not None:
        spec = dataclasses.replace(spec, num_frames=args.frames)
    spec.validate()
    data = generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ids = [str(camera.camera_id) for camera in data.cameras]
    (out / "scenario.json").write_text(
        json.dumps(dataclasses.asdict(spec), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    stmc_io.write_calibrations(out / "calibration.json", ids, data.calibrations)
    stmc_io.write_detections(out / "detections.jsonl", data.detections, ids)
    stmc_io.write_ground_truth(out / "gt", data.gt_image, data.gt_ground, ids)
    print(
        f"simulate: {spec.num_vehicles} vehicles, {spec.num_cameras} cameras, "
        f"{spec.num_frames} frames, {len(data.detections)} detections -> {out}"
    )
    return 0


def _cmd_track(args: argparse.Namespace) -> int:
    config = load_config(path=args.config, overrides=args.set, profile=args.profile)
    if args.threads is not None and args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    summary = stmc_io.run_tracking(args.detections, args.calibration, config, args.out)
    print(
        f"track: {summary['frames']} frames, {summary['detections']} detections, "
        f"{summary['identities']} identities -> {args.out}"
    )
    return 0


def _camera_ids(*dirs: Path) -> list[str]:
    names: set[str] = set()
    for directory in dirs:
        for path in directory.glob("cam_*.txt"):
            names.add(path.stem[len("cam_"):])
    return sorted(names)


def _cmd_evaluate(args: argparse.Namespace) -> int:
    tracks_dir, gt_dir = Path(args.tracks), Path(args.gt)
    ids = _camera_ids(tracks_dir, gt_dir)
    if not ids:
        raise stmc_io.FormatError("no cam_<id>.txt files found in either directory")
    pred_image, pred_ground = stmc_io.read_track_files(tracks_dir, ids)
    gt_image, gt_ground = stmc_io.read_track_files(gt_dir, ids)
    report = evaluate_scene(
        gt_image, gt_ground, pred_image, pred_ground,
        iou_threshold=args.iou, radius=args.radius,
    )
    print(report_table(report))
    if args.out:
        csv_path = write_report(
            args.out, report, gt_ground, pred_ground, figures=not args.no_figures
        )
        print(f"evaluate: report written to {csv_path.parent}")
    return 0


def _cmd_solve(args: argparse.Namespace) -> int:
    text = Path(args.graph).read_text(encoding="utf-8").split()
    if len(text) < 2:
        raise stmc_io.FormatError(f"{args.graph}: expected 'n m' header")
    n, m = int(text[0]), int(text[1])
    numbers = text[2:]
    if len(numbers) != 3 * m:
        raise stmc_io.FormatError(f"{args.graph}: expected {3 * m} edge numbers, got {len(numbers)}")
    edges = []
    for k in range(m):
        u, v, w = int(numbers[3 * k]), int(numbers[3 * k + 1]), float(numbers[3 * k + 2])
        if u > v:
            u, v = v, u
        edges.append((u, v, w))
    graph = WeightedGraph(n=n, edges=edges)
    labels = solve_exact(graph) if args.exact else solve_heuristic(graph)
    print(" ".join(str(label) for label in labels))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stmc",
        description="Online multi-camera tracking via joint spatial-temporal clustering.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic scenario")
    sim.add_argument("--spec", help="scenario spec JSON file")
    sim.add_argument("--seed", type=int, help="override the scenario seed")
    sim.add_argument("--cameras", type=int, help="override the camera count")
    sim.add_argument("--vehicles", type=int, help="override the vehicle count")
    sim.add_argument("--frames", type=int, help="override the frame count")
    sim.add_argument("--out", required=True, help="output dataset directory")
    sim.set_defaults(func=_cmd_simulate)

    trk = sub.add_parser("track", help="run the tracker over a detection stream")
    trk.add_argument("--detections", required=True, help="detections JSONL file")
    trk.add_argument("--calibration", required=True, help="calibration JSON file")
    trk.add_argument("--out", required=True, help="output tracks directory")
    trk.add_argument("--config", help="config file (key = value lines)")
    trk.add_argument("--profile", help="built-in parameter profile name")
    trk.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override one config value (repeatable)")
    trk.add_argument("--threads", type=int, help="cap internal parallelism")
    trk.set_defaults(func=_cmd_track)

    ev = sub.add_parser("evaluate", help="score tracks against ground truth")
    ev.add_argument("--tracks", required=True, help="tracker output directory")
    ev.add_argument("--gt", required=True, help="ground-truth directory")
    ev.add_argument("--out", help="report directory (CSV + figures)")
    ev.add_argument("--iou", type=float, default=0.5, help="image-plane IoU threshold")
    ev.add_argument("--radius", type=float, default=1.0, help="ground-plane match radius")
    ev.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    ev.set_defaults(func=_cmd_evaluate)

    sol = sub.add_parser("solve", help="cluster a weighted graph file")
    sol.add_argument("graph", help="text file: 'n m' then m lines 'u v w'")
    sol.add_argument("--exact", action="store_true", help="use the enumeration oracle")
    sol.set_defaults(func=_cmd_solve)
    return parser


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, stmc_io.FormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
