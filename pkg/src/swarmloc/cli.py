"""Command-line entry point.

    swarmloc simulate --config cfg.json --out DIR [--seed S] [--threads N]
    swarmloc localize --config cfg.json --in DIR --out estimates.csv [--threads N]
    swarmloc evaluate --estimates est.csv --truth ground_truth.csv --out DIR [--radius R]
    swarmloc bench    --config cfg.json --out bench.json [--drones N] [--frames M]
                      [--repetitions R] [--seed S] [--threads N]

Exit codes are stable: 0 success, 2 configuration error, 3 I/O failure,
4 empty input, 5 input-file schema mismatch.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, RunConfig, load_run_config
from .detection_io import LabelParseError, read_stereo_frame, scan_label_dir
from .evaluate import (
    CsvSchemaError,
    EmptyInputError,
    bench_pipeline,
    depth_error_table,
    match_estimates_to_truth,
    read_estimates_csv,
    read_ground_truth_csv,
    write_error_table_csv,
    write_summary_json,
)
from .pipeline import localize_stream, write_estimates_csv
from .simulate import InfeasibleConfigError, SceneConfig, emit_dataset, generate_scene

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_EMPTY = 4
EXIT_SCHEMA = 5


def _load_config(path: str) -> RunConfig:
    return load_run_config(path)


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    if cfg.simulation is None:
        raise ConfigError("simulation: section is required by the simulate command")
    sim = cfg.simulation
    if args.seed is not None:
        sim = replace(sim, rng_seed=args.seed)
    out_dir = args.out or cfg.output_dir
    if out_dir is None:
        raise ConfigError("paths.output_dir: not set and no --out given")
    frames, truth = generate_scene(sim, cfg.rig)
    emit_dataset(frames, truth, out_dir, cfg=sim, rig=cfg.rig, threads=args.threads)
    print(f"simulated {sim.num_frames} frames x {sim.num_targets} targets "
          f"(seed {sim.rng_seed}) -> {out_dir}")
    return EXIT_OK


def cmd_localize(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    in_dir = args.in_dir or cfg.input_dir
    if in_dir is None:
        raise ConfigError("paths.input_dir: not set and no --in given")
    out_path = args.out or (None if cfg.output_dir is None
                            else str(Path(cfg.output_dir) / "estimates.csv"))
    if out_path is None:
        raise ConfigError("paths.output_dir: not set and no --out given")
    if not Path(in_dir).is_dir():
        raise OSError(f"input directory {in_dir} does not exist")
    pairs, incomplete = scan_label_dir(in_dir)
    for frame_id in incomplete:
        print(f"warning: frame {frame_id} is missing one side, skipped", file=sys.stderr)
    if not pairs:
        print(f"error: no stereo label-file pairs found in {in_dir}", file=sys.stderr)
        return EXIT_EMPTY
    frames = [read_stereo_frame(fid, lp, rp) for fid, lp, rp in pairs]
    results = localize_stream(frames, cfg.rig, cfg.association,
                              class_ids=cfg.class_filter,
                              min_confidence=cfg.confidence_threshold,
                              threads=args.threads)
    n_rows = write_estimates_csv(results, out_path)
    dropped = sum(r.dropped_left + r.dropped_right for r in results)
    print(f"localized {len(frames)} frames: {n_rows} estimates, "
          f"{dropped} unmatched detections, {len(incomplete)} frames skipped -> {out_path}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    estimates = read_estimates_csv(args.estimates)
    truth = read_ground_truth_csv(args.truth)
    result = match_estimates_to_truth(estimates, truth, radius_m=args.radius)
    rows, summary = depth_error_table(result)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_error_table_csv(rows, out_dir / "error_table.csv")
    write_summary_json(summary, out_dir / "summary.json")
    print(f"mean error {summary.mean_error_pct:.2f}% max {summary.max_error_pct:.2f}% "
          f"(matched {summary.matched}, missed {summary.missed}, "
          f"spurious {summary.spurious}) -> {out_dir}")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    if args.drones < 1 or args.frames < 1 or args.repetitions < 1:
        raise ConfigError("bench: --drones, --frames and --repetitions must be >= 1")
    base = cfg.simulation if cfg.simulation is not None else SceneConfig()
    seed = args.seed if args.seed is not None else base.rng_seed
    sim = replace(base, num_targets=args.drones, num_frames=args.frames,
                  rng_seed=seed, noise=replace(base.noise, miss_rate=0.0))
    frames, _ = generate_scene(sim, cfg.rig)
    report = bench_pipeline(frames, cfg.rig, cfg.association,
                            repetitions=args.repetitions, threads=args.threads)
    Path(args.out).write_text(json.dumps(report.to_dict(), indent=2) + "\n",
                              encoding="utf-8")
    timing = report.single_thread
    print(f"bench: {timing.fps:.0f} frames/s single-threaded, "
          f"p50 {timing.p50_ms * 1000:.1f} us, p95 {timing.p95_ms * 1000:.1f} us "
          f"-> {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmloc",
        description="Stereo bounding-box triangulation pipeline for multi-drone "
                    "3D localization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate a synthetic stereo detection dataset")
    p_sim.add_argument("--config", required=True, help="run configuration (JSON)")
    p_sim.add_argument("--out", help="output dataset directory")
    p_sim.add_argument("--seed", type=int, help="override the configured RNG seed")
    p_sim.add_argument("--threads", type=int, default=1, help="parallel file emission")
    p_sim.set_defaults(func=cmd_simulate)

    p_loc = sub.add_parser("localize", help="run the localization pipeline over label files")
    p_loc.add_argument("--config", required=True)
    p_loc.add_argument("--in", dest="in_dir", help="directory of label-file pairs")
    p_loc.add_argument("--out", help="output estimates CSV path")
    p_loc.add_argument("--threads", type=int, default=1, help="parallel frame processing")
    p_loc.set_defaults(func=cmd_localize)

    p_eval = sub.add_parser("evaluate", help="compare estimates against ground truth")
    p_eval.add_argument("--estimates", required=True, help="estimates CSV from localize")
    p_eval.add_argument("--truth", required=True, help="ground_truth.csv from simulate")
    p_eval.add_argument("--out", required=True, help="output directory")
    p_eval.add_argument("--radius", type=float, default=1.0,
                        help="estimate-to-truth match radius in meters")
    p_eval.set_defaults(func=cmd_evaluate)

    p_bench = sub.add_parser("bench", help="benchmark pipeline throughput")
    p_bench.add_argument("--config", required=True)
    p_bench.add_argument("--out", required=True, help="output bench.json path")
    p_bench.add_argument("--drones", type=int, default=5, help="targets per frame")
    p_bench.add_argument("--frames", type=int, default=2000, help="workload frames")
    p_bench.add_argument("--repetitions", type=int, default=1)
    p_bench.add_argument("--seed", type=int, help="workload seed")
    p_bench.add_argument("--threads", type=int, default=1,
                         help="also measure with a thread pool of this size")
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InfeasibleConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CsvSchemaError, LabelParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except EmptyInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
