"""Score pipeline output against ground truth and benchmark throughput.

Error accounting follows the depth-comparison convention: each matched
estimate contributes a row with its disparity, estimated depth, true
depth, and percentage error relative to the true depth. Matching between
estimates and truth is an optimal assignment on world-space distance,
gated by a match radius, so multi-target scenes cannot double-count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .association import AssociationConfig
from .detection_io import StereoFrame, write_label_file
from .geometry import StereoRig, WorldPoint
from .pipeline import DroneEstimate, localize_frame
from .simulate import GroundTruthRecord

_UNMATCHABLE = 1e15


class EmptyInputError(ValueError):
    """A summary cannot be computed over zero matches."""


class CsvSchemaError(ValueError):
    """An input CSV does not carry the expected columns."""


@dataclass(frozen=True)
class ErrorRow:
    sample_no: int
    disparity_px: float
    z_depth_m: float
    ground_truth_m: float
    error_pct: float


@dataclass(frozen=True)
class EvalSummary:
    n_samples: int
    mean_error_pct: float
    max_error_pct: float
    mean_abs_error_m: float
    matched: int
    missed: int
    spurious: int


@dataclass(frozen=True)
class MatchResult:
    matches: tuple[tuple[DroneEstimate, GroundTruthRecord], ...]
    missed: int      # visible truth records with no estimate in radius
    spurious: int    # estimates with no truth record in radius


def match_estimates_to_truth(estimates: Iterable[DroneEstimate],
                             truth: Iterable[GroundTruthRecord],
                             radius_m: float = 1.0) -> MatchResult:
    """Assign estimates to visible truth records frame by frame.

    Within each frame the pairing minimizes total world-space distance
    over all assignments (not nearest-first greedy); pairs farther apart
    than radius_m stay unmatched.
    """
    est_by_frame: dict[int, list[DroneEstimate]] = {}
    for e in estimates:
        est_by_frame.setdefault(e.frame_id, []).append(e)
    truth_by_frame: dict[int, list[GroundTruthRecord]] = {}
    for rec in truth:
        if rec.visible:
            truth_by_frame.setdefault(rec.frame_id, []).append(rec)

    matches: list[tuple[DroneEstimate, GroundTruthRecord]] = []
    missed = 0
    spurious = 0
    for frame_id in sorted(set(est_by_frame) | set(truth_by_frame)):
        ests = est_by_frame.get(frame_id, [])
        recs = truth_by_frame.get(frame_id, [])
        if not ests or not recs:
            missed += len(recs)
            spurious += len(ests)
            continue
        cost = np.full((len(ests), len(recs)), _UNMATCHABLE)
        for i, e in enumerate(ests):
            ex, ey, ez = e.world
            for j, rec in enumerate(recs):
                d = ((ex - rec.world.x) ** 2 + (ey - rec.world.y) ** 2
                     + (ez - rec.world.z) ** 2) ** 0.5
                if d <= radius_m:
                    cost[i, j] = d
        rows, cols = linear_sum_assignment(cost)
        paired_e = set()
        paired_t = set()
        for i, j in zip(rows, cols):
            if cost[i, j] < _UNMATCHABLE / 2:
                matches.append((ests[i], recs[j]))
                paired_e.add(int(i))
                paired_t.add(int(j))
        missed += len(recs) - len(paired_t)
        spurious += len(ests) - len(paired_e)

    return MatchResult(matches=tuple(matches), missed=missed, spurious=spurious)


def error_rows_from_matches(result: MatchResult) -> list[ErrorRow]:
    ordered = sorted(result.matches, key=lambda m: (m[0].frame_id, m[0].target_ordinal))
    return [
        ErrorRow(
            sample_no=n,
            disparity_px=e.disparity_px,
            z_depth_m=e.depth_m,
            ground_truth_m=rec.depth_m,
            error_pct=100.0 * abs(e.depth_m - rec.depth_m) / rec.depth_m,
        )
        for n, (e, rec) in enumerate(ordered, start=1)
    ]


def error_rows_from_disparities(disparities_px: Sequence[float], depth_constant: float,
                                ground_truths_m: Sequence[float]) -> list[ErrorRow]:
    """Rows straight from disparity samples: Z = K / dx against known truth."""
    if len(disparities_px) != len(ground_truths_m):
        raise ValueError("disparity and ground-truth lists differ in length")
    rows = []
    for n, (dx, gt) in enumerate(zip(disparities_px, ground_truths_m), start=1):
        z = depth_constant / dx
        rows.append(ErrorRow(n, dx, z, gt, 100.0 * abs(z - gt) / gt))
    return rows


def summarize(rows: Sequence[ErrorRow], matched: int | None = None,
              missed: int = 0, spurious: int = 0) -> EvalSummary:
    if not rows:
        raise EmptyInputError("cannot summarize zero matched samples")
    return EvalSummary(
        n_samples=len(rows),
        mean_error_pct=statistics.fmean(r.error_pct for r in rows),
        max_error_pct=max(r.error_pct for r in rows),
        mean_abs_error_m=statistics.fmean(abs(r.z_depth_m - r.ground_truth_m) for r in rows),
        matched=len(rows) if matched is None else matched,
        missed=missed,
        spurious=spurious,
    )


def depth_error_table(result: MatchResult) -> tuple[list[ErrorRow], EvalSummary]:
    """Per-sample error rows (ordered by frame, then ordinal) plus the summary."""
    rows = error_rows_from_matches(result)
    summary = summarize(rows, matched=len(result.matches),
                        missed=result.missed, spurious=result.spurious)
    return rows, summary


ERROR_TABLE_CSV_HEADER = "sample_no,disparity_px,z_depth_m,ground_truth_m,error_pct"


def write_error_table_csv(rows: Sequence[ErrorRow], path: str | Path) -> None:
    lines = [ERROR_TABLE_CSV_HEADER + "\n"]
    for r in rows:
        lines.append(
            f"{r.sample_no},{r.disparity_px!r},{r.z_depth_m!r},"
            f"{r.ground_truth_m!r},{r.error_pct!r}\n"
        )
    Path(path).write_text("".join(lines), encoding="utf-8", newline="")


def write_summary_json(summary: EvalSummary, path: str | Path) -> None:
    payload = {
        "n_samples": summary.n_samples,
        "mean_error_pct": summary.mean_error_pct,
        "max_error_pct": summary.max_error_pct,
        "mean_abs_error_m": summary.mean_abs_error_m,
        "matched": summary.matched,
        "missed": summary.missed,
        "spurious": summary.spurious,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _require_columns(fieldnames: Sequence[str] | None, required: Sequence[str],
                     path: Path) -> None:
    present = set(fieldnames or ())
    for col in required:
        if col not in present:
            raise CsvSchemaError(f"{path}: missing column {col!r}")


def read_estimates_csv(path: str | Path) -> list[DroneEstimate]:
    path = Path(path)
    required = ("frame_id", "target_ordinal", "disparity_px", "depth_m",
                "x_m", "y_m", "z_m", "confidence")
    estimates = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, required, path)
        for row in reader:
            estimates.append(DroneEstimate(
                frame_id=int(row["frame_id"]),
                target_ordinal=int(row["target_ordinal"]),
                disparity_px=float(row["disparity_px"]),
                depth_m=float(row["depth_m"]),
                world=WorldPoint(float(row["x_m"]), float(row["y_m"]), float(row["z_m"])),
                confidence=float(row["confidence"]),
                left_index=-1,
                right_index=-1,
            ))
    return estimates


def read_ground_truth_csv(path: str | Path) -> list[GroundTruthRecord]:
    path = Path(path)
    required = ("frame_id", "target_id", "x_m", "y_m", "z_m", "depth_m", "visible")
    records = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, required, path)
        for row in reader:
            records.append(GroundTruthRecord(
                frame_id=int(row["frame_id"]),
                target_id=int(row["target_id"]),
                world=WorldPoint(float(row["x_m"]), float(row["y_m"]), float(row["z_m"])),
                depth_m=float(row["depth_m"]),
                visible=row["visible"].strip().lower() in ("1", "true"),
            ))
    return records


@dataclass(frozen=True)
class BenchTiming:
    repetitions: int
    frames_timed: int
    fps: float
    p50_ms: float
    p95_ms: float
    max_ms: float

    def to_dict(self) -> dict:
        return {
            "repetitions": self.repetitions,
            "frames_timed": self.frames_timed,
            "fps": self.fps,
            "latency_ms": {"p50": self.p50_ms, "p95": self.p95_ms, "max": self.max_ms},
        }


@dataclass(frozen=True)
class BenchReport:
    single_thread: BenchTiming
    threaded: BenchTiming | None
    threads: int
    workload_hash: str

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "threads": self.threads,
            "workload_hash": self.workload_hash,
            "single_thread": self.single_thread.to_dict(),
            "threaded": self.threaded.to_dict() if self.threaded else None,
        }


def workload_hash(frames: Sequence[StereoFrame]) -> str:
    """Stable digest of a frame sequence; identical seeds hash identically."""
    digest = hashlib.sha256()
    for frame in frames:
        digest.update(write_label_file(frame.left).encode())
        digest.update(write_label_file(frame.right).encode())
    return "sha256:" + digest.hexdigest()


def _timed_pass(work: Callable[[StereoFrame], object],
                frames: Sequence[StereoFrame], repetitions: int) -> BenchTiming:
    latencies = np.empty(len(frames) * repetitions)
    k = 0
    t_start = time.perf_counter()
    for _ in range(repetitions):
        for frame in frames:
            t0 = time.perf_counter()
            work(frame)
            latencies[k] = time.perf_counter() - t0
            k += 1
    elapsed = time.perf_counter() - t_start
    return BenchTiming(
        repetitions=repetitions,
        frames_timed=k,
        fps=k / elapsed,
        p50_ms=float(np.percentile(latencies, 50)) * 1e3,
        p95_ms=float(np.percentile(latencies, 95)) * 1e3,
        max_ms=float(latencies.max()) * 1e3,
    )


def bench_pipeline(frames: Sequence[StereoFrame], rig: StereoRig,
                   cfg: AssociationConfig, repetitions: int = 1,
                   threads: int = 1) -> BenchReport:
    """Time the association+geometry stages over a fixed workload.

    One untimed warmup pass precedes measurement. The timed section runs
    single-threaded; with threads > 1 an additional threaded pass is
    measured and reported alongside.
    """
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got {repetitions}")

    def work(frame: StereoFrame):
        return localize_frame(frame, rig, cfg)

    for frame in frames:   # warmup
        work(frame)

    single = _timed_pass(work, frames, repetitions)

    threaded = None
    if threads > 1:
        latencies = np.empty(len(frames) * repetitions)
        k = 0
        with ThreadPoolExecutor(max_workers=threads) as pool:
            def timed_work(frame: StereoFrame) -> float:
                t0 = time.perf_counter()
                work(frame)
                return time.perf_counter() - t0

            t_start = time.perf_counter()
            for _ in range(repetitions):
                for dt in pool.map(timed_work, frames):
                    latencies[k] = dt
                    k += 1
            elapsed = time.perf_counter() - t_start
        threaded = BenchTiming(
            repetitions=repetitions,
            frames_timed=k,
            fps=k / elapsed,
            p50_ms=float(np.percentile(latencies, 50)) * 1e3,
            p95_ms=float(np.percentile(latencies, 95)) * 1e3,
            max_ms=float(latencies.max()) * 1e3,
        )

    return BenchReport(
        single_thread=single,
        threaded=threaded,
        threads=threads,
        workload_hash=workload_hash(frames),
    )
