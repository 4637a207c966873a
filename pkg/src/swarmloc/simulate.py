"""Analytic stereo scene simulator with exact ground truth.

Generates frames of target drones observed by a stereo rig, projects them
into both cameras, and emits detection label files plus a ground-truth
table. Replaces a rendered environment with closed-form projection: every
detection's provenance is known exactly, which is what the evaluation and
property tests need.

Targets are sampled uniformly, per frame, in a box expressed in the rig
frame (depth along the optical axis, lateral offsets across it), so the
configured depth band holds exactly for every sample. Resampling relative
placement each frame is the observer-orbits-the-swarm viewpoint variation
expressed in the frame that matters; the world anchoring stays at the
configured rig pose, because that pose is all a downstream consumer of
the emitted dataset knows, and ground truth must live in the same world
frame the pipeline reports in.

Detection boxes are anchored at the exact sub-pixel projection of the
drone center; their size is the pixel span of the drone's projected
physical extent. Anchoring the center (rather than taking the midpoint of
the projected-corner hull, which perspective skews by O(extent^2 / depth))
keeps the noiseless pipeline exact, so quantization and detector noise can
be studied in isolation via the noise model.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .detection_io import BoundingBox, DetectionSet, StereoFrame, label_filename, write_label_file
from .geometry import Side, StereoRig, WorldPoint, project

GROUND_TRUTH_CSV_HEADER = "frame_id,target_id,x_m,y_m,z_m,depth_m,visible"

MIN_BOX_PX = 2.0    # boxes thinner than this in either dimension are unresolvable


class InfeasibleConfigError(ValueError):
    """No placement in the configured box is visible to both cameras."""


@dataclass(frozen=True)
class NoiseModel:
    pixel_sigma: float = 0.0    # Gaussian noise on box centers, pixels
    quantize: bool = False      # round centers to integer pixels
    miss_rate: float = 0.0      # per-camera probability a visible drone goes undetected

    def __post_init__(self) -> None:
        if self.pixel_sigma < 0.0:
            raise ValueError(f"pixel_sigma must be >= 0, got {self.pixel_sigma}")
        if not 0.0 <= self.miss_rate <= 1.0:
            raise ValueError(f"miss_rate must be in [0, 1], got {self.miss_rate}")


@dataclass(frozen=True)
class SceneConfig:
    num_targets: int = 1
    depth_range_m: tuple[float, float] = (5.0, 8.0)
    lateral_range_m: tuple[float, float] = (-1.0, 1.0)   # x and y placement, rig frame
    drone_extent_m: tuple[float, float, float] = (0.5, 0.5, 0.2)
    num_frames: int = 50
    rng_seed: int = 0
    noise: NoiseModel = field(default_factory=NoiseModel)

    def __post_init__(self) -> None:
        if self.num_targets < 1:
            raise ValueError(f"num_targets must be >= 1, got {self.num_targets}")
        if self.num_frames < 1:
            raise ValueError(f"num_frames must be >= 1, got {self.num_frames}")
        d_min, d_max = self.depth_range_m
        if not 0.0 < d_min <= d_max:
            raise ValueError(f"depth_range_m must satisfy 0 < min <= max, got {self.depth_range_m}")
        l_min, l_max = self.lateral_range_m
        if l_min > l_max:
            raise ValueError(f"lateral_range_m must satisfy min <= max, got {self.lateral_range_m}")
        if any(e <= 0.0 for e in self.drone_extent_m):
            raise ValueError(f"drone_extent_m must be > 0, got {self.drone_extent_m}")


@dataclass(frozen=True)
class GroundTruthRecord:
    frame_id: int
    target_id: int
    world: WorldPoint
    depth_m: float              # rig-frame Z
    visible: bool
    # Positions of this target's detections within the emitted frame,
    # None for a side where it was not detected. Kept in memory only (not
    # part of ground_truth.csv); association tests check against these.
    left_index: int | None = None
    right_index: int | None = None


def _check_feasible(cfg: SceneConfig, rig: StereoRig) -> None:
    """Reject configurations whose placement box is invisible everywhere.

    Both-camera visibility windows widen with depth, so checking at the
    far end of the depth band suffices.
    """
    intr = rig.intrinsics
    f_px = intr.focal_length_px
    cx, cy = intr.principal_point
    w, h = intr.width_px, intr.height_px
    z = cfg.depth_range_m[1]
    l_min, l_max = cfg.lateral_range_m
    x_low = max(l_min, rig.baseline_m - cx * z / f_px)
    x_high = min(l_max, (w - cx) * z / f_px)
    y_low = max(l_min, -cy * z / f_px)
    y_high = min(l_max, (h - cy) * z / f_px)
    if x_low > x_high or y_low > y_high:
        raise InfeasibleConfigError(
            f"no placement in lateral range {cfg.lateral_range_m} at depth "
            f"{z} m is visible to both cameras (field of view too narrow "
            f"or baseline too wide)"
        )


def _corner_span(xc: float, yc: float, zc: float, half: tuple[float, float, float],
                 f_px: float, cx: float, cy: float) -> tuple[float, float] | None:
    """Pixel width/height of the projected extent box, camera frame input."""
    ax, ay, az = half
    z_near, z_far = zc - az, zc + az
    if z_near <= 0.0:
        return None
    us = []
    vs = []
    for x in (xc - ax, xc + ax):
        for z in (z_near, z_far):
            us.append(cx + f_px * x / z)
    for y in (yc - ay, yc + ay):
        for z in (z_near, z_far):
            vs.append(cy + f_px * y / z)
    return max(us) - min(us), max(vs) - min(vs)


def generate_scene(cfg: SceneConfig, rig: StereoRig) -> tuple[list[StereoFrame], list[GroundTruthRecord]]:
    """Generate frames and ground truth. Deterministic for a given seed.

    Each target yields one truth record per frame; targets that are not
    resolvable (center off-image in either camera, projected box thinner
    than 2 px) are flagged invisible and omitted from detections. The
    noise model then perturbs, quantizes, or drops the surviving boxes.
    """
    _check_feasible(cfg, rig)
    rng = np.random.default_rng(cfg.rng_seed)
    intr = rig.intrinsics
    f_px = intr.focal_length_px
    cx, cy = intr.principal_point
    width, height = float(intr.width_px), float(intr.height_px)
    half = tuple(e / 2.0 for e in cfg.drone_extent_m)
    d_min, d_max = cfg.depth_range_m
    l_min, l_max = cfg.lateral_range_m
    pose = rig.pose
    noise = cfg.noise

    frames: list[StereoFrame] = []
    truth: list[GroundTruthRecord] = []

    for frame_id in range(cfg.num_frames):
        # (target_id, box) entries per side, in target order before shuffling
        entries: dict[Side, list[tuple[int, BoundingBox]]] = {Side.LEFT: [], Side.RIGHT: []}
        frame_truth: list[GroundTruthRecord] = []

        for target_id in range(cfg.num_targets):
            z = float(rng.uniform(d_min, d_max))
            x = float(rng.uniform(l_min, l_max))
            y = float(rng.uniform(l_min, l_max))
            world = pose.rig_to_world((x, y, z))

            sides: dict[Side, BoundingBox | None] = {}
            visible = True
            for side in (Side.LEFT, Side.RIGHT):
                x_cam = x - rig.baseline_m if side is Side.RIGHT else x
                center = project(world, rig, side)
                u, v = center.u, center.v
                if noise.pixel_sigma > 0.0:
                    du, dv = rng.normal(0.0, noise.pixel_sigma, 2)
                    u = min(max(u + float(du), 0.0), width)
                    v = min(max(v + float(dv), 0.0), height)
                if noise.quantize:
                    u, v = float(round(u)), float(round(v))
                span = _corner_span(x_cam, y, z, half, f_px, cx, cy)
                if (span is None or not (0.0 <= center.u <= width)
                        or not (0.0 <= center.v <= height)
                        or span[0] < MIN_BOX_PX or span[1] < MIN_BOX_PX):
                    visible = False
                    break
                sides[side] = BoundingBox(
                    class_id=0,
                    cx_norm=u / width,
                    cy_norm=v / height,
                    w_norm=min(span[0] / width, 1.0),
                    h_norm=min(span[1] / height, 1.0),
                    confidence=1.0,
                )

            if visible and noise.miss_rate > 0.0:
                for side in (Side.LEFT, Side.RIGHT):
                    if float(rng.uniform()) < noise.miss_rate:
                        sides[side] = None

            if visible:
                for side in (Side.LEFT, Side.RIGHT):
                    box = sides.get(side)
                    if box is not None:
                        entries[side].append((target_id, box))
            frame_truth.append(GroundTruthRecord(
                frame_id=frame_id,
                target_id=target_id,
                world=world,
                depth_m=z,
                visible=visible,
            ))

        # detector output order carries no meaning; shuffle per side
        index_of: dict[Side, dict[int, int]] = {}
        shuffled: dict[Side, tuple[BoundingBox, ...]] = {}
        for side in (Side.LEFT, Side.RIGHT):
            order = rng.permutation(len(entries[side]))
            index_of[side] = {entries[side][k][0]: pos for pos, k in enumerate(order)}
            shuffled[side] = tuple(entries[side][k][1] for k in order)

        truth.extend(
            replace(rec,
                    left_index=index_of[Side.LEFT].get(rec.target_id),
                    right_index=index_of[Side.RIGHT].get(rec.target_id))
            for rec in frame_truth
        )
        frames.append(StereoFrame(
            frame_id=frame_id,
            left=DetectionSet(frame_id, Side.LEFT, shuffled[Side.LEFT]),
            right=DetectionSet(frame_id, Side.RIGHT, shuffled[Side.RIGHT]),
        ))

    return frames, truth


def rig_to_dict(rig: StereoRig) -> dict:
    return {
        "focal_length_m": rig.intrinsics.focal_length_m,
        "pixel_pitch_m": rig.intrinsics.pixel_pitch_m,
        "principal_point": list(rig.intrinsics.principal_point),
        "resolution": list(rig.intrinsics.resolution),
        "baseline_m": rig.baseline_m,
        "depth_constant": rig.depth_constant_override,
        "pose": {
            "rotation": rig.pose.rotation.tolist(),
            "translation": list(rig.pose.translation),
        },
    }


def scene_config_to_dict(cfg: SceneConfig) -> dict:
    return {
        "num_targets": cfg.num_targets,
        "depth_range_m": list(cfg.depth_range_m),
        "lateral_range_m": list(cfg.lateral_range_m),
        "drone_extent_m": list(cfg.drone_extent_m),
        "num_frames": cfg.num_frames,
        "rng_seed": cfg.rng_seed,
        "noise": {
            "pixel_sigma": cfg.noise.pixel_sigma,
            "quantize": cfg.noise.quantize,
            "miss_rate": cfg.noise.miss_rate,
        },
    }


def write_ground_truth_csv(truth: list[GroundTruthRecord], path: str | Path) -> None:
    lines = [GROUND_TRUTH_CSV_HEADER + "\n"]
    for rec in truth:
        lines.append(
            f"{rec.frame_id},{rec.target_id},{rec.world.x!r},{rec.world.y!r},"
            f"{rec.world.z!r},{rec.depth_m!r},{1 if rec.visible else 0}\n"
        )
    Path(path).write_text("".join(lines), encoding="utf-8", newline="")


def emit_dataset(frames: list[StereoFrame], truth: list[GroundTruthRecord],
                 directory: str | Path, cfg: SceneConfig | None = None,
                 rig: StereoRig | None = None, prefix: str = "frame",
                 threads: int = 1) -> list[Path]:
    """Write label files, ground_truth.csv, and scene.json; returns written paths."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)

        def write_side(args: tuple[Path, str]) -> Path:
            path, text = args
            path.write_text(text, encoding="utf-8", newline="")
            return path

        jobs = []
        for frame in frames:
            for detections in (frame.left, frame.right):
                path = directory / label_filename(prefix, frame.frame_id, detections.side)
                jobs.append((path, write_label_file(detections)))

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                written = list(pool.map(write_side, jobs))
        else:
            written = [write_side(job) for job in jobs]

        truth_path = directory / "ground_truth.csv"
        write_ground_truth_csv(truth, truth_path)
        written.append(truth_path)

        if cfg is not None:
            meta: dict = {"schema_version": 1, "simulation": scene_config_to_dict(cfg)}
            if rig is not None:
                meta["rig"] = rig_to_dict(rig)
            meta_path = directory / "scene.json"
            meta_path.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
            written.append(meta_path)
        return written
    except OSError as exc:
        raise OSError(f"failed writing dataset under {directory}: {exc}") from exc
