"""Run configuration: one versioned JSON document for every command.

Validation errors name the offending field by dotted path so a bad config
fails with something actionable ("rig.baseline_m: must be a positive
number") rather than a stack trace.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .association import AssociationConfig
from .geometry import CameraIntrinsics, RigPose, StereoRig
from .simulate import NoiseModel, SceneConfig

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Configuration file failed validation; message names the field path."""


@dataclass(frozen=True)
class RunConfig:
    rig: StereoRig
    association: AssociationConfig
    simulation: SceneConfig | None
    class_filter: frozenset[int]
    confidence_threshold: float
    input_dir: str | None
    output_dir: str | None


def _require(data: dict, key: str, path: str):
    if key not in data:
        raise ConfigError(f"{path}.{key}: required field is missing" if path
                          else f"{key}: required field is missing")
    return data[key]


def _number(value, path: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(f"{path}: must be a positive number, got {value!r}")
    return float(value)


def _pair(value, path: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{path}: expected a pair [a, b], got {value!r}")
    return (_number(value[0], f"{path}[0]"), _number(value[1], f"{path}[1]"))


def _parse_rig(data: dict) -> StereoRig:
    if not isinstance(data, dict):
        raise ConfigError(f"rig: expected an object, got {data!r}")
    resolution = _require(data, "resolution", "rig")
    if not isinstance(resolution, (list, tuple)) or len(resolution) != 2:
        raise ConfigError(f"rig.resolution: expected [width, height], got {resolution!r}")
    width, height = resolution
    if not isinstance(width, int) or not isinstance(height, int):
        raise ConfigError("rig.resolution: width and height must be integers")

    pp = data.get("principal_point")
    principal = _pair(pp, "rig.principal_point") if pp is not None \
        else (width / 2.0, height / 2.0)

    try:
        intrinsics = CameraIntrinsics(
            focal_length_m=_number(_require(data, "focal_length_m", "rig"),
                                   "rig.focal_length_m", positive=True),
            pixel_pitch_m=_number(_require(data, "pixel_pitch_m", "rig"),
                                  "rig.pixel_pitch_m", positive=True),
            principal_point=principal,
            resolution=(width, height),
        )
    except ValueError as exc:
        raise ConfigError(f"rig: {exc}") from None

    pose = RigPose.identity()
    if "pose" in data and data["pose"] is not None:
        pose_data = data["pose"]
        if not isinstance(pose_data, dict):
            raise ConfigError(f"rig.pose: expected an object, got {pose_data!r}")
        rotation = pose_data.get("rotation")
        translation = pose_data.get("translation", [0.0, 0.0, 0.0])
        if not isinstance(translation, (list, tuple)) or len(translation) != 3:
            raise ConfigError(f"rig.pose.translation: expected [x, y, z], got {translation!r}")
        try:
            pose = RigPose(
                rotation=np.eye(3) if rotation is None else np.asarray(rotation, dtype=float),
                translation=tuple(_number(v, f"rig.pose.translation[{i}]")
                                  for i, v in enumerate(translation)),
            )
        except ValueError as exc:
            raise ConfigError(f"rig.pose: {exc}") from None

    depth_constant = data.get("depth_constant")
    try:
        return StereoRig(
            intrinsics=intrinsics,
            baseline_m=_number(_require(data, "baseline_m", "rig"),
                               "rig.baseline_m", positive=True),
            pose=pose,
            depth_constant_override=None if depth_constant is None
            else _number(depth_constant, "rig.depth_constant", positive=True),
        )
    except ValueError as exc:
        raise ConfigError(f"rig: {exc}") from None


def _parse_association(data: dict | None) -> AssociationConfig:
    if data is None:
        return AssociationConfig()
    if not isinstance(data, dict):
        raise ConfigError(f"association: expected an object, got {data!r}")
    kwargs = {}
    for key in ("max_y_diff_frac", "size_weight", "min_disparity_px", "max_disparity_px"):
        if key in data and data[key] is not None:
            kwargs[key] = _number(data[key], f"association.{key}")
    unknown = set(data) - {"max_y_diff_frac", "size_weight", "min_disparity_px",
                           "max_disparity_px"}
    if unknown:
        raise ConfigError(f"association.{sorted(unknown)[0]}: unknown field")
    try:
        return AssociationConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"association: {exc}") from None


def _parse_simulation(data: dict | None) -> SceneConfig | None:
    if data is None:
        return None
    if not isinstance(data, dict):
        raise ConfigError(f"simulation: expected an object, got {data!r}")
    noise = NoiseModel()
    if "noise" in data and data["noise"] is not None:
        nd = data["noise"]
        if not isinstance(nd, dict):
            raise ConfigError(f"simulation.noise: expected an object, got {nd!r}")
        try:
            noise = NoiseModel(
                pixel_sigma=_number(nd.get("pixel_sigma", 0.0), "simulation.noise.pixel_sigma"),
                quantize=bool(nd.get("quantize", False)),
                miss_rate=_number(nd.get("miss_rate", 0.0), "simulation.noise.miss_rate"),
            )
        except ValueError as exc:
            raise ConfigError(f"simulation.noise: {exc}") from None
    kwargs: dict = {"noise": noise}
    if "num_targets" in data:
        kwargs["num_targets"] = int(_number(data["num_targets"], "simulation.num_targets"))
    if "num_frames" in data:
        kwargs["num_frames"] = int(_number(data["num_frames"], "simulation.num_frames"))
    if "rng_seed" in data:
        kwargs["rng_seed"] = int(_number(data["rng_seed"], "simulation.rng_seed"))
    for key in ("depth_range_m", "lateral_range_m"):
        if key in data:
            kwargs[key] = _pair(data[key], f"simulation.{key}")
    if "drone_extent_m" in data:
        ext = data["drone_extent_m"]
        if not isinstance(ext, (list, tuple)) or len(ext) != 3:
            raise ConfigError(f"simulation.drone_extent_m: expected [x, y, z], got {ext!r}")
        kwargs["drone_extent_m"] = tuple(
            _number(v, f"simulation.drone_extent_m[{i}]") for i, v in enumerate(ext))
    try:
        return SceneConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"simulation: {exc}") from None


def parse_run_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"config root: expected an object, got {data!r}")
    version = _require(data, "schema_version", "")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")

    rig = _parse_rig(_require(data, "rig", ""))
    association = _parse_association(data.get("association"))
    simulation = _parse_simulation(data.get("simulation"))

    class_filter = data.get("class_filter", [0])
    if not isinstance(class_filter, list) or not all(isinstance(c, int) for c in class_filter):
        raise ConfigError(f"class_filter: expected a list of integers, got {class_filter!r}")

    threshold = _number(data.get("confidence_threshold", 0.0), "confidence_threshold")
    if not 0.0 <= threshold <= 1.0:
        raise ConfigError(f"confidence_threshold: must be in [0, 1], got {threshold}")

    input_dir = output_dir = None
    if "paths" in data and data["paths"] is not None:
        paths = data["paths"]
        if not isinstance(paths, dict):
            raise ConfigError(f"paths: expected an object, got {paths!r}")
        input_dir = paths.get("input_dir")
        output_dir = paths.get("output_dir")

    return RunConfig(
        rig=rig,
        association=association,
        simulation=simulation,
        class_filter=frozenset(class_filter),
        confidence_threshold=threshold,
        input_dir=input_dir,
        output_dir=output_dir,
    )


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return parse_run_config(data)
