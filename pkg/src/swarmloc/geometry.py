"""Pinhole camera and rectified parallel stereo-rig math.

Coordinate conventions
----------------------
Rig frame: origin at the left camera's optical center, +x toward the right
camera, +y down, +z forward along the (shared) optical axis. The right
camera center sits at (baseline_m, 0, 0) in the rig frame.

Image frame: u rightward, v downward, origin at the top-left pixel corner.
Sub-pixel coordinates are carried as plain floats throughout; no rounding
happens here.

World frame: arbitrary right-handed frame. A RigPose maps rig coordinates
to world coordinates via p_world = R @ p_rig + t.

Depth from disparity: Z = f_px * B / dx, where f_px = focal_length_m /
pixel_pitch_m. The numerator f_px * B is the rig's depth constant; it can
be overridden with an explicit value when reproducing data recorded with
an unknown or inconsistent calibration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np


class Side(str, Enum):
    LEFT = "left"
    RIGHT = "right"


class ImagePoint(NamedTuple):
    u: float
    v: float


class WorldPoint(NamedTuple):
    x: float
    y: float
    z: float


class BehindCameraError(ValueError):
    """The point has non-positive depth in the camera frame and cannot be imaged."""


class NonPositiveDisparityError(ValueError):
    """Disparity <= 0: the point is at infinity or the pair is mismatched."""


class NonPositiveDepthError(ValueError):
    """Back-projection requires a strictly positive depth."""


@dataclass(frozen=True)
class CameraIntrinsics:
    focal_length_m: float
    pixel_pitch_m: float          # meters per pixel on the sensor
    principal_point: tuple[float, float]   # (cx_px, cy_px)
    resolution: tuple[int, int]             # (width_px, height_px)

    def __post_init__(self) -> None:
        if not (math.isfinite(self.focal_length_m) and self.focal_length_m > 0):
            raise ValueError(f"focal_length_m must be finite and > 0, got {self.focal_length_m}")
        if not (math.isfinite(self.pixel_pitch_m) and self.pixel_pitch_m > 0):
            raise ValueError(f"pixel_pitch_m must be finite and > 0, got {self.pixel_pitch_m}")
        w, h = self.resolution
        if w < 1 or h < 1:
            raise ValueError(f"resolution must be >= 1x1, got {self.resolution}")
        cx, cy = self.principal_point
        if not (math.isfinite(cx) and math.isfinite(cy)):
            raise ValueError(f"principal_point must be finite, got {self.principal_point}")
        if not math.isfinite(self.focal_length_px):
            raise ValueError("derived focal_length_px is not finite")

    @property
    def focal_length_px(self) -> float:
        return self.focal_length_m / self.pixel_pitch_m

    @property
    def width_px(self) -> int:
        return self.resolution[0]

    @property
    def height_px(self) -> int:
        return self.resolution[1]


@dataclass(frozen=True, eq=False)
class RigPose:
    """Rigid transform from rig frame to world frame.

    rotation is a 3x3 orthonormal matrix (det +1 within 1e-9), translation
    the world position of the left camera's optical center.
    """

    rotation: np.ndarray
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    # Flattened rotation entries, precomputed so the per-point transforms
    # stay off the numpy dispatch overhead.
    _r: tuple[float, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        rot = np.asarray(self.rotation, dtype=float)
        if rot.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got shape {rot.shape}")
        if not np.all(np.isfinite(rot)):
            raise ValueError("rotation contains non-finite entries")
        err = np.abs(rot @ rot.T - np.eye(3)).max()
        if err > 1e-9:
            raise ValueError(f"rotation is not orthonormal (max |R R^T - I| = {err:.3e})")
        det = float(np.linalg.det(rot))
        if abs(det - 1.0) > 1e-9:
            raise ValueError(f"rotation must have determinant +1, got {det}")
        tx, ty, tz = self.translation
        if not (math.isfinite(tx) and math.isfinite(ty) and math.isfinite(tz)):
            raise ValueError(f"translation must be finite, got {self.translation}")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "_r", tuple(float(v) for v in rot.ravel()))

    @classmethod
    def identity(cls) -> "RigPose":
        return cls(rotation=np.eye(3))

    def rig_to_world(self, p: WorldPoint | tuple[float, float, float]) -> WorldPoint:
        x, y, z = p
        r = self._r
        tx, ty, tz = self.translation
        return WorldPoint(
            r[0] * x + r[1] * y + r[2] * z + tx,
            r[3] * x + r[4] * y + r[5] * z + ty,
            r[6] * x + r[7] * y + r[8] * z + tz,
        )

    def world_to_rig(self, p: WorldPoint | tuple[float, float, float]) -> WorldPoint:
        x, y, z = p
        tx, ty, tz = self.translation
        dx, dy, dz = x - tx, y - ty, z - tz
        r = self._r
        # R^T (p - t)
        return WorldPoint(
            r[0] * dx + r[3] * dy + r[6] * dz,
            r[1] * dx + r[4] * dy + r[7] * dz,
            r[2] * dx + r[5] * dy + r[8] * dz,
        )


@dataclass(frozen=True)
class StereoRig:
    """Two identical pinhole cameras in a rectified parallel arrangement."""

    intrinsics: CameraIntrinsics
    baseline_m: float
    pose: RigPose = field(default_factory=RigPose.identity)
    # Explicit depth constant, replacing focal_length_px * baseline_m when the
    # calibration used to record a dataset is unknown or self-inconsistent.
    depth_constant_override: float | None = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.baseline_m) and self.baseline_m > 0):
            raise ValueError(f"baseline_m must be finite and > 0, got {self.baseline_m}")
        if self.depth_constant_override is not None:
            k = self.depth_constant_override
            if not (math.isfinite(k) and k > 0):
                raise ValueError(f"depth_constant_override must be finite and > 0, got {k}")


def depth_constant(rig: StereoRig) -> float:
    """Numerator of the triangulation formula, K = f_px * B (meter-pixels).

    Returns the configured override when one is set.
    """
    if rig.depth_constant_override is not None:
        return rig.depth_constant_override
    return rig.intrinsics.focal_length_px * rig.baseline_m


def project(point: WorldPoint | tuple[float, float, float], rig: StereoRig,
            which: Side) -> ImagePoint:
    """Project a world point into the chosen camera.

    The result may fall outside the image bounds; callers decide visibility.
    Raises BehindCameraError when the point has Z <= 0 in the camera frame,
    ValueError on non-finite input.
    """
    x, y, z = point
    if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
        raise ValueError(f"point must be finite, got {point}")
    xc, yc, zc = rig.pose.world_to_rig((x, y, z))
    if which is Side.RIGHT:
        xc -= rig.baseline_m
    if zc <= 0.0:
        raise BehindCameraError(f"point has camera-frame depth {zc} <= 0")
    f_px = rig.intrinsics.focal_length_px
    cx, cy = rig.intrinsics.principal_point
    return ImagePoint(cx + f_px * xc / zc, cy + f_px * yc / zc)


def disparity(x_left: float, x_right: float) -> float:
    """Horizontal offset x_left - x_right in pixels. May be <= 0; callers judge validity."""
    return x_left - x_right


def triangulate_depth(disparity_px: float, rig: StereoRig) -> float:
    """Depth Z = K / disparity for a rectified parallel rig.

    Raises NonPositiveDisparityError for disparity <= 0 (point at infinity
    or a mismatched pair); the caller must discard the pair.
    """
    if not disparity_px > 0.0:
        raise NonPositiveDisparityError(f"disparity must be > 0, got {disparity_px}")
    return depth_constant(rig) / disparity_px


def back_project(centroid: ImagePoint | tuple[float, float], depth_m: float,
                 rig: StereoRig) -> WorldPoint:
    """Map a left-image point plus depth to world coordinates.

    The left camera is the reference: (u, v) are interpreted in the left
    image, and the camera-frame point ((u-cx)Z/f, (v-cy)Z/f, Z) is carried
    through the rig pose.
    """
    if not depth_m > 0.0:
        raise NonPositiveDepthError(f"depth must be > 0, got {depth_m}")
    u, v = centroid
    f_px = rig.intrinsics.focal_length_px
    cx, cy = rig.intrinsics.principal_point
    return rig.pose.rig_to_world(
        ((u - cx) * depth_m / f_px, (v - cy) * depth_m / f_px, depth_m)
    )


def quantization_depth_bound(depth_m: float, rig: StereoRig, q_px: float = 1.0) -> float:
    """Worst-case depth error when the disparity is off by at most q_px pixels.

    |Z_est - Z| <= Z^2 q / (K - Z q), valid while the denominator is positive.
    Rounding each image column to the nearest integer perturbs the disparity
    by at most one pixel, so q_px = 1 covers integer-pixel centroids.
    """
    k = depth_constant(rig)
    denom = k - depth_m * q_px
    if denom <= 0.0:
        raise ValueError(
            f"bound undefined: depth {depth_m} m at q={q_px} px exceeds K={k}"
        )
    return depth_m * depth_m * q_px / denom
