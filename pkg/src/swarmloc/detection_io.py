"""Read and write per-frame bounding-box label files.

This is the boundary where a detector's output enters the pipeline. One
text file per camera image, one detection per line:

    class cx cy w h [confidence]

All five geometry fields are normalized to [0, 1] in the usual
center/size convention; the optional sixth column is the detector
confidence (default 1.0). Lines starting with '#' are comments. Files for
a stereo pair are bound by name: <prefix>_<frameid>_left.txt and
<prefix>_<frameid>_right.txt.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

from .geometry import CameraIntrinsics, ImagePoint, Side


class LabelParseError(ValueError):
    """A label line that cannot be used. Carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class MalformedLineError(LabelParseError):
    """Wrong field count or a non-numeric field."""


class OutOfRangeError(LabelParseError):
    """Numeric fields violate the bounding-box invariants."""


@dataclass(frozen=True)
class BoundingBox:
    class_id: int
    cx_norm: float
    cy_norm: float
    w_norm: float
    h_norm: float
    confidence: float = 1.0

    def __post_init__(self) -> None:
        for name in ("cx_norm", "cy_norm", "w_norm", "h_norm", "confidence"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        if not (0.0 <= self.cx_norm <= 1.0 and 0.0 <= self.cy_norm <= 1.0):
            raise ValueError(
                f"box center must lie inside the image: ({self.cx_norm}, {self.cy_norm})"
            )
        if not (0.0 < self.w_norm <= 1.0 and 0.0 < self.h_norm <= 1.0):
            raise ValueError(f"box size must be in (0, 1]: ({self.w_norm}, {self.h_norm})")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class DetectionSet:
    frame_id: int
    side: Side
    boxes: tuple[BoundingBox, ...]

    def __post_init__(self) -> None:
        if self.frame_id < 0:
            raise ValueError(f"frame_id must be >= 0, got {self.frame_id}")
        object.__setattr__(self, "boxes", tuple(self.boxes))


@dataclass(frozen=True)
class StereoFrame:
    frame_id: int
    left: DetectionSet
    right: DetectionSet

    def __post_init__(self) -> None:
        if not (self.left.frame_id == self.right.frame_id == self.frame_id):
            raise ValueError(
                f"frame ids disagree: frame={self.frame_id}, "
                f"left={self.left.frame_id}, right={self.right.frame_id}"
            )
        if self.left.side is not Side.LEFT or self.right.side is not Side.RIGHT:
            raise ValueError("left/right detection sets have swapped sides")


def parse_label_file(text: str | bytes, frame_id: int, side: Side) -> DetectionSet:
    """Parse one label file. Preserves file order; skips blanks and '#' comments.

    Raises MalformedLineError / OutOfRangeError with the offending 1-based
    line number.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    boxes: list[BoundingBox] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) not in (5, 6):
            raise MalformedLineError(line_no, f"expected 5 or 6 fields, got {len(fields)}")
        try:
            class_id = int(fields[0])
            cx, cy, w, h = (float(f) for f in fields[1:5])
            conf = float(fields[5]) if len(fields) == 6 else 1.0
        except ValueError:
            raise MalformedLineError(line_no, f"non-numeric field in {line!r}") from None
        try:
            boxes.append(BoundingBox(class_id, cx, cy, w, h, conf))
        except ValueError as exc:
            raise OutOfRangeError(line_no, str(exc)) from None
    return DetectionSet(frame_id=frame_id, side=side, boxes=tuple(boxes))


def write_label_file(detections: DetectionSet) -> str:
    """Inverse of parse_label_file. Six columns, six decimals, LF line endings."""
    lines = []
    for b in detections.boxes:
        lines.append(
            f"{b.class_id} {b.cx_norm:.6f} {b.cy_norm:.6f} "
            f"{b.w_norm:.6f} {b.h_norm:.6f} {b.confidence:.6f}\n"
        )
    return "".join(lines)


def centroid(box: BoundingBox, intrinsics: CameraIntrinsics) -> ImagePoint:
    """Box center in pixel coordinates, sub-pixel, never rounded."""
    return ImagePoint(box.cx_norm * intrinsics.width_px,
                      box.cy_norm * intrinsics.height_px)


def label_filename(prefix: str, frame_id: int, side: Side) -> str:
    return f"{prefix}_{frame_id}_{side.value}.txt"


_LABEL_RE = re.compile(r"^(?P<prefix>.+)_(?P<frame>\d+)_(?P<side>left|right)\.txt$")


def scan_label_dir(directory: str | Path) -> tuple[list[tuple[int, Path, Path]], list[int]]:
    """Find stereo label-file pairs under a directory.

    Returns (pairs, incomplete) where pairs is a list of
    (frame_id, left_path, right_path) sorted by frame_id, and incomplete
    holds frame ids that have only one side on disk.
    """
    directory = Path(directory)
    sides: dict[int, dict[str, Path]] = {}
    for path in directory.iterdir():
        m = _LABEL_RE.match(path.name)
        if m is None:
            continue
        fid = int(m.group("frame"))
        sides.setdefault(fid, {})[m.group("side")] = path
    pairs = []
    incomplete = []
    for fid in sorted(sides):
        found = sides[fid]
        if "left" in found and "right" in found:
            pairs.append((fid, found["left"], found["right"]))
        else:
            incomplete.append(fid)
    return pairs, incomplete


def read_stereo_frame(frame_id: int, left_path: Path, right_path: Path) -> StereoFrame:
    left = parse_label_file(left_path.read_bytes(), frame_id, Side.LEFT)
    right = parse_label_file(right_path.read_bytes(), frame_id, Side.RIGHT)
    return StereoFrame(frame_id=frame_id, left=left, right=right)
