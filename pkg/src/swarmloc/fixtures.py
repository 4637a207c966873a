"""Golden-data fixtures: worked examples executed as tests.

Each fixture is a JSON file naming an operation, its inputs, and the
expected outputs with per-key tolerance and provenance tags. The shipped
set lives in the package's fixtures/ directory; docs and tests share it,
so every number quoted in the README is also asserted in CI.

Provenance tags: "published" for values reproduced from previously
reported results, "derived" for values recomputed independently by hand
or brute force, "trivial" for values evident from the definitions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

from .evaluate import error_rows_from_disparities
from .geometry import (
    CameraIntrinsics,
    Side,
    StereoRig,
    WorldPoint,
    disparity,
    project,
    triangulate_depth,
)

PROVENANCE_TAGS = ("published", "derived", "trivial")


class FixtureMalformedError(ValueError):
    """Fixture file violates the fixture schema."""


@dataclass(frozen=True)
class GoldenFixture:
    name: str
    operation: str
    inputs: dict
    expected: dict          # key -> scalar or list of numbers
    tolerance: dict         # key -> absolute tolerance
    provenance: dict        # key -> tag in PROVENANCE_TAGS


@dataclass(frozen=True)
class FixtureCheck:
    key: str
    passed: bool
    expected: object
    observed: object
    tolerance: float
    provenance: str


@dataclass(frozen=True)
class FixtureReport:
    name: str
    passed: bool
    checks: tuple[FixtureCheck, ...]


def _op_triangulate_depths(inputs: dict) -> dict:
    # A unit-pitch, unit-focal rig carrying an explicit depth constant:
    # exercises the real override path of triangulate_depth.
    rig = StereoRig(
        intrinsics=CameraIntrinsics(1.0, 1.0, (0.0, 0.0), (1, 1)),
        baseline_m=1.0,
        depth_constant_override=float(inputs["depth_constant"]),
    )
    return {"depths_m": [triangulate_depth(dx, rig) for dx in inputs["disparities_px"]]}


def _op_depth_error_rows(inputs: dict) -> dict:
    rows = error_rows_from_disparities(
        inputs["disparities_px"], float(inputs["depth_constant"]),
        inputs["ground_truths_m"],
    )
    return {
        "depths_m": [r.z_depth_m for r in rows],
        "error_pcts": [r.error_pct for r in rows],
        "mean_error_pct": sum(r.error_pct for r in rows) / len(rows),
    }


def _op_stereo_project(inputs: dict) -> dict:
    width, height = inputs["resolution"]
    # pixel pitch of 1 m/px keeps focal_length_px exactly equal to the input
    rig = StereoRig(
        intrinsics=CameraIntrinsics(
            focal_length_m=float(inputs["focal_length_px"]),
            pixel_pitch_m=1.0,
            principal_point=tuple(inputs["principal_point"]),
            resolution=(int(width), int(height)),
        ),
        baseline_m=float(inputs["baseline_m"]),
    )
    point = WorldPoint(*inputs["point_m"])
    left = project(point, rig, Side.LEFT)
    right = project(point, rig, Side.RIGHT)
    dx = disparity(left.u, right.u)
    return {
        "left_u": left.u, "left_v": left.v,
        "right_u": right.u, "right_v": right.v,
        "disparity_px": dx,
        "depth_m": triangulate_depth(dx, rig),
    }


_OPERATIONS: dict[str, Callable[[dict], dict]] = {
    "triangulate_depths": _op_triangulate_depths,
    "depth_error_rows": _op_depth_error_rows,
    "stereo_project": _op_stereo_project,
}


def load_fixture(path: str | Path) -> GoldenFixture:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FixtureMalformedError(f"{path}: {exc}") from exc
    for key in ("name", "operation", "inputs", "expected", "tolerance", "provenance"):
        if key not in data:
            raise FixtureMalformedError(f"{path}: missing field {key!r}")
    if data["operation"] not in _OPERATIONS:
        raise FixtureMalformedError(f"{path}: unknown operation {data['operation']!r}")
    expected, tolerance, provenance = data["expected"], data["tolerance"], data["provenance"]
    if not (isinstance(expected, dict) and isinstance(tolerance, dict)
            and isinstance(provenance, dict)):
        raise FixtureMalformedError(f"{path}: expected/tolerance/provenance must be objects")
    for key in expected:
        if key not in tolerance:
            raise FixtureMalformedError(f"{path}: no tolerance for expected key {key!r}")
        if provenance.get(key) not in PROVENANCE_TAGS:
            raise FixtureMalformedError(
                f"{path}: expected key {key!r} needs a provenance tag from {PROVENANCE_TAGS}")
    return GoldenFixture(
        name=data["name"],
        operation=data["operation"],
        inputs=data["inputs"],
        expected=expected,
        tolerance=tolerance,
        provenance=provenance,
    )


def _within(observed, expected, tol: float) -> bool:
    if isinstance(expected, list):
        if not isinstance(observed, list) or len(observed) != len(expected):
            return False
        return all(_within(o, e, tol) for o, e in zip(observed, expected))
    return abs(float(observed) - float(expected)) <= tol


def run_fixture(fixture: GoldenFixture) -> FixtureReport:
    """Execute the fixture's operation and compare every expected key."""
    outputs = _OPERATIONS[fixture.operation](fixture.inputs)
    checks = []
    for key, expected in fixture.expected.items():
        if key not in outputs:
            raise FixtureMalformedError(
                f"{fixture.name}: operation {fixture.operation!r} does not "
                f"produce output {key!r}")
        tol = float(fixture.tolerance[key])
        observed = outputs[key]
        checks.append(FixtureCheck(
            key=key,
            passed=_within(observed, expected, tol),
            expected=expected,
            observed=observed,
            tolerance=tol,
            provenance=fixture.provenance[key],
        ))
    return FixtureReport(
        name=fixture.name,
        passed=all(c.passed for c in checks),
        checks=tuple(checks),
    )


def builtin_fixture_paths() -> list[Path]:
    root = resources.files("swarmloc").joinpath("fixtures")
    return sorted(Path(str(entry)) for entry in root.iterdir()
                  if entry.name.endswith(".json"))


def run_builtin_fixtures() -> list[FixtureReport]:
    return [run_fixture(load_fixture(p)) for p in builtin_fixture_paths()]
