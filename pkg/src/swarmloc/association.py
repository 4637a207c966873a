"""Pair left-image detections with right-image detections.

For a rectified parallel rig a true stereo correspondence keeps the same
image row, so candidate pairs are gated on vertical residual and on a
plausible disparity range, then scored by

    cost = |v_L - v_R| / image_height + size_weight * |ln(area_L / area_R)|

and resolved by a minimum-cost assignment of maximum cardinality over the
gated pairs. Unmatched detections on either side are dropped.

`associate` is the production path (Hungarian assignment via scipy);
`brute_force_associate` enumerates every injective matching and exists as
an independent oracle for tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .detection_io import StereoFrame
from .geometry import CameraIntrinsics

_FORBIDDEN = 1e9   # exceeds any achievable sum of real pair costs


class TooManyBoxesError(ValueError):
    """Input exceeds the brute-force enumeration bound."""


@dataclass(frozen=True)
class MatchedPair:
    left_index: int
    right_index: int
    cost: float


@dataclass(frozen=True)
class AssociationConfig:
    max_y_diff_frac: float = 0.05      # vertical gate, fraction of image height
    size_weight: float = 0.5           # weight of the log-area-ratio term
    min_disparity_px: float = 1.0
    max_disparity_px: float | None = None   # None: image width

    def __post_init__(self) -> None:
        if not 0.0 < self.max_y_diff_frac <= 1.0:
            raise ValueError(f"max_y_diff_frac must be in (0, 1], got {self.max_y_diff_frac}")
        if self.size_weight <= 0.0:
            raise ValueError(f"size_weight must be > 0, got {self.size_weight}")
        if self.min_disparity_px <= 0.0:
            raise ValueError(f"min_disparity_px must be > 0, got {self.min_disparity_px}")
        if self.max_disparity_px is not None:
            if self.max_disparity_px <= 0.0:
                raise ValueError(f"max_disparity_px must be > 0, got {self.max_disparity_px}")
            if self.max_disparity_px < self.min_disparity_px:
                raise ValueError("max_disparity_px < min_disparity_px")


def _pair_costs(frame: StereoFrame, intrinsics: CameraIntrinsics,
                cfg: AssociationConfig) -> dict[tuple[int, int], float]:
    """Cost for every (left_index, right_index) pair passing all gates."""
    width = float(intrinsics.width_px)
    height = float(intrinsics.height_px)
    max_disp = cfg.max_disparity_px if cfg.max_disparity_px is not None else width
    max_dy = cfg.max_y_diff_frac * height

    left = frame.left.boxes
    right = frame.right.boxes
    costs: dict[tuple[int, int], float] = {}
    for i, lb in enumerate(left):
        u_l = lb.cx_norm * width
        v_l = lb.cy_norm * height
        area_l = lb.w_norm * lb.h_norm
        for j, rb in enumerate(right):
            disp = u_l - rb.cx_norm * width
            if disp < cfg.min_disparity_px or disp > max_disp:
                continue
            dy = abs(v_l - rb.cy_norm * height)
            if dy > max_dy:
                continue
            size_term = abs(math.log(area_l / (rb.w_norm * rb.h_norm)))
            costs[(i, j)] = dy / height + cfg.size_weight * size_term
    return costs


def _lex_normalize(matches: list[tuple[int, int]],
                   costs: dict[tuple[int, int], float]) -> list[tuple[int, int]]:
    """Resolve exact-cost ties toward the lexicographically smallest pair list.

    The assignment solver picks an arbitrary optimum when several matchings
    share the same total cost (identical duplicate boxes, symmetric scenes).
    Swap cost-neutral pairs / reassign to cost-equal free columns until no
    such move lowers the sorted pair list lexicographically.
    """
    matches = sorted(matches)
    changed = True
    while changed:
        changed = False
        used_right = {j for _, j in matches}
        used_left = {i for i, _ in matches}
        # cost-equal reassignment to a smaller free right index
        for idx, (i, j) in enumerate(matches):
            c = costs[(i, j)]
            for j_alt in range(j):
                if j_alt in used_right:
                    continue
                alt = costs.get((i, j_alt))
                if alt is not None and alt == c:
                    matches[idx] = (i, j_alt)
                    used_right.discard(j)
                    used_right.add(j_alt)
                    changed = True
                    break
        # cost-equal reassignment to a smaller free left index
        for idx, (i, j) in enumerate(matches):
            c = costs[(i, j)]
            for i_alt in range(i):
                if i_alt in used_left:
                    continue
                alt = costs.get((i_alt, j))
                if alt is not None and alt == c:
                    matches[idx] = (i_alt, j)
                    used_left.discard(i)
                    used_left.add(i_alt)
                    changed = True
                    break
        # cost-neutral two-pair swaps
        for a in range(len(matches)):
            i1, j1 = matches[a]
            for b in range(a + 1, len(matches)):
                i2, j2 = matches[b]
                if j2 >= j1:
                    continue
                c_swap1 = costs.get((i1, j2))
                c_swap2 = costs.get((i2, j1))
                if c_swap1 is None or c_swap2 is None:
                    continue
                if c_swap1 + c_swap2 == costs[(i1, j1)] + costs[(i2, j2)]:
                    matches[a] = (i1, j2)
                    matches[b] = (i2, j1)
                    changed = True
        matches.sort()
    return matches


def associate(frame: StereoFrame, intrinsics: CameraIntrinsics,
              cfg: AssociationConfig) -> list[MatchedPair]:
    """Minimum-total-cost injective matching of maximum size over gated pairs.

    Ties between equal-cost matchings resolve toward the lexicographically
    smallest (left_index, right_index) list. Empty input gives empty output.
    """
    n = len(frame.left.boxes)
    m = len(frame.right.boxes)
    if n == 0 or m == 0:
        return []
    costs = _pair_costs(frame, intrinsics, cfg)
    if not costs:
        return []
    if len(costs) == 1:
        (i, j), c = next(iter(costs.items()))
        return [MatchedPair(i, j, c)]

    matrix = np.full((n, m), _FORBIDDEN)
    for (i, j), c in costs.items():
        matrix[i, j] = c
    rows, cols = linear_sum_assignment(matrix)
    matches = [(int(i), int(j)) for i, j in zip(rows, cols) if matrix[i, j] < _FORBIDDEN / 2]
    matches = _lex_normalize(matches, costs)
    return [MatchedPair(i, j, costs[(i, j)]) for i, j in matches]


def brute_force_associate(frame: StereoFrame, intrinsics: CameraIntrinsics,
                          cfg: AssociationConfig,
                          max_boxes: int = 8) -> list[MatchedPair]:
    """Exhaustive oracle: enumerate all injective matchings over gated pairs.

    Selects maximum cardinality, then minimum total cost, then the
    lexicographically smallest pair list. Raises TooManyBoxesError when
    either side exceeds max_boxes.
    """
    n = len(frame.left.boxes)
    m = len(frame.right.boxes)
    if min(n, m) > max_boxes:
        raise TooManyBoxesError(
            f"{n} left x {m} right boxes exceeds the enumeration bound of {max_boxes}"
        )
    costs = _pair_costs(frame, intrinsics, cfg)
    if not costs:
        return []

    gated_by_left: dict[int, list[int]] = {}
    for (i, j) in costs:
        gated_by_left.setdefault(i, []).append(j)
    left_indices = sorted(gated_by_left)

    best: tuple[int, float, list[tuple[int, int]]] | None = None   # (-size, cost, pairs)

    def recurse(pos: int, used: set[int], pairs: list[tuple[int, int]], total: float) -> None:
        nonlocal best
        if pos == len(left_indices):
            key = (-len(pairs), total, list(pairs))
            if best is None or key < best:
                best = key
            return
        i = left_indices[pos]
        for j in gated_by_left[i]:
            if j in used:
                continue
            used.add(j)
            pairs.append((i, j))
            recurse(pos + 1, used, pairs, total + costs[(i, j)])
            pairs.pop()
            used.discard(j)
        recurse(pos + 1, used, pairs, total)   # leave i unmatched

    recurse(0, set(), [], 0.0)
    assert best is not None
    return [MatchedPair(i, j, costs[(i, j)]) for i, j in best[2]]
