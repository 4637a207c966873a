import math

import numpy as np
import pytest

from swarmloc.association import (
    AssociationConfig,
    TooManyBoxesError,
    associate,
    brute_force_associate,
)
from swarmloc.detection_io import BoundingBox, DetectionSet, StereoFrame
from swarmloc.geometry import CameraIntrinsics, Side, StereoRig
from swarmloc.simulate import SceneConfig, generate_scene

INTR = CameraIntrinsics(0.008, 8e-6, (640.0, 360.0), (1280, 720))
CFG = AssociationConfig()
W, H = INTR.resolution


def box(u_px, v_px, w_px=60.0, h_px=40.0, class_id=0, conf=1.0):
    return BoundingBox(class_id, u_px / W, v_px / H, w_px / W, h_px / H, conf)


def frame(left_boxes, right_boxes, frame_id=0):
    return StereoFrame(
        frame_id=frame_id,
        left=DetectionSet(frame_id, Side.LEFT, tuple(left_boxes)),
        right=DetectionSet(frame_id, Side.RIGHT, tuple(right_boxes)),
    )


def random_frame(rng, n_left, n_right):
    def boxes(n):
        out = []
        for _ in range(n):
            out.append(BoundingBox(
                0,
                float(rng.uniform(0.05, 0.95)),
                float(rng.uniform(0.05, 0.95)),
                float(rng.uniform(0.01, 0.3)),
                float(rng.uniform(0.01, 0.3)),
                1.0,
            ))
        return tuple(out)
    return frame(boxes(n_left), boxes(n_right))


def total_cost(pairs):
    return sum(p.cost for p in sorted(pairs, key=lambda p: p.left_index))


class TestGates:
    def test_single_candidate_pair_matches(self):
        f = frame([box(700, 300)], [box(600, 300, w_px=58.0)])
        pairs = associate(f, INTR, CFG)
        assert [(p.left_index, p.right_index) for p in pairs] == [(0, 0)]
        # same row, so cost reduces to the size term
        expected = CFG.size_weight * abs(math.log((60 * 40) / (58 * 40)))
        assert pairs[0].cost == pytest.approx(expected)

    def test_negative_disparity_gated_out(self):
        f = frame([box(100, 300)], [box(600, 300)])
        assert associate(f, INTR, CFG) == []

    def test_vertical_gate_excludes_distant_rows(self):
        dy = CFG.max_y_diff_frac * H + 5
        f = frame([box(700, 300)], [box(600, 300 + dy)])
        assert associate(f, INTR, CFG) == []

    def test_disparity_above_maximum_gated_out(self):
        cfg = AssociationConfig(max_disparity_px=50.0)
        f = frame([box(700, 300)], [box(600, 300)])
        assert associate(f, INTR, cfg) == []

    def test_returned_pairs_satisfy_gates(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            f = random_frame(rng, int(rng.integers(0, 6)), int(rng.integers(0, 6)))
            for p in associate(f, INTR, CFG):
                lb = f.left.boxes[p.left_index]
                rb = f.right.boxes[p.right_index]
                disp = (lb.cx_norm - rb.cx_norm) * W
                assert CFG.min_disparity_px <= disp <= W
                assert abs(lb.cy_norm - rb.cy_norm) * H <= CFG.max_y_diff_frac * H + 1e-9


class TestMatching:
    def test_two_drones_matched_by_row_not_file_order(self):
        # file order swapped between sides; v-residual decides
        f = frame(
            [box(700, 200), box(720, 500)],
            [box(640, 500, w_px=62.0), box(620, 200, w_px=58.0)],
        )
        pairs = associate(f, INTR, CFG)
        assert {(p.left_index, p.right_index) for p in pairs} == {(0, 1), (1, 0)}
        oracle = brute_force_associate(f, INTR, CFG)
        assert {(p.left_index, p.right_index) for p in oracle} == {(0, 1), (1, 0)}

    def test_empty_input_gives_empty_output(self):
        f = frame([], [])
        assert associate(f, INTR, CFG) == []
        assert brute_force_associate(f, INTR, CFG) == []

    def test_injective_matching(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            f = random_frame(rng, 5, 5)
            pairs = associate(f, INTR, CFG)
            assert len({p.left_index for p in pairs}) == len(pairs)
            assert len({p.right_index for p in pairs}) == len(pairs)

    def test_unmatched_detections_are_omitted(self):
        f = frame([box(700, 300), box(700, 650)], [box(600, 300)])
        pairs = associate(f, INTR, CFG)
        assert [(p.left_index, p.right_index) for p in pairs] == [(0, 0)]


class TestOracleEquivalence:
    def test_matches_brute_force_on_random_frames(self):
        rng = np.random.default_rng(8)
        for _ in range(300):
            f = random_frame(rng, int(rng.integers(0, 6)), int(rng.integers(0, 6)))
            fast = associate(f, INTR, CFG)
            slow = brute_force_associate(f, INTR, CFG)
            assert [(p.left_index, p.right_index) for p in fast] == \
                   [(p.left_index, p.right_index) for p in slow]
            assert total_cost(fast) == total_cost(slow)

    def test_three_by_three_equals_exhaustive_minimum(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            f = random_frame(rng, 3, 3)
            fast = associate(f, INTR, CFG)
            slow = brute_force_associate(f, INTR, CFG)
            assert [(p.left_index, p.right_index) for p in fast] == \
                   [(p.left_index, p.right_index) for p in slow]

    def test_duplicate_right_boxes_tie_break_lexicographic(self):
        dup = box(600, 300)
        f = frame([box(700, 300), box(701, 300)], [dup, dup])
        fast = associate(f, INTR, CFG)
        slow = brute_force_associate(f, INTR, CFG)
        assert [(p.left_index, p.right_index) for p in fast] == [(0, 0), (1, 1)]
        assert [(p.left_index, p.right_index) for p in slow] == [(0, 0), (1, 1)]

    def test_duplicate_left_boxes_tie_break_lexicographic(self):
        dup = box(700, 300)
        f = frame([dup, dup], [box(600, 300)])
        fast = associate(f, INTR, CFG)
        slow = brute_force_associate(f, INTR, CFG)
        assert [(p.left_index, p.right_index) for p in fast] == [(0, 0)]
        assert [(p.left_index, p.right_index) for p in slow] == [(0, 0)]


class TestPermutationInvariance:
    def test_shuffling_preserves_matched_set(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            f = random_frame(rng, 4, 4)
            base = {(p.left_index, p.right_index) for p in associate(f, INTR, CFG)}
            perm_l = rng.permutation(4)
            perm_r = rng.permutation(4)
            shuffled = frame(
                [f.left.boxes[i] for i in perm_l],
                [f.right.boxes[j] for j in perm_r],
            )
            got = {
                (int(perm_l[p.left_index]), int(perm_r[p.right_index]))
                for p in associate(shuffled, INTR, CFG)
            }
            assert got == base


class TestBruteForceBounds:
    def test_nine_by_nine_exceeds_bound(self):
        f = random_frame(np.random.default_rng(1), 9, 9)
        with pytest.raises(TooManyBoxesError):
            brute_force_associate(f, INTR, CFG)

    def test_eight_by_eight_is_accepted(self):
        f = random_frame(np.random.default_rng(1), 8, 8)
        brute_force_associate(f, INTR, CFG)


class TestOnSimulatedFrames:
    def test_recovers_ground_truth_correspondence(self):
        intr = CameraIntrinsics(0.008, 8e-6, (640.0, 360.0), (1280, 720))
        rig = StereoRig(intr, 0.5)
        cfg = SceneConfig(num_targets=4, depth_range_m=(4.0, 9.0),
                          lateral_range_m=(-1.0, 1.0), num_frames=100, rng_seed=77)
        frames, truth = generate_scene(cfg, rig)
        truth_by_frame = {}
        for rec in truth:
            if rec.left_index is not None and rec.right_index is not None:
                truth_by_frame.setdefault(rec.frame_id, {})[rec.left_index] = rec.right_index
        mismatches = 0
        matched = 0
        for f in frames:
            expected = truth_by_frame.get(f.frame_id, {})
            pairs = associate(f, intr, CFG)
            assert len(pairs) == len(expected)
            for p in pairs:
                matched += 1
                if expected[p.left_index] != p.right_index:
                    mismatches += 1
        assert matched > 300
        assert mismatches == 0


class TestConfigValidation:
    @pytest.mark.parametrize("kwargs", [
        dict(max_y_diff_frac=0.0),
        dict(max_y_diff_frac=1.5),
        dict(size_weight=0.0),
        dict(min_disparity_px=0.0),
        dict(max_disparity_px=-1.0),
        dict(min_disparity_px=10.0, max_disparity_px=5.0),
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            AssociationConfig(**kwargs)
