import numpy as np
import pytest

from swarmloc.detection_io import (
    BoundingBox,
    DetectionSet,
    MalformedLineError,
    OutOfRangeError,
    StereoFrame,
    centroid,
    label_filename,
    parse_label_file,
    read_stereo_frame,
    scan_label_dir,
    write_label_file,
)
from swarmloc.geometry import CameraIntrinsics, Side

INTR = CameraIntrinsics(0.008, 8e-6, (640.0, 360.0), (1280, 720))


def random_box(rng, class_id=0):
    return BoundingBox(
        class_id=class_id,
        cx_norm=float(rng.uniform(0, 1)),
        cy_norm=float(rng.uniform(0, 1)),
        w_norm=float(rng.uniform(0.01, 1)),
        h_norm=float(rng.uniform(0.01, 1)),
        confidence=float(rng.uniform(0, 1)),
    )


class TestParse:
    def test_single_line_defaults_confidence(self):
        ds = parse_label_file("0 0.5 0.5 0.1 0.1", 0, Side.LEFT)
        assert len(ds.boxes) == 1
        box = ds.boxes[0]
        assert box.class_id == 0
        assert (box.cx_norm, box.cy_norm) == (0.5, 0.5)
        assert box.confidence == 1.0

    def test_two_boxes_keep_file_order(self):
        text = "0 0.5 0.5 0.1 0.1 0.94\n0 0.2 0.3 0.05 0.04 0.75"
        ds = parse_label_file(text, 3, Side.RIGHT)
        assert [b.confidence for b in ds.boxes] == [0.94, 0.75]
        assert ds.boxes[1].cx_norm == 0.2
        assert ds.frame_id == 3 and ds.side is Side.RIGHT

    def test_center_outside_image_is_out_of_range(self):
        with pytest.raises(OutOfRangeError) as err:
            parse_label_file("0 1.5 0.5 0.1 0.1", 0, Side.LEFT)
        assert err.value.line_no == 1

    def test_error_reports_offending_line_number(self):
        text = "0 0.5 0.5 0.1 0.1\n\n# comment\n0 0.5 0.5 0.1 1.5"
        with pytest.raises(OutOfRangeError) as err:
            parse_label_file(text, 0, Side.LEFT)
        assert err.value.line_no == 4

    def test_wrong_field_count_is_malformed(self):
        with pytest.raises(MalformedLineError):
            parse_label_file("0 0.5 0.5 0.1", 0, Side.LEFT)

    def test_non_numeric_field_is_malformed(self):
        with pytest.raises(MalformedLineError):
            parse_label_file("0 0.5 oops 0.1 0.1", 0, Side.LEFT)

    def test_skips_comments_blanks_and_accepts_crlf(self):
        data = b"# header\r\n0 0.5 0.5 0.1 0.1\r\n\r\n0 0.25 0.75 0.2 0.2 0.5\r\n"
        ds = parse_label_file(data, 0, Side.LEFT)
        assert len(ds.boxes) == 2

    def test_truncated_box_is_allowed(self):
        # center inside, box spilling past the border
        ds = parse_label_file("0 0.05 0.5 0.3 0.2", 0, Side.LEFT)
        assert ds.boxes[0].w_norm == 0.3


class TestWrite:
    def test_empty_set_gives_empty_file(self):
        assert write_label_file(DetectionSet(0, Side.LEFT, ())) == ""

    def test_exact_format(self):
        ds = DetectionSet(0, Side.LEFT, (BoundingBox(0, 0.5, 0.5, 0.1, 0.1, 1.0),))
        assert write_label_file(ds) == "0 0.500000 0.500000 0.100000 0.100000 1.000000\n"

    def test_round_trip_100_random_boxes(self):
        rng = np.random.default_rng(5)
        boxes = tuple(random_box(rng) for _ in range(100))
        ds = DetectionSet(7, Side.RIGHT, boxes)
        parsed = parse_label_file(write_label_file(ds), 7, Side.RIGHT)
        assert len(parsed.boxes) == 100
        for orig, back in zip(ds.boxes, parsed.boxes):
            assert back.class_id == orig.class_id
            for name in ("cx_norm", "cy_norm", "w_norm", "h_norm", "confidence"):
                assert abs(getattr(back, name) - getattr(orig, name)) <= 1e-6


class TestCentroid:
    def test_image_center(self):
        box = BoundingBox(0, 0.5, 0.5, 0.1, 0.1)
        assert centroid(box, INTR) == (640.0, 360.0)

    def test_quarter_position(self):
        box = BoundingBox(0, 0.25, 0.75, 0.1, 0.1)
        assert centroid(box, INTR) == (320.0, 540.0)

    def test_origin_corner(self):
        box = BoundingBox(0, 0.0, 0.0, 0.5, 0.5)
        assert centroid(box, INTR) == (0.0, 0.0)

    def test_independent_of_box_size(self):
        small = BoundingBox(0, 0.3, 0.4, 0.01, 0.01)
        large = BoundingBox(0, 0.3, 0.4, 0.9, 0.9)
        assert centroid(small, INTR) == centroid(large, INTR)

    def test_linear_in_center_coordinates(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            cx, cy = rng.uniform(0, 0.5, 2)
            a = centroid(BoundingBox(0, cx, cy, 0.1, 0.1), INTR)
            b = centroid(BoundingBox(0, 2 * cx, 2 * cy, 0.1, 0.1), INTR)
            assert b.u == pytest.approx(2 * a.u)
            assert b.v == pytest.approx(2 * a.v)


class TestFrameBinding:
    def test_filename_convention(self):
        assert label_filename("frame", 12, Side.LEFT) == "frame_12_left.txt"
        assert label_filename("run3", 0, Side.RIGHT) == "run3_0_right.txt"

    def test_scan_finds_pairs_and_incomplete(self, tmp_path):
        (tmp_path / "frame_0_left.txt").write_text("0 0.5 0.5 0.1 0.1\n")
        (tmp_path / "frame_0_right.txt").write_text("0 0.4 0.5 0.1 0.1\n")
        (tmp_path / "frame_1_left.txt").write_text("")
        (tmp_path / "unrelated.csv").write_text("x\n")
        pairs, incomplete = scan_label_dir(tmp_path)
        assert [fid for fid, _, _ in pairs] == [0]
        assert incomplete == [1]

    def test_read_stereo_frame(self, tmp_path):
        left = tmp_path / "frame_2_left.txt"
        right = tmp_path / "frame_2_right.txt"
        left.write_text("0 0.5 0.5 0.1 0.1\n")
        right.write_text("0 0.4 0.5 0.1 0.1\n")
        frame = read_stereo_frame(2, left, right)
        assert frame.frame_id == 2
        assert len(frame.left.boxes) == 1 and len(frame.right.boxes) == 1

    def test_stereo_frame_rejects_mismatched_ids(self):
        left = DetectionSet(0, Side.LEFT, ())
        right = DetectionSet(1, Side.RIGHT, ())
        with pytest.raises(ValueError):
            StereoFrame(0, left, right)

    def test_stereo_frame_rejects_swapped_sides(self):
        left = DetectionSet(0, Side.RIGHT, ())
        right = DetectionSet(0, Side.LEFT, ())
        with pytest.raises(ValueError):
            StereoFrame(0, left, right)


class TestBoundingBoxValidation:
    @pytest.mark.parametrize("kwargs", [
        dict(cx_norm=-0.1),
        dict(cy_norm=1.2),
        dict(w_norm=0.0),
        dict(h_norm=1.5),
        dict(confidence=-0.5),
        dict(confidence=1.5),
    ])
    def test_rejects_out_of_range_fields(self, kwargs):
        base = dict(class_id=0, cx_norm=0.5, cy_norm=0.5, w_norm=0.1, h_norm=0.1,
                    confidence=1.0)
        base.update(kwargs)
        with pytest.raises(ValueError):
            BoundingBox(**base)
