import shutil
from pathlib import Path

import numpy as np
import pytest

from rgbt_tracker.data import (RGBTFrame, Sequence, SyntheticSpec, detect_layout, find_sequences,
                               load_gtot_sequence, load_rgbt234_sequence, load_sequence,
                               motion_position, parse_annotation_file, read_image, save_gtot,
                               synthesize_sequence)
from rgbt_tracker.errors import (CountMismatchError, MalformedAnnotationError,
                                 MissingDirectoryError, ShapeMismatchError)
from rgbt_tracker.geometry import BoundingBox, iou

FIXTURES = Path(__file__).parent / "fixtures"


def test_gtot_fixture_loads():
    seq = load_gtot_sequence(FIXTURES / "gtot_seq")
    assert seq.name == "gtot_seq"
    assert len(seq) == 3
    assert seq.attributes == {"OCC", "FM"}
    assert seq.ground_truth[0] == BoundingBox(6, 5, 6, 5)
    assert seq.ground_truth[2] == BoundingBox(8, 6, 6, 5)
    rgb, thermal = seq.frames[1].images()
    assert rgb.shape == thermal.shape == (24, 32, 3)
    assert tuple(rgb[0, 0]) == (200, 10, 30)
    assert tuple(rgb[3, 3]) == (10, 50, 100)
    assert (thermal[..., 0] == thermal[..., 2]).all()
    assert thermal[7, 8, 0] == 240


def test_gtot_infrared_ground_truth_source():
    seq = load_gtot_sequence(FIXTURES / "gtot_seq", gt_source="infrared")
    assert seq.ground_truth[2] == BoundingBox(9, 6, 6, 5)


def test_rgbt234_fixture_loads():
    seq = load_rgbt234_sequence(FIXTURES / "rgbt234_seq")
    assert [f.paths[0].name for f in seq.frames] == ["1v.png", "2v.png", "10v.png"]
    assert seq.ground_truth[:2] == [BoundingBox(6, 5, 6, 5), BoundingBox(7, 5, 6, 5)]
    assert seq.ground_truth[2] is None  # zero-size line marks an absent target
    assert seq.attributes == {"FM", "LI"}


def test_rgbt234_polygon_annotations():
    seq = load_rgbt234_sequence(FIXTURES / "rgbt234_seq", gt_source="infrared")
    assert seq.ground_truth[2] == BoundingBox(8, 6, 6, 5)


def test_layout_detection_and_discovery(tmp_path):
    assert detect_layout(FIXTURES / "gtot_seq") == "gtot"
    assert detect_layout(FIXTURES / "rgbt234_seq") == "rgbt234"
    assert load_sequence(FIXTURES / "rgbt234_seq").name == "rgbt234_seq"
    assert [p.name for p in find_sequences(FIXTURES)] == ["gtot_seq", "rgbt234_seq"]
    with pytest.raises(MissingDirectoryError):
        detect_layout(tmp_path)


def test_missing_directory_errors(tmp_path):
    with pytest.raises(MissingDirectoryError):
        load_gtot_sequence(tmp_path / "nope")
    with pytest.raises(MissingDirectoryError):
        find_sequences(tmp_path / "nope")
    (tmp_path / "v").mkdir()
    with pytest.raises(MissingDirectoryError):
        load_gtot_sequence(tmp_path)
    assert issubclass(MissingDirectoryError, FileNotFoundError)


def test_frame_count_mismatch(tmp_path):
    seq_dir = tmp_path / "seq"
    shutil.copytree(FIXTURES / "gtot_seq", seq_dir)
    (seq_dir / "i" / "00003i.png").unlink()
    with pytest.raises(CountMismatchError):
        load_gtot_sequence(seq_dir)


def test_annotation_count_mismatch(tmp_path):
    seq_dir = tmp_path / "seq"
    shutil.copytree(FIXTURES / "gtot_seq", seq_dir)
    (seq_dir / "groundTruth_v.txt").write_text("6 5 12 10\n")
    with pytest.raises(CountMismatchError):
        load_gtot_sequence(seq_dir)


@pytest.mark.parametrize("text,bad_line", [
    ("1 2 3 4\n1 2 x 4\n", 2),
    ("1 2 3\n", 1),
    ("1,2,3,4\n1,2,3,4,5,6,7,8\n", 2),
])
def test_malformed_annotation_reports_line(tmp_path, text, bad_line):
    path = tmp_path / "gt.txt"
    path.write_text(text)
    with pytest.raises(MalformedAnnotationError) as info:
        parse_annotation_file(path)
    assert info.value.line_no == bad_line
    assert str(bad_line) in str(info.value)


def test_annotation_formats(tmp_path):
    path = tmp_path / "gt.txt"
    path.write_text("10\t20\t30\t40\n\n1.5,2.5,3,4\n")
    assert parse_annotation_file(path) == [BoundingBox(10, 20, 30, 40), BoundingBox(1.5, 2.5, 3, 4)]
    assert parse_annotation_file(path, "corners")[0] == BoundingBox(10, 20, 20, 20)


def test_read_image_grayscale_replicated(tmp_path):
    img = read_image(FIXTURES / "gtot_seq" / "i" / "00001i.png")
    assert img.shape == (24, 32, 3) and img.dtype == np.uint8
    with pytest.raises(FileNotFoundError):
        read_image(tmp_path / "missing.png")


def test_frame_validation():
    with pytest.raises(ShapeMismatchError):
        RGBTFrame(np.zeros((10, 10, 3), np.uint8), np.zeros((10, 12), np.uint8))
    frame = RGBTFrame(np.zeros((10, 10, 3), np.uint8), np.zeros((10, 10), np.uint8))
    assert frame.thermal.shape == (10, 10, 3)
    assert frame.size == (10, 10)
    with pytest.raises(ValueError):
        frame.rgb[0, 0, 0] = 1


def test_sequence_requires_first_box():
    frame = RGBTFrame(np.zeros((8, 8, 3), np.uint8), np.zeros((8, 8, 3), np.uint8))
    with pytest.raises(ValueError):
        Sequence("s", [frame])
    with pytest.raises(ValueError):
        Sequence("s", [])


def test_synthetic_roundtrip_through_gtot_layout(tmp_path):
    spec = SyntheticSpec(frames=4, motion={"type": "linear", "start": [30.25, 40.5],
                                           "velocity": [3.3, -1.7]}, attributes=("FM",))
    seq = synthesize_sequence(spec, 5)
    save_gtot(seq, tmp_path / "s")
    back = load_sequence(tmp_path / "s")
    assert len(back) == 4 and back.attributes == {"FM"}
    for a, b in zip(seq.frames, back.frames):
        np.testing.assert_array_equal(a.rgb, b.rgb)
        np.testing.assert_array_equal(a.thermal, b.thermal)
        # corners are stored, so width/height are recovered up to float rounding
        np.testing.assert_allclose(a.gt.as_array(), b.gt.as_array(), rtol=0, atol=1e-9)


def test_synthetic_is_seeded_and_exact():
    spec = SyntheticSpec(frames=5, motion={"type": "circular", "center": [120, 100],
                                           "radius": 30, "period": 10})
    a = synthesize_sequence(spec, 1)
    b = synthesize_sequence(spec, 1)
    c = synthesize_sequence(spec, 2)
    for fa, fb in zip(a.frames, b.frames):
        np.testing.assert_array_equal(fa.rgb, fb.rgb)
    assert not np.array_equal(a.frames[0].rgb, c.frames[0].rgb)
    for t, box in enumerate(a.ground_truth):
        assert (box.x, box.y) == pytest.approx(motion_position(spec.motion, t))
        assert (box.w, box.h) == (40, 40)


def test_synthetic_thermal_target_is_bright():
    seq = synthesize_sequence(SyntheticSpec(frames=2), 0)
    frame = seq.frames[1]
    box = frame.gt
    thermal = frame.thermal[..., 0].astype(float)
    cy, cx = int(box.cy), int(box.cx)
    assert thermal[cy - 3:cy + 3, cx - 3:cx + 3].mean() > 180
    assert np.median(thermal) < 80


def test_synthetic_spans_hide_target():
    spec = SyntheticSpec(frames=6, occlusion_span=(1, 3), hidden_span=(3, 5), distractors=0)
    seq = synthesize_sequence(spec, 0)
    box = seq.ground_truth[0]
    cy, cx = int(box.cy), int(box.cx)
    bright = [f.thermal[cy, cx, 0] > 150 for f in seq.frames]
    assert bright == [True, True, True, False, False, True]


def test_waypoint_motion():
    motion = {"type": "waypoints", "points": [[0, 10, 20], [4, 30, 20], [8, 30, 60]]}
    assert motion_position(motion, 0) == (10, 20)
    assert motion_position(motion, 2) == (20, 20)
    assert motion_position(motion, 6) == (30, 40)
    assert motion_position(motion, 12) == (30, 60)


def test_synthetic_spec_validation(tmp_path):
    with pytest.raises(ValueError):
        SyntheticSpec(frames=0)
    with pytest.raises(ValueError):
        SyntheticSpec(motion={"type": "teleport"})
    with pytest.raises(ValueError):
        SyntheticSpec.from_dict({"frames": 3, "colour": "red"})
    path = tmp_path / "spec.json"
    path.write_text('{"frames": 3, "seed": 9}')
    spec, seed = SyntheticSpec.load(path)
    assert spec.frames == 3 and seed == 9


def test_gt_inside_frame_for_default_motions():
    spec = SyntheticSpec(frames=10, motion={"type": "linear", "start": [10, 10],
                                            "velocity": [5, 3]})
    seq = synthesize_sequence(spec, 0)
    frame_box = BoundingBox(0, 0, 320, 240)
    assert all(iou(b, frame_box) > 0 for b in seq.ground_truth)
