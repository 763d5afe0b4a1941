import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from basetrack.core import (
    BoundingBox,
    CameraMotion,
    Detection,
    FrameData,
    GroundTruthBox,
    bbox_to_corners,
    corners_to_bbox,
    iou,
    iou_matrix,
)

coord = st.floats(-1e4, 1e4, allow_nan=False)
size = st.floats(0.5, 1e3, allow_nan=False)
boxes = st.builds(BoundingBox, coord, coord, size, size)


def test_iou_identical():
    b = BoundingBox(5, 5, 10, 10)
    assert iou(b, b) == 1.0


def test_iou_disjoint():
    assert iou(BoundingBox(0, 0, 10, 10), BoundingBox(100, 0, 10, 10)) == 0.0


def test_iou_half_shift_is_one_third():
    a = BoundingBox(5, 5, 10, 10)
    b = BoundingBox(10, 5, 10, 10)
    assert iou(a, b) == pytest.approx(1 / 3, abs=1e-15)


def test_corners():
    assert bbox_to_corners(BoundingBox(5, 5, 10, 10)) == (0, 0, 10, 10)
    assert bbox_to_corners(BoundingBox(0, 0, 2, 4)) == (-1, -2, 1, 2)


def test_corners_round_trip_exact_on_dyadic_values():
    c = (1.5, -2.25, 7.75, 12.0)
    assert bbox_to_corners(corners_to_bbox(*c)) == c


@given(boxes, boxes)
def test_iou_symmetric_and_bounded(a, b):
    v = iou(a, b)
    assert 0.0 <= v <= 1.0
    assert v == pytest.approx(iou(b, a), abs=1e-12)


@given(boxes)
def test_iou_self_is_one(a):
    assert iou(a, a) == pytest.approx(1.0, abs=1e-12)


@given(st.lists(boxes, min_size=1, max_size=5), st.lists(boxes, min_size=1, max_size=5))
def test_iou_matrix_matches_scalar(a, b):
    A = np.array([x.as_array() for x in a])
    B = np.array([x.as_array() for x in b])
    M = iou_matrix(A, B)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            assert M[i, j] == pytest.approx(iou(x, y), abs=1e-12)


@given(boxes)
def test_corner_conversion_round_trip(b):
    back = corners_to_bbox(*bbox_to_corners(b))
    scale = max(abs(b.cx), abs(b.cy), b.w, b.h)
    for u, v in zip(back.as_array(), b.as_array()):
        assert abs(u - v) <= 1e-12 * scale


def test_from_tlwh_keeps_file_corner():
    b = BoundingBox.from_tlwh(0.1, 0.7, 0.3, 0.9)
    assert b.tlwh() == (0.1, 0.7, 0.3, 0.9)
    assert b.cx == 0.1 + 0.15
    # the kept corner does not affect equality
    assert b == BoundingBox(b.cx, b.cy, b.w, b.h)


@pytest.mark.parametrize("args", [(0, 0, 0, 1), (0, 0, 1, -1), (math.nan, 0, 1, 1), (0, math.inf, 1, 1)])
def test_invalid_boxes(args):
    with pytest.raises(ValueError):
        BoundingBox(*args)


def test_detection_validation():
    b = BoundingBox(0, 0, 1, 1)
    with pytest.raises(ValueError):
        Detection(0, b, 0.5)
    with pytest.raises(ValueError):
        Detection(1, b, 1.5)
    with pytest.raises(ValueError):
        GroundTruthBox(1, 0, b)


def test_camera_motion():
    cm = CameraMotion.identity()
    assert cm.is_identity and cm.is_invertible
    assert not CameraMotion(np.zeros((2, 2)), np.zeros(2)).is_invertible
    assert CameraMotion(np.eye(2), [1, 2]) == CameraMotion(np.eye(2), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        cm.warp[0, 0] = 2.0


def test_frame_data_sorted_by_confidence():
    b = BoundingBox(0, 0, 1, 1)
    fd = FrameData(3, (Detection(3, b, 0.2), Detection(3, b, 0.9), Detection(3, b, 0.5)))
    assert [d.confidence for d in fd.detections] == [0.9, 0.5, 0.2]
    assert fd.camera_motion.is_identity
