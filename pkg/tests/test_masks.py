import numpy as np
import pytest

from conftest import random_mask, random_video
from rleseg import (
    FlattenOrder,
    LabelMask,
    ValidationError,
    VideoMask,
    collapse_time_classes,
    composite_class_count,
    expand_time_classes,
    flatten_2d,
    flatten_3d,
    subsample,
    unflatten_2d,
    unflatten_3d,
    upsample,
)


def test_flatten_row_major_example():
    mask = LabelMask(np.array([[0, 1, 1, 0, 1], [1, 0, 0, 1, 1]]), 1)
    assert flatten_2d(mask, FlattenOrder.ROW_MAJOR).tolist() == [0, 1, 1, 0, 1, 1, 0, 0, 1, 1]


def test_flatten_all_zero_and_identity():
    zero = LabelMask(np.zeros((3, 3), dtype=int), 1)
    assert flatten_2d(zero, FlattenOrder.ROW_MAJOR).tolist() == [0] * 9
    assert flatten_2d(zero, FlattenOrder.COLUMN_MAJOR).tolist() == [0] * 9
    one = LabelMask(np.array([[7]]), 7)
    assert flatten_2d(one, FlattenOrder.ROW_MAJOR).tolist() == [7]


def test_flatten_index_formulas():
    rng = np.random.default_rng(0)
    mask = random_mask(rng, 6, 9, 3)
    row = flatten_2d(mask, FlattenOrder.ROW_MAJOR)
    col = flatten_2d(mask, FlattenOrder.COLUMN_MAJOR)
    for _ in range(50):
        y, x = int(rng.integers(0, 6)), int(rng.integers(0, 9))
        assert row[y * 9 + x] == mask.labels[y, x]
        assert col[x * 6 + y] == mask.labels[y, x]


def test_flatten_round_trip_2d():
    rng = np.random.default_rng(1)
    for order in (FlattenOrder.ROW_MAJOR, FlattenOrder.COLUMN_MAJOR):
        for _ in range(20):
            h, w = int(rng.integers(1, 12)), int(rng.integers(1, 12))
            mask = random_mask(rng, h, w, 4)
            back = unflatten_2d(flatten_2d(mask, order), h, w, order)
            assert np.array_equal(back, mask.labels)


def test_flatten_2d_rejects_video_order():
    mask = LabelMask(np.zeros((2, 2), dtype=int), 1)
    with pytest.raises(ValidationError):
        flatten_2d(mask, FlattenOrder.VID_3DC)


def test_flatten_3d_examples():
    zero = VideoMask.from_array(np.zeros((2, 2, 2), dtype=int), 1)
    assert flatten_3d(zero, FlattenOrder.VID_3DC).tolist() == [0] * 8
    vid = VideoMask.from_array(np.array([[[1, 0]], [[1, 1]]]), 1)
    assert flatten_3d(vid, FlattenOrder.VID_3DC).tolist() == [1, 0, 1, 1]
    assert flatten_3d(vid, FlattenOrder.VID_3DF).tolist() == [1, 1, 0, 1]


def test_flatten_3d_index_formulas():
    rng = np.random.default_rng(2)
    n, h, w = 3, 4, 5
    vid = random_video(rng, n, h, w, 2)
    stack = vid.stack()
    c_vec = flatten_3d(vid, FlattenOrder.VID_3DC)
    f_vec = flatten_3d(vid, FlattenOrder.VID_3DF)
    for _ in range(60):
        t = int(rng.integers(0, n))
        y = int(rng.integers(0, h))
        x = int(rng.integers(0, w))
        assert c_vec[t * h * w + y * w + x] == stack[t, y, x]
        assert f_vec[t + n * y + n * h * x] == stack[t, y, x]


def test_flatten_3d_round_trip():
    rng = np.random.default_rng(3)
    for order in (FlattenOrder.VID_3DC, FlattenOrder.VID_3DF):
        vid = random_video(rng, 4, 5, 6, 2)
        back = unflatten_3d(flatten_3d(vid, order), 4, 5, 6, order)
        assert np.array_equal(back, vid.stack())


def test_flatten_3d_rejects_2d_order():
    vid = VideoMask.from_array(np.zeros((2, 2, 2), dtype=int), 1)
    with pytest.raises(ValidationError):
        flatten_3d(vid, FlattenOrder.ROW_MAJOR)


def test_subsample_constant():
    mask = LabelMask(np.ones((4, 4), dtype=int), 1)
    assert subsample(mask, 2).labels.tolist() == [[1, 1], [1, 1]]


def test_subsample_majority_block():
    mask = LabelMask(np.array([[1, 1], [0, 2]]), 2)
    assert subsample(mask, 1).labels.tolist() == [[1]]


def test_subsample_tie_break_prefers_foreground_then_smallest():
    mask = LabelMask(np.array([[0, 0], [1, 2]]), 2)
    assert subsample(mask, 1).labels.tolist() == [[1]]


def test_subsample_background_majority_stays_background():
    mask = LabelMask(np.array([[0, 0], [0, 2]]), 2)
    assert subsample(mask, 1).labels.tolist() == [[0]]


def test_subsample_identity_factor_one():
    rng = np.random.default_rng(4)
    mask = random_mask(rng, 5, 7, 3)
    assert subsample(mask, (5, 7)).same_as(mask)


def test_subsample_rejects_non_integer_factor():
    mask = LabelMask(np.zeros((4, 4), dtype=int), 1)
    with pytest.raises(ValidationError):
        subsample(mask, 3)


def test_upsample_inverts_direction():
    rng = np.random.default_rng(5)
    mask = random_mask(rng, 4, 4, 2)
    up = upsample(mask, 8)
    assert up.height == 8 and subsample(up, 4).same_as(mask)


def test_collapse_examples():
    on_first = VideoMask.from_array(np.array([[[1]], [[0]]]), 1)
    assert collapse_time_classes(on_first).labels[0, 0] == 1
    on_both = VideoMask.from_array(np.array([[[1]], [[1]]]), 1)
    assert collapse_time_classes(on_both).labels[0, 0] == 3
    empty = VideoMask.from_array(np.zeros((4, 1, 1), dtype=int), 1)
    assert collapse_time_classes(empty).labels[0, 0] == 0


def test_collapse_round_trip_and_bound():
    rng = np.random.default_rng(6)
    for c, n in [(1, 2), (2, 3), (3, 4)]:
        vid = random_video(rng, n, 6, 7, c)
        comp = collapse_time_classes(vid)
        assert expand_time_classes(comp, c, n).same_as(vid)
        assert len(np.unique(comp.labels)) <= (c + 1) ** n
        assert comp.num_classes == composite_class_count(c, n)


def test_collapse_capacity_guard():
    vid = VideoMask.from_array(np.zeros((70, 1, 1), dtype=int), 3)
    with pytest.raises(ValidationError):
        collapse_time_classes(vid)


def test_label_mask_validation():
    with pytest.raises(ValidationError):
        LabelMask(np.array([[3]]), 2)
    with pytest.raises(ValidationError):
        LabelMask(np.array([[-1]]), 2)
    with pytest.raises(ValidationError):
        LabelMask(np.zeros((0, 3), dtype=int), 1)
    with pytest.raises(ValidationError):
        VideoMask.from_array(np.zeros((2, 2, 2), dtype=int), 0)
