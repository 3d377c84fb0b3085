import numpy as np
import pytest

from conftest import blobby_mask, random_mask
from rleseg import (
    LabelMask,
    ValidationError,
    augment_patch,
    extract_patches,
    invert_transforms,
    patchify,
    recompose,
)


def test_exact_tiling_grid():
    grid = patchify((8, 8), 4, 4)
    assert grid.num_windows == 4
    assert set(grid.origins) == {(0, 0), (0, 4), (4, 0), (4, 4)}


def test_clamped_final_window():
    grid = patchify((10, 10), 4, 4)
    tops = sorted({o[0] for o in grid.origins})
    lefts = sorted({o[1] for o in grid.origins})
    assert tops == [0, 4, 6] and lefts == [0, 4, 6]
    assert grid.num_windows == 9


def test_overlapping_coverage():
    grid = patchify((8, 8), 4, 2)
    cover = np.zeros((8, 8), dtype=int)
    for top, left in grid.origins:
        cover[top : top + 4, left : left + 4] += 1
    assert cover.min() >= 1


def test_coverage_property_random():
    rng = np.random.default_rng(0)
    for _ in range(50):
        h = int(rng.integers(5, 40))
        w = int(rng.integers(5, 40))
        p = int(rng.integers(2, min(h, w) + 1))
        s = int(rng.integers(1, p + 1))
        grid = patchify((h, w), p, s)
        cover = np.zeros((h, w), dtype=int)
        for top, left in grid.origins:
            assert 0 <= top <= h - p and 0 <= left <= w - p
            cover[top : top + p, left : left + p] += 1
        assert cover.min() >= 1


def test_patchify_validation():
    with pytest.raises(ValidationError):
        patchify((4, 4), 5, 1)
    with pytest.raises(ValidationError):
        patchify((8, 8), 4, 5)
    with pytest.raises(ValidationError):
        patchify((8, 8), 0, 1)


def test_rot90_is_ccw_in_pixel_frame():
    mask = LabelMask(np.array([[1, 0], [0, 2]]), 2)
    out = augment_patch(mask, [("rot90", 1)])
    assert out.labels.tolist() == [[0, 1], [2, 0]]


def test_rot90_four_times_identity():
    rng = np.random.default_rng(1)
    mask = random_mask(rng, 6, 6, 3)
    assert augment_patch(mask, [("rot90", 4)]).same_as(mask)
    assert augment_patch(mask, [("rot90", 1)] * 4).same_as(mask)


def test_flips_are_involutions():
    rng = np.random.default_rng(2)
    mask = random_mask(rng, 5, 8, 2)
    assert augment_patch(mask, [("flip_h",), ("flip_h",)]).same_as(mask)
    assert augment_patch(mask, [("flip_v",), ("flip_v",)]).same_as(mask)


def test_transform_group_inverse():
    rng = np.random.default_rng(3)
    mask = random_mask(rng, 7, 7, 3)
    seq = [("rot90", 3), ("flip_h",), ("rot90", 1), ("flip_v",)]
    forward = augment_patch(mask, seq)
    back = augment_patch(forward, invert_transforms(seq))
    assert back.same_as(mask)


def test_rot90_rejects_non_square():
    mask = LabelMask(np.zeros((2, 3), dtype=int), 1)
    with pytest.raises(ValidationError):
        augment_patch(mask, [("rot90", 1)])


def test_exact_tiling_recompose_inverts_extraction():
    rng = np.random.default_rng(4)
    src = blobby_mask(rng, 12, 12, 3)
    grid = patchify((12, 12), 4, 4)
    pieces = list(zip(extract_patches(src, grid), grid.origins))
    for combiner in ("vote", "last", "or", "and", "min", "max"):
        out = recompose(pieces, (12, 12), combiner, num_classes=3)
        assert out.same_as(src), combiner


def test_vote_modal_and_tie_rules():
    a = LabelMask(np.array([[1]]), 2)
    b = LabelMask(np.array([[2]]), 2)
    # {1, 1, 2} -> modal class 1
    out = recompose([(a, (0, 0)), (a, (0, 0)), (b, (0, 0))], (1, 1), "vote", num_classes=2)
    assert out.labels[0, 0] == 1
    # {1, 2} tie -> later patch
    assert recompose([(a, (0, 0)), (b, (0, 0))], (1, 1), "vote", num_classes=2).labels[0, 0] == 2
    assert recompose([(b, (0, 0)), (a, (0, 0))], (1, 1), "vote", num_classes=2).labels[0, 0] == 1


def brute_force_vote(entries, size, num_classes):
    h, w = size
    out = np.zeros((h, w), dtype=int)
    for y in range(h):
        for x in range(w):
            votes = []
            for idx, (mask, (top, left)) in enumerate(entries):
                if top <= y < top + mask.height and left <= x < left + mask.width:
                    votes.append((int(mask.labels[y - top, x - left]), idx))
            if not votes:
                continue
            counts = {}
            last = {}
            for label, idx in votes:
                counts[label] = counts.get(label, 0) + 1
                last[label] = idx
            best = max(counts.values())
            out[y, x] = max(
                (label for label in counts if counts[label] == best),
                key=lambda lbl: last[lbl],
            )
    return out


def brute_force_last(entries, size):
    h, w = size
    out = np.zeros((h, w), dtype=int)
    for y in range(h):
        for x in range(w):
            for mask, (top, left) in entries:
                if top <= y < top + mask.height and left <= x < left + mask.width:
                    out[y, x] = int(mask.labels[y - top, x - left])
    return out


def test_overlapping_recompose_matches_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(5):
        grid = patchify((16, 16), 6, 3)
        # independently random patch contents, so overlaps disagree
        entries = [
            (random_mask(rng, 6, 6, 3), origin) for origin in grid.origins
        ]
        vote = recompose(entries, (16, 16), "vote", num_classes=3)
        last = recompose(entries, (16, 16), "last", num_classes=3)
        assert np.array_equal(vote.labels, brute_force_vote(entries, (16, 16), 3))
        assert np.array_equal(last.labels, brute_force_last(entries, (16, 16)))


def test_uncovered_pixels_warn_and_stay_background():
    patch = LabelMask(np.ones((2, 2), dtype=int), 1)
    with pytest.warns(UserWarning):
        out = recompose([(patch, (0, 0))], (4, 4), "last", num_classes=1)
    assert out.labels[3, 3] == 0 and out.labels[0, 0] == 1


def test_recompose_origin_bounds():
    patch = LabelMask(np.ones((2, 2), dtype=int), 1)
    with pytest.raises(ValidationError):
        recompose([(patch, (3, 3))], (4, 4), "last")


def test_or_and_combiners():
    a = LabelMask(np.array([[1, 0]]), 2)
    b = LabelMask(np.array([[2, 0]]), 2)
    both = [(a, (0, 0)), (b, (0, 0))]
    assert recompose(both, (1, 2), "or", num_classes=2).labels.tolist() == [[2, 0]]
    assert recompose(both, (1, 2), "and", num_classes=2).labels.tolist() == [[2, 0]]
    mixed = [(a, (0, 0)), (LabelMask(np.array([[0, 2]]), 2), (0, 0))]
    assert recompose(mixed, (1, 2), "or", num_classes=2).labels.tolist() == [[1, 2]]
    assert recompose(mixed, (1, 2), "and", num_classes=2).labels.tolist() == [[0, 0]]
    assert recompose(both, (1, 2), "min", num_classes=2).labels.tolist() == [[1, 0]]
    assert recompose(both, (1, 2), "max", num_classes=2).labels.tolist() == [[2, 0]]
