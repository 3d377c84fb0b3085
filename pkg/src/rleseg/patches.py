"""Sliding-window patch extraction, geometric augmentation, and
multi-patch recomposition with conflict-resolving combiners.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ValidationError
from .masks import LabelMask

Transform = Tuple  # ("rot90", k) | ("flip_h",) | ("flip_v",)

COMBINERS = ("vote", "last", "or", "and", "min", "max")


@dataclass(frozen=True)
class PatchGrid:
    """Window origins covering a source mask with a fixed patch size."""

    source_height: int
    source_width: int
    patch: int
    stride: int
    origins: Tuple[Tuple[int, int], ...]

    @property
    def num_windows(self) -> int:
        return len(self.origins)


def _axis_origins(size: int, patch: int, stride: int) -> List[int]:
    starts = list(range(0, size - patch + 1, stride))
    if starts[-1] + patch < size:
        starts.append(size - patch)  # clamped final window for exact coverage
    return starts


def patchify(size: Tuple[int, int], patch: int, stride: int) -> PatchGrid:
    """Plan sliding windows of side ``patch`` at the given stride.

    Origins sit at multiples of the stride; when that leaves a sliver
    uncovered, one extra window clamped to the far edge is added per axis,
    so every source pixel lands in at least one window.
    """
    h, w = int(size[0]), int(size[1])
    if patch < 1 or stride < 1:
        raise ValidationError("patch and stride must be >= 1")
    if stride > patch:
        raise ValidationError("stride must not exceed the patch size")
    if patch > min(h, w):
        raise ValidationError(f"patch {patch} exceeds the source size {h}x{w}")
    tops = _axis_origins(h, patch, stride)
    lefts = _axis_origins(w, patch, stride)
    origins = tuple((t, l) for t in tops for l in lefts)
    return PatchGrid(h, w, patch, stride, origins)


def extract_patch(mask: LabelMask, origin: Tuple[int, int], patch: int) -> LabelMask:
    top, left = origin
    if top < 0 or left < 0 or top + patch > mask.height or left + patch > mask.width:
        raise ValidationError(f"window {origin}+{patch} leaves the mask bounds")
    return LabelMask(mask.labels[top : top + patch, left : left + patch].copy(), mask.num_classes)


def extract_patches(mask: LabelMask, grid: PatchGrid) -> List[LabelMask]:
    if (mask.height, mask.width) != (grid.source_height, grid.source_width):
        raise ValidationError("mask size does not match the patch grid")
    return [extract_patch(mask, origin, grid.patch) for origin in grid.origins]


def augment_patch(mask: LabelMask, transforms: Sequence[Transform]) -> LabelMask:
    """Apply label-preserving geometric transforms in order.

    rot90 rotates counter-clockwise in the y-down pixel frame (the top-left
    pixel moves to the top-right); flips mirror horizontally/vertically.
    """
    arr = mask.labels
    for t in transforms:
        name = t[0]
        if name == "rot90":
            if arr.shape[0] != arr.shape[1]:
                raise ValidationError("rot90 needs a square patch")
            arr = np.rot90(arr, -int(t[1]) % 4)
        elif name == "flip_h":
            arr = arr[:, ::-1]
        elif name == "flip_v":
            arr = arr[::-1, :]
        else:
            raise ValidationError(f"unknown transform {name!r}")
    return LabelMask(np.ascontiguousarray(arr), mask.num_classes)


def invert_transforms(transforms: Sequence[Transform]) -> List[Transform]:
    """The transform sequence undoing ``transforms``."""
    out: List[Transform] = []
    for t in reversed(transforms):
        if t[0] == "rot90":
            out.append(("rot90", (-int(t[1])) % 4))
        else:
            out.append(t)
    return out


def random_transforms(rng: np.random.Generator, square: bool) -> List[Transform]:
    """Draw a random rotation/flip combination."""
    out: List[Transform] = []
    if square and rng.integers(0, 2):
        out.append(("rot90", int(rng.integers(1, 4))))
    if rng.integers(0, 2):
        out.append(("flip_h",))
    if rng.integers(0, 2):
        out.append(("flip_v",))
    return out


def recompose(
    patches: Sequence[Tuple[LabelMask, Tuple[int, int]]],
    size: Tuple[int, int],
    combiner: str = "vote",
    num_classes: Optional[int] = None,
) -> LabelMask:
    """Stitch (patch, origin) pairs back into one mask.

    vote: most frequent label per pixel, ties resolved in favour of the
    latest contributing patch. last: the latest patch wins outright.
    or/and: foreground where any/every covering patch is foreground, class
    taken from the latest foreground contributor. min/max: extreme label id.
    Pixels no patch covers stay background (with a warning).
    """
    if combiner not in COMBINERS:
        raise ValidationError(f"combiner must be one of {COMBINERS}")
    if not patches:
        raise ValidationError("recompose needs at least one patch")
    h, w = int(size[0]), int(size[1])
    c = num_classes if num_classes is not None else max(p.num_classes for p, _ in patches)

    cover = np.zeros((h, w), dtype=np.int64)
    for p, (top, left) in patches:
        if top < 0 or left < 0 or top + p.height > h or left + p.width > w:
            raise ValidationError(f"patch at {(top, left)} leaves the target bounds")
        cover[top : top + p.height, left : left + p.width] += 1
    if int(cover.min()) == 0:
        warnings.warn("recompose target has uncovered pixels; they stay background")

    if combiner == "last":
        out = np.zeros((h, w), dtype=np.int64)
        seen = np.zeros((h, w), dtype=bool)
        for p, (top, left) in patches:
            out[top : top + p.height, left : left + p.width] = p.labels
            seen[top : top + p.height, left : left + p.width] = True
        out[~seen] = 0
        return LabelMask(out, c)

    if combiner == "vote":
        counts = np.zeros((h, w, c + 1), dtype=np.int64)
        last_seen = np.zeros((h, w, c + 1), dtype=np.int64)
        for i, (p, (top, left)) in enumerate(patches, start=1):
            ys, xs = np.indices(p.labels.shape)
            np.add.at(counts, (ys + top, xs + left, p.labels), 1)
            last_seen[ys + top, xs + left, p.labels] = i
        # lexicographic (count, recency) argmax
        rank = counts * (len(patches) + 1) + last_seen
        out = np.argmax(rank, axis=2)
        out[cover == 0] = 0
        return LabelMask(out, c)

    if combiner in ("min", "max"):
        init = np.iinfo(np.int64).max if combiner == "min" else -1
        out = np.full((h, w), init, dtype=np.int64)
        op = np.minimum if combiner == "min" else np.maximum
        for p, (top, left) in patches:
            view = out[top : top + p.height, left : left + p.width]
            view[...] = op(view, p.labels)
        out[cover == 0] = 0
        return LabelMask(out, c)

    # or / and: foreground indicator plus latest foreground class
    fg_count = np.zeros((h, w), dtype=np.int64)
    latest_fg = np.zeros((h, w), dtype=np.int64)
    for p, (top, left) in patches:
        fg = p.labels > 0
        fg_count[top : top + p.height, left : left + p.width] += fg
        view = latest_fg[top : top + p.height, left : left + p.width]
        view[fg] = p.labels[fg]
    if combiner == "or":
        keep = fg_count > 0
    else:
        keep = (fg_count == cover) & (cover > 0)
    out = np.where(keep, latest_fg, 0)
    return LabelMask(out, c)
