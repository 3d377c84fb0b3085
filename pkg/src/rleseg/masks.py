"""Label mask containers and the geometric primitives every codec builds on:
flattening orders, block subsampling, and composite time labels for videos.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Tuple, Union

import numpy as np

from .errors import ValidationError

Size = Union[int, Tuple[int, int]]


class FlattenOrder(Enum):
    """Traversal order used to turn a mask into a 1D label vector."""

    ROW_MAJOR = "row"
    COLUMN_MAJOR = "col"
    VID_3DC = "3dc"
    VID_3DF = "3df"

    @property
    def is_video(self) -> bool:
        return self in (FlattenOrder.VID_3DC, FlattenOrder.VID_3DF)


@dataclass(frozen=True, eq=False)
class LabelMask:
    """Dense 2D grid of per-pixel class labels, 0 meaning background.

    ``num_classes`` is the foreground class count C; every label must lie
    in 0..C. Composite-label masks (see :func:`collapse_time_classes`) use
    the same container with a large C.
    """

    labels: np.ndarray  # (H, W) integer array
    num_classes: int

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2 or arr.size == 0:
            raise ValidationError("LabelMask.labels must be a non-empty 2D array")
        if not np.issubdtype(arr.dtype, np.integer):
            arr = arr.astype(np.int64)
        object.__setattr__(self, "labels", arr)
        if self.num_classes < 1:
            raise ValidationError("num_classes must be >= 1")
        lo, hi = int(arr.min()), int(arr.max())
        if lo < 0 or hi > self.num_classes:
            raise ValidationError(
                f"labels must lie in 0..{self.num_classes}, found range {lo}..{hi}"
            )

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def same_as(self, other: "LabelMask") -> bool:
        """Pixelwise equality; class budgets may differ."""
        return self.labels.shape == other.labels.shape and bool(
            np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True, eq=False)
class InstanceMask:
    """Per-pixel instance ids (0 = background) plus an instance->class map."""

    ids: np.ndarray  # (H, W) integer array of instance ids
    class_of: Dict[int, int]
    num_classes: int

    def __post_init__(self):
        arr = np.asarray(self.ids)
        if arr.ndim != 2 or arr.size == 0:
            raise ValidationError("InstanceMask.ids must be a non-empty 2D array")
        if not np.issubdtype(arr.dtype, np.integer):
            arr = arr.astype(np.int64)
        object.__setattr__(self, "ids", arr)
        if self.num_classes < 1:
            raise ValidationError("num_classes must be >= 1")
        present = set(np.unique(arr).tolist()) - {0}
        missing = present - set(self.class_of)
        if missing:
            raise ValidationError(f"instance ids without a class mapping: {sorted(missing)}")
        for inst, cls in self.class_of.items():
            if inst < 1:
                raise ValidationError("instance ids must be >= 1")
            if not 1 <= cls <= self.num_classes:
                raise ValidationError(f"instance {inst} maps to invalid class {cls}")

    @property
    def height(self) -> int:
        return self.ids.shape[0]

    @property
    def width(self) -> int:
        return self.ids.shape[1]

    def to_label_mask(self) -> LabelMask:
        """Collapse instance ids to their classes."""
        lut = np.zeros(int(self.ids.max()) + 1, dtype=np.int64)
        for inst, cls in self.class_of.items():
            if inst < lut.size:
                lut[inst] = cls
        return LabelMask(lut[self.ids], self.num_classes)


@dataclass(frozen=True, eq=False)
class VideoMask:
    """Ordered frames sharing one geometry and class budget."""

    frames: Tuple[LabelMask, ...]

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise ValidationError("VideoMask needs at least one frame")
        h, w, c = frames[0].height, frames[0].width, frames[0].num_classes
        for i, f in enumerate(frames):
            if (f.height, f.width, f.num_classes) != (h, w, c):
                raise ValidationError(f"frame {i} disagrees on shape or class count")
        object.__setattr__(self, "frames", frames)

    @classmethod
    def from_array(cls, labels: np.ndarray, num_classes: int) -> "VideoMask":
        labels = np.asarray(labels)
        if labels.ndim != 3:
            raise ValidationError("expected a (N, H, W) array")
        return cls(tuple(LabelMask(frame, num_classes) for frame in labels))

    @property
    def num_frames(self) -> int:
        return len(self.frames)

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def num_classes(self) -> int:
        return self.frames[0].num_classes

    def stack(self) -> np.ndarray:
        """All frames as one (N, H, W) array."""
        return np.stack([f.labels for f in self.frames])

    def same_as(self, other: "VideoMask") -> bool:
        return self.num_frames == other.num_frames and all(
            a.same_as(b) for a, b in zip(self.frames, other.frames)
        )


def _as_size(target: Size) -> Tuple[int, int]:
    if isinstance(target, int):
        return target, target
    h, w = target
    return int(h), int(w)


def flatten_2d(mask: LabelMask, order: FlattenOrder) -> np.ndarray:
    """Flatten a mask to a label vector. Row-major puts pixel (y, x) at
    y*W + x, column-major at x*H + y; indices are 0-based."""
    if order.is_video:
        raise ValidationError(f"{order} is a video order; use flatten_3d")
    if order is FlattenOrder.ROW_MAJOR:
        return mask.labels.reshape(-1).astype(np.int64)
    return mask.labels.reshape(-1, order="F").astype(np.int64)


def unflatten_2d(vector: np.ndarray, height: int, width: int, order: FlattenOrder) -> np.ndarray:
    """Inverse of flatten_2d; returns the (H, W) label grid."""
    if order.is_video:
        raise ValidationError(f"{order} is a video order; use unflatten_3d")
    vector = np.asarray(vector)
    if vector.size != height * width:
        raise ValidationError(f"vector has {vector.size} entries, expected {height * width}")
    if order is FlattenOrder.ROW_MAJOR:
        return vector.reshape(height, width)
    return vector.reshape(height, width, order="F")


def flatten_3d(video: VideoMask, order: FlattenOrder) -> np.ndarray:
    """Flatten a video to one vector.

    VID_3DC concatenates row-major frames: index = t*H*W + y*W + x.
    VID_3DF interleaves time fastest: index = t + N*y + N*H*x, so the N
    labels of one spatial pixel are contiguous.
    """
    if not order.is_video:
        raise ValidationError(f"{order} is a 2D order; use flatten_2d")
    arr = video.stack()
    if order is FlattenOrder.VID_3DC:
        return arr.reshape(-1).astype(np.int64)
    return arr.transpose(2, 1, 0).reshape(-1).astype(np.int64)


def unflatten_3d(
    vector: np.ndarray, num_frames: int, height: int, width: int, order: FlattenOrder
) -> np.ndarray:
    """Inverse of flatten_3d; returns the (N, H, W) label stack."""
    if not order.is_video:
        raise ValidationError(f"{order} is a 2D order; use unflatten_2d")
    vector = np.asarray(vector)
    expected = num_frames * height * width
    if vector.size != expected:
        raise ValidationError(f"vector has {vector.size} entries, expected {expected}")
    if order is FlattenOrder.VID_3DC:
        return vector.reshape(num_frames, height, width)
    return vector.reshape(width, height, num_frames).transpose(2, 1, 0)


def subsample(mask: LabelMask, target: Size) -> LabelMask:
    """Reduce a mask to ``target`` by block pooling.

    Each output pixel looks at its source block: background wins only when
    background pixels strictly outnumber all foreground pixels combined;
    otherwise the most frequent foreground class wins, ties going to the
    smallest class id. This keeps thin foreground structures alive longer
    than plain nearest-neighbour decimation.
    """
    out_h, out_w = _as_size(target)
    if out_h < 1 or out_w < 1:
        raise ValidationError("target size must be positive")
    if mask.height % out_h or mask.width % out_w:
        raise ValidationError(
            f"mask {mask.height}x{mask.width} is not an integer multiple of {out_h}x{out_w}"
        )
    fy, fx = mask.height // out_h, mask.width // out_w
    if fy == 1 and fx == 1:
        return LabelMask(mask.labels.copy(), mask.num_classes)

    c = mask.num_classes
    blocks = mask.labels.reshape(out_h, fy, out_w, fx).transpose(0, 2, 1, 3).reshape(out_h, out_w, fy * fx)
    counts = np.zeros((out_h, out_w, c + 1), dtype=np.int64)
    oy, ox = np.indices((out_h, out_w))
    for k in range(fy * fx):
        np.add.at(counts, (oy, ox, blocks[:, :, k]), 1)
    bkg = counts[:, :, 0]
    fg_counts = counts[:, :, 1:]
    best_fg = np.argmax(fg_counts, axis=2)  # first max -> smallest class id
    fg_total = fy * fx - bkg
    out = np.where(bkg > fg_total, 0, best_fg + 1)
    return LabelMask(out, c)


def upsample(mask: LabelMask, target: Size) -> LabelMask:
    """Nearest-replication upsampling, the exact inverse direction of
    integer block pooling."""
    out_h, out_w = _as_size(target)
    if out_h % mask.height or out_w % mask.width:
        raise ValidationError(
            f"target {out_h}x{out_w} is not an integer multiple of {mask.height}x{mask.width}"
        )
    fy, fx = out_h // mask.height, out_w // mask.width
    up = np.repeat(np.repeat(mask.labels, fy, axis=0), fx, axis=1)
    return LabelMask(up, mask.num_classes)


def composite_class_count(num_classes: int, num_frames: int) -> int:
    """Number of distinct nonzero composite time labels: (C+1)^N - 1."""
    return (num_classes + 1) ** num_frames - 1


def _check_composite_capacity(num_classes: int, num_frames: int):
    if num_frames * np.log2(num_classes + 1) > 62:
        raise ValidationError(
            f"composite labels for C={num_classes}, N={num_frames} exceed 63-bit integers"
        )


def collapse_time_classes(video: VideoMask) -> LabelMask:
    """Collapse an N-frame video into a single mask of composite labels.

    The composite at (y, x) treats the per-frame classes as digits in base
    C+1 with frame 1 least significant; 0 means background in every frame.
    """
    c, n = video.num_classes, video.num_frames
    _check_composite_capacity(c, n)
    weights = (c + 1) ** np.arange(n, dtype=np.int64)
    composite = np.tensordot(weights, video.stack().astype(np.int64), axes=([0], [0]))
    return LabelMask(composite, composite_class_count(c, n))


def expand_time_classes(mask: LabelMask, num_classes: int, num_frames: int) -> VideoMask:
    """Inverse of collapse_time_classes given the original C and N."""
    _check_composite_capacity(num_classes, num_frames)
    base = num_classes + 1
    digits = []
    rest = mask.labels.astype(np.int64)
    for _ in range(num_frames):
        digits.append(rest % base)
        rest = rest // base
    if np.any(rest):
        raise ValidationError("composite labels exceed (C+1)^N - 1")
    return VideoMask(tuple(LabelMask(d, num_classes) for d in digits))
