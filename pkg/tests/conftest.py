"""Shared generators for randomized tests."""

import numpy as np

from rleseg import InstanceMask, LabelMask, VideoMask


def random_mask(rng, height, width, num_classes):
    return LabelMask(rng.integers(0, num_classes + 1, size=(height, width)), num_classes)


def blobby_mask(rng, height, width, num_classes, blobs=4):
    """Mask made of solid rectangles, closer to real segmentation shapes."""
    arr = np.zeros((height, width), dtype=np.int64)
    for _ in range(blobs):
        c = int(rng.integers(1, num_classes + 1))
        y0 = int(rng.integers(0, height))
        x0 = int(rng.integers(0, width))
        y1 = min(height, y0 + int(rng.integers(1, max(2, height // 2))))
        x1 = min(width, x0 + int(rng.integers(1, max(2, width // 2))))
        arr[y0:y1, x0:x1] = c
    return LabelMask(arr, num_classes)


def random_video(rng, frames, height, width, num_classes):
    return VideoMask.from_array(
        rng.integers(0, num_classes + 1, size=(frames, height, width)), num_classes
    )


def random_instance_mask(rng, height, width, num_classes, instances=3):
    ids = np.zeros((height, width), dtype=np.int64)
    class_of = {}
    for inst in range(1, instances + 1):
        y0 = int(rng.integers(0, height))
        x0 = int(rng.integers(0, width))
        y1 = min(height, y0 + int(rng.integers(1, max(2, height // 2))))
        x1 = min(width, x0 + int(rng.integers(1, max(2, width // 2))))
        ids[y0:y1, x0:x1] = inst
        class_of[inst] = int(rng.integers(1, num_classes + 1))
    present = {int(v) for v in np.unique(ids)} - {0}
    return InstanceMask(ids, {k: v for k, v in class_of.items() if k in present}, num_classes)
