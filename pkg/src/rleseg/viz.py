"""Colorized PNG rendering of class masks and run structure."""

from __future__ import annotations

import colorsys
from typing import List, Tuple

import numpy as np
from PIL import Image

from .masks import FlattenOrder, LabelMask, flatten_2d, unflatten_2d
from .runs import extract_run_arrays

GOLDEN_ANGLE = 0.61803398875


def palette(n: int) -> List[Tuple[int, int, int]]:
    """n visually distinct colors; index 0 (background) is black."""
    colors = [(0, 0, 0)]
    h = 0.0
    for i in range(n):
        h = (h + GOLDEN_ANGLE) % 1.0
        r, g, b = colorsys.hsv_to_rgb(h, 0.65 if i % 2 else 0.9, 0.95 if i % 3 else 0.75)
        colors.append((int(r * 255), int(g * 255), int(b * 255)))
    return colors


def colorize_mask(mask: LabelMask) -> np.ndarray:
    """(H, W, 3) uint8 image, one color per class."""
    colors = np.array(palette(mask.num_classes), dtype=np.uint8)
    return colors[np.clip(mask.labels, 0, mask.num_classes)]


def colorize_runs(mask: LabelMask, order: FlattenOrder = FlattenOrder.ROW_MAJOR) -> np.ndarray:
    """(H, W, 3) uint8 image with every run in its own cycling color."""
    vector = flatten_2d(mask, order)
    starts, lengths, _ = extract_run_arrays(vector)
    run_ids = np.zeros(vector.size, dtype=np.int64)
    for i, (s, l) in enumerate(zip(starts, lengths), start=1):
        run_ids[s : s + l] = (i - 1) % 48 + 1
    grid = unflatten_2d(run_ids, mask.height, mask.width, order)
    colors = np.array(palette(48), dtype=np.uint8)
    return colors[grid]


def save_image(path: str, rgb: np.ndarray) -> None:
    Image.fromarray(rgb, mode="RGB").save(path, format="PNG")
