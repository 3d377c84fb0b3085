"""Class-wise (CW) and instance-wise (IW) sequence layouts.

Both serialize per-class or per-instance binary run blocks, each block
terminated by a class token that doubles as the block separator. CW keeps
the coordinate vocabulary independent of the real class count; IW makes
the instance structure recoverable from block order, enabling panoptic
output.
"""

from __future__ import annotations

from typing import List, Optional, Tuple

import numpy as np

from .errors import ParseError, ValidationError
from .masks import InstanceMask, LabelMask, flatten_2d, unflatten_2d
from .runs import extract_run_arrays, paint_runs, split_run_arrays
from .schemes import (
    Scheme,
    SchemeConfig,
    Segment,
    SegmentKind,
    TokenSequence,
    VocabLayout,
    build_layout,
    group_kinds,
)
from .static_codecs import _columns_to_runs, _emit_ids

_SUB_SCHEMES = (Scheme.NAIVE_BIN, Scheme.LAC)


def _check_cfg(cfg: SchemeConfig, kind: str) -> None:
    if cfg.scheme not in _SUB_SCHEMES:
        raise ValidationError(f"{kind} sequences use a naive-bin or lac sub-scheme")


def _binary_subconfig(cfg: SchemeConfig) -> SchemeConfig:
    """The coordinate sub-scheme always sees a binary mask."""
    return SchemeConfig(
        scheme=cfg.scheme,
        height=cfg.height,
        width=cfg.width,
        num_classes=1,
        start_mode=cfg.start_mode,
        flatten_order=cfg.flatten_order,
        max_len=cfg.max_len,
        specials=0,
        run_order="canonical",
    )


def structured_layout(cfg: SchemeConfig) -> VocabLayout:
    """Binary coordinate segments plus one separator token per class."""
    _check_cfg(cfg, "structured")
    sub = _binary_subconfig(cfg)
    segs: List[Segment] = []
    offset = 0
    if cfg.specials:
        segs.append(Segment(SegmentKind.SPECIAL, 0, cfg.specials))
        offset = cfg.specials
    for seg in build_layout(sub).segments:
        segs.append(Segment(seg.kind, offset, seg.size))
        offset += seg.size
    segs.append(Segment(SegmentKind.SEPARATOR, offset, cfg.num_classes))
    return VocabLayout(tuple(segs))


def _binary_run_tokens(binary_vector: np.ndarray, cfg: SchemeConfig, layout: VocabLayout) -> np.ndarray:
    sub = _binary_subconfig(cfg)
    starts, lengths, labels = extract_run_arrays(binary_vector)
    starts, lengths, labels = split_run_arrays(starts, lengths, labels, cfg.effective_max_len)
    return _emit_ids(sub, layout, starts, lengths, labels)


def encode_cw(mask: LabelMask, cfg: SchemeConfig) -> TokenSequence:
    """Per-class binary runs in ascending class order, each block closed by
    that class's separator token; empty classes emit the bare separator."""
    _check_cfg(cfg, "class-wise")
    if (mask.height, mask.width) != (cfg.height, cfg.width):
        raise ValidationError("mask size does not match configuration")
    if int(mask.labels.max()) > cfg.num_classes:
        raise ValidationError("label exceeds configured class count")
    layout = structured_layout(cfg)
    vector = flatten_2d(mask, cfg.flatten_order)
    sep = layout.segment(SegmentKind.SEPARATOR)
    parts = []
    for c in range(1, cfg.num_classes + 1):
        parts.append(_maybe_shuffled(_binary_run_tokens((vector == c).astype(np.int64), cfg, layout), cfg, c))
        parts.append(np.array([sep.offset + c - 1], dtype=np.int64))
    return TokenSequence(np.concatenate(parts), cfg, layout, "cw")


def _maybe_shuffled(ids: np.ndarray, cfg: SchemeConfig, salt: int) -> np.ndarray:
    if cfg.run_order != "shuffled":
        return ids
    k = len(group_kinds(_binary_subconfig(cfg)))
    groups = ids.reshape(-1, k)
    perm = np.random.default_rng(cfg.shuffle_seed + salt).permutation(groups.shape[0])
    return groups[perm].reshape(-1)


def _split_blocks(
    ids: np.ndarray, layout: VocabLayout, mode: str
) -> List[Tuple[np.ndarray, int]]:
    """(coordinate ids, separator value) per block, in sequence order."""
    sep = layout.segment(SegmentKind.SEPARATOR)
    is_sep = (ids >= sep.offset) & (ids < sep.offset + sep.size)
    blocks = []
    prev = 0
    for pos in np.flatnonzero(is_sep):
        blocks.append((ids[prev:pos], int(ids[pos] - sep.offset)))
        prev = pos + 1
    if prev != ids.size:
        if mode == "strict":
            raise ParseError("trailing coordinate tokens without a separator", int(ids.size))
    return blocks


def _block_runs(coord_ids: np.ndarray, cfg: SchemeConfig, layout: VocabLayout, mode: str):
    sub = _binary_subconfig(cfg)
    kinds = group_kinds(sub)
    k = len(kinds)
    rem = coord_ids.size % k
    if rem:
        if mode == "strict":
            raise ParseError("block ends inside a run group", int(coord_ids.size - rem))
        coord_ids = coord_ids[: coord_ids.size - rem]
    if coord_ids.size == 0:
        z = np.zeros(0, dtype=np.int64)
        return z, z.copy(), z.copy()
    table = coord_ids.reshape(-1, k)
    cols = {}
    for j, kind in enumerate(kinds):
        seg = layout.segment(kind)
        col = table[:, j]
        bad = (col < seg.offset) | (col >= seg.offset + seg.size)
        if np.any(bad):
            if mode == "strict":
                raise ParseError(f"expected a {kind.value} token", int(np.flatnonzero(bad)[0]) * k + j)
            col = np.clip(col, seg.offset, seg.offset + seg.size - 1)
        cols[kind] = col - seg.offset
    return _columns_to_runs(cols, sub)


def decode_cw(tokens: TokenSequence, mode: str = "strict") -> LabelMask:
    """Invert encode_cw. Strict mode requires one block per class with
    separators in ascending class order."""
    cfg = tokens.config
    layout = tokens.layout
    ids = tokens.payload_ids
    blocks = _split_blocks(ids, layout, mode)
    if mode == "strict":
        seen = [cls for _, cls in blocks]
        if seen != list(range(cfg.num_classes)):
            raise ParseError(
                f"expected separators for classes 1..{cfg.num_classes} in order", int(ids.size)
            )
    vec = np.zeros(cfg.vector_length, dtype=np.int64)
    for coord_ids, cls in blocks:
        starts, lengths, _ = _block_runs(coord_ids, cfg, layout, mode)
        if starts.size == 0:
            continue
        block = paint_runs(starts, lengths, np.full(starts.size, cls + 1, dtype=np.int64), cfg.vector_length, mode)
        if mode == "strict" and np.any(vec[block > 0]):
            raise ParseError("class blocks claim overlapping pixels", int(ids.size))
        vec = np.where(block > 0, block, vec)
    grid = unflatten_2d(vec, cfg.height, cfg.width, cfg.flatten_order)
    return LabelMask(grid, cfg.num_classes)


def encode_iw(
    mask: InstanceMask, cfg: SchemeConfig, order: str = "first-pixel", seed: Optional[int] = None
) -> TokenSequence:
    """Per-instance binary runs, each block closed by the instance's class
    token. Instance identity is carried by block position, so decoding
    recovers instances up to renumbering in serialization order."""
    _check_cfg(cfg, "instance-wise")
    if (mask.height, mask.width) != (cfg.height, cfg.width):
        raise ValidationError("mask size does not match configuration")
    if mask.num_classes > cfg.num_classes:
        raise ValidationError("instance classes exceed configured class count")
    if order not in ("first-pixel", "shuffled"):
        raise ValidationError("order must be 'first-pixel' or 'shuffled'")
    layout = structured_layout(cfg)
    sep = layout.segment(SegmentKind.SEPARATOR)
    id_vector = flatten_2d(LabelMask(mask.ids, max(int(mask.ids.max()), 1)), cfg.flatten_order)

    present = [int(i) for i in np.unique(id_vector) if i != 0]
    first_pixel = {inst: int(np.argmax(id_vector == inst)) for inst in present}
    present.sort(key=first_pixel.__getitem__)
    if order == "shuffled":
        rng = np.random.default_rng(cfg.shuffle_seed if seed is None else seed)
        present = [present[int(i)] for i in rng.permutation(len(present))]

    parts = []
    for inst in present:
        binary = (id_vector == inst).astype(np.int64)
        parts.append(_binary_run_tokens(binary, cfg, layout))
        parts.append(np.array([sep.offset + mask.class_of[inst] - 1], dtype=np.int64))
    ids = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
    return TokenSequence(ids, cfg, layout, "iw")


def decode_iw(tokens: TokenSequence, mode: str = "strict") -> Tuple[LabelMask, InstanceMask]:
    """Invert encode_iw into the panoptic pair (classes, instances)."""
    cfg = tokens.config
    layout = tokens.layout
    ids = tokens.payload_ids
    blocks = _split_blocks(ids, layout, mode)
    label_vec = np.zeros(cfg.vector_length, dtype=np.int64)
    inst_vec = np.zeros(cfg.vector_length, dtype=np.int64)
    class_of = {}
    for ordinal, (coord_ids, cls) in enumerate(blocks, start=1):
        starts, lengths, _ = _block_runs(coord_ids, cfg, layout, mode)
        class_of[ordinal] = cls + 1
        if starts.size == 0:
            continue
        block = paint_runs(starts, lengths, np.full(starts.size, ordinal, dtype=np.int64), cfg.vector_length, mode)
        if mode == "strict" and np.any(inst_vec[block > 0]):
            raise ParseError("instance blocks claim overlapping pixels", int(ids.size))
        inst_vec = np.where(block > 0, block, inst_vec)
        label_vec = np.where(block > 0, cls + 1, label_vec)
    label_grid = unflatten_2d(label_vec, cfg.height, cfg.width, cfg.flatten_order)
    inst_grid = unflatten_2d(inst_vec, cfg.height, cfg.width, cfg.flatten_order)
    return (
        LabelMask(label_grid, cfg.num_classes),
        InstanceMask(inst_grid, class_of, cfg.num_classes),
    )


def token_weights(tokens: TokenSequence, equalize: bool = False) -> np.ndarray:
    """Per-token weights for CW/IW sequences.

    Without equalization every token weighs 1. With it, each separator
    weighs as much as all the coordinate tokens in its block combined
    (minimum 1), so a block's single class token and its many coordinate
    tokens pull equally during training.
    """
    if tokens.kind not in ("cw", "iw"):
        raise ValidationError("token weights are defined for cw/iw sequences")
    ids = tokens.ids
    weights = np.ones(ids.size, dtype=np.float64)
    if not equalize:
        return weights
    sep = tokens.layout.segment(SegmentKind.SEPARATOR)
    is_sep = (ids >= sep.offset) & (ids < sep.offset + sep.size)
    prev = 0
    for pos in np.flatnonzero(is_sep):
        weights[pos] = max(int(pos) - prev, 1)
        prev = int(pos) + 1
    return weights
