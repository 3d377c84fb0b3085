"""Video token codecs: frame-concatenated and time-interleaved 3D
flattening, plus the composite time-class schemes TAC and LTAC.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .masks import (
    FlattenOrder,
    LabelMask,
    VideoMask,
    collapse_time_classes,
    expand_time_classes,
    flatten_2d,
    flatten_3d,
    unflatten_2d,
    unflatten_3d,
)
from .schemes import Scheme, TokenSequence, VideoSchemeConfig, build_layout
from .static_codecs import decode_vector, encode_vector

_FLAT_ORDER = {Scheme.FLAT_3DC: FlattenOrder.VID_3DC, Scheme.FLAT_3DF: FlattenOrder.VID_3DF}


def _check_video(video: VideoMask, cfg: VideoSchemeConfig):
    if not isinstance(cfg, VideoSchemeConfig):
        raise ValidationError("video codecs need a VideoSchemeConfig")
    if (video.height, video.width) != (cfg.height, cfg.width):
        raise ValidationError(
            f"video is {video.height}x{video.width}, configuration expects {cfg.height}x{cfg.width}"
        )
    if video.num_frames != cfg.frames:
        raise ValidationError(f"video has {video.num_frames} frames, configuration expects {cfg.frames}")
    top = max(int(f.labels.max()) for f in video.frames)
    if top > cfg.num_classes:
        raise ValidationError(f"label {top} exceeds configured class count {cfg.num_classes}")


def encode_video(video: VideoMask, cfg: VideoSchemeConfig) -> TokenSequence:
    """Tokenize an N-frame video under a video scheme.

    FLAT schemes run the static run codec over the 3D-flattened vector.
    TAC collapses the video to one composite-class mask and encodes
    (start, length, composite) triplets; LTAC fuses length and composite
    into a single token per run.
    """
    _check_video(video, cfg)
    layout = build_layout(cfg)
    if cfg.scheme in _FLAT_ORDER:
        vector = flatten_3d(video, _FLAT_ORDER[cfg.scheme])
    else:
        composite = collapse_time_classes(video)
        vector = flatten_2d(composite, cfg.flatten_order)
    return TokenSequence(encode_vector(vector, cfg, layout), cfg, layout, "video")


def decode_video(tokens: TokenSequence, mode: str = "strict") -> VideoMask:
    """Invert encode_video; modes as in decode_static."""
    cfg = tokens.config
    if not isinstance(cfg, VideoSchemeConfig):
        raise ValidationError("token sequence does not carry a video configuration")
    vec = decode_vector(tokens.ids, cfg, tokens.layout, mode)
    if cfg.scheme in _FLAT_ORDER:
        if mode == "lenient":
            np.clip(vec, 0, cfg.num_classes, out=vec)
        stack = unflatten_3d(vec, cfg.frames, cfg.height, cfg.width, _FLAT_ORDER[cfg.scheme])
        return VideoMask.from_array(stack, cfg.num_classes)
    if mode == "lenient":
        np.clip(vec, 0, cfg.composite_classes, out=vec)
    grid = unflatten_2d(vec, cfg.height, cfg.width, cfg.flatten_order)
    composite = LabelMask(grid, cfg.composite_classes)
    return expand_time_classes(composite, cfg.num_classes, cfg.frames)
