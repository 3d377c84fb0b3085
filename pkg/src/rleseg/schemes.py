"""Tokenization scheme configuration and the vocabulary layout that maps
(kind, value) pairs to contiguous integer token ids.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import CapacityError, ValidationError
from .masks import FlattenOrder, composite_class_count

# Vocabulary sizes past this are taken as arithmetic runaway, not intent.
HARD_VOCAB_CAP = 1 << 62

# Digit order of composite time labels: frame 1 is least significant.
TIME_DIGIT_CONVENTION = "frame1-least-significant"


class Scheme(Enum):
    """Every supported tokenization scheme, static and video."""

    NAIVE_BIN = "naive-bin"
    NAIVE_MC = "naive-mc"
    LAC = "lac"  # length and class fused into one token
    BAC = "bac"  # background as a class, starts implicit
    BAC_LAC = "bac-lac"
    DIFF_BIN = "diff-bin"  # transition positions of the differential mask
    DIFF_MC = "diff-mc"
    SPLIT_STREAM = "split-stream"  # one stream per run component
    FLAT_3DC = "flat-3dc"  # video flattened frame by frame
    FLAT_3DF = "flat-3df"  # video flattened time-fastest
    TAC = "tac"  # per-pixel class tuple across frames as one class
    LTAC = "ltac"  # length fused with the composite time class

    @property
    def is_video(self) -> bool:
        return self in (Scheme.FLAT_3DC, Scheme.FLAT_3DF, Scheme.TAC, Scheme.LTAC)

    @property
    def binary_only(self) -> bool:
        return self in (Scheme.NAIVE_BIN, Scheme.DIFF_BIN)

    @property
    def has_start_tokens(self) -> bool:
        return self not in (Scheme.BAC, Scheme.BAC_LAC)

    @property
    def order_invariant(self) -> bool:
        """True when decoded output cannot depend on run order."""
        return self in (
            Scheme.NAIVE_BIN,
            Scheme.NAIVE_MC,
            Scheme.LAC,
            Scheme.SPLIT_STREAM,
            Scheme.TAC,
            Scheme.LTAC,
            Scheme.FLAT_3DC,
            Scheme.FLAT_3DF,
        )


class StartMode(Enum):
    ONE_D = "1d"
    TWO_D = "2d"


class SegmentKind(Enum):
    SPECIAL = "special"
    START = "start"
    START_ROW = "start-row"
    START_COL = "start-col"
    LENGTH = "length"
    CLASS = "class"
    LAC = "lac"
    TAC = "tac"
    LTAC = "ltac"
    SEPARATOR = "separator"


@dataclass(frozen=True)
class Segment:
    kind: SegmentKind
    offset: int
    size: int


@dataclass(frozen=True)
class VocabLayout:
    """Disjoint contiguous segments partitioning token ids 0..V-1."""

    segments: Tuple[Segment, ...]

    def __post_init__(self):
        pos = 0
        seen = set()
        for seg in self.segments:
            if seg.size < 1:
                raise ValidationError(f"segment {seg.kind} has size {seg.size}")
            if seg.offset != pos:
                raise ValidationError("segments must be contiguous from id 0")
            if seg.kind in seen:
                raise ValidationError(f"duplicate segment kind {seg.kind}")
            seen.add(seg.kind)
            pos += seg.size

    @property
    def total(self) -> int:
        return sum(s.size for s in self.segments)

    def segment(self, kind: SegmentKind) -> Segment:
        for seg in self.segments:
            if seg.kind is kind:
                return seg
        raise ValidationError(f"layout has no {kind} segment")

    def has(self, kind: SegmentKind) -> bool:
        return any(s.kind is kind for s in self.segments)

    def id_of(self, kind: SegmentKind, value: int) -> int:
        seg = self.segment(kind)
        if not 0 <= value < seg.size:
            raise ValidationError(f"{kind} value {value} outside 0..{seg.size - 1}")
        return seg.offset + value

    def value_of(self, kind: SegmentKind, token_id: int) -> int:
        seg = self.segment(kind)
        if not seg.offset <= token_id < seg.offset + seg.size:
            raise ValidationError(f"token {token_id} is not a {kind} token")
        return token_id - seg.offset

    def kind_of(self, token_id: int) -> Tuple[SegmentKind, int]:
        for seg in self.segments:
            if seg.offset <= token_id < seg.offset + seg.size:
                return seg.kind, token_id - seg.offset
        raise ValidationError(f"token id {token_id} outside vocabulary of {self.total}")

    def sizes(self) -> Dict[SegmentKind, int]:
        return {s.kind: s.size for s in self.segments}


@dataclass(frozen=True)
class SchemeConfig:
    """Full description of a static tokenization scheme.

    ``max_len`` defaults to the extent of the fastest-varying flattening
    axis, the bound applied when splitting overlong runs. ``specials``
    reserves that many ids at the front of the vocabulary; id 0 then acts
    as the end-of-sequence marker.
    """

    scheme: Scheme
    height: int
    width: int
    num_classes: int
    start_mode: StartMode = StartMode.ONE_D
    flatten_order: FlattenOrder = FlattenOrder.ROW_MAJOR
    max_len: Optional[int] = None
    specials: int = 0
    run_order: str = "canonical"
    shuffle_seed: int = 0
    vocab_limit: Optional[int] = None

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValidationError("mask dimensions must be >= 1")
        if self.num_classes < 1:
            raise ValidationError("num_classes must be >= 1")
        if self.specials < 0:
            raise ValidationError("specials must be >= 0")
        if self.run_order not in ("canonical", "shuffled"):
            raise ValidationError("run_order must be 'canonical' or 'shuffled'")
        if self.max_len is not None and self.max_len < 1:
            raise ValidationError("max_len must be >= 1")
        if self.scheme.is_video and type(self) is SchemeConfig:
            raise ValidationError(f"{self.scheme} needs a VideoSchemeConfig")
        if not self.scheme.has_start_tokens and self.start_mode is not StartMode.ONE_D:
            raise ValidationError(f"{self.scheme} has no start tokens; start_mode must be 1d")
        if self.scheme in (Scheme.DIFF_BIN, Scheme.DIFF_MC) and self.start_mode is not StartMode.ONE_D:
            raise ValidationError("differential schemes use flat positions; start_mode must be 1d")
        if self.scheme is Scheme.SPLIT_STREAM and self.start_mode is not StartMode.TWO_D:
            raise ValidationError("split-stream uses 2D starts")
        if self.flatten_order.is_video and not self.scheme.is_video:
            raise ValidationError("static schemes need a 2D flatten order")

    @classmethod
    def square(cls, scheme: Scheme, side: int, num_classes: int, **kwargs) -> "SchemeConfig":
        return cls(scheme, side, side, num_classes, **kwargs)

    @property
    def num_frames(self) -> int:
        return 1

    @property
    def vector_length(self) -> int:
        return self.height * self.width

    @property
    def effective_max_len(self) -> int:
        if self.max_len is not None:
            return self.max_len
        if self.flatten_order is FlattenOrder.COLUMN_MAJOR:
            return self.height
        return self.width

    @property
    def eos_id(self) -> Optional[int]:
        return 0 if self.specials >= 1 else None

    def to_dict(self) -> Dict:
        return {
            "scheme": self.scheme.value,
            "height": self.height,
            "width": self.width,
            "classes": self.num_classes,
            "frames": self.num_frames,
            "start_mode": self.start_mode.value,
            "flatten": self.flatten_order.value,
            "max_len": self.max_len,
            "specials": self.specials,
            "run_order": self.run_order,
            "shuffle_seed": self.shuffle_seed,
        }


@dataclass(frozen=True)
class VideoSchemeConfig(SchemeConfig):
    """Scheme configuration for N-frame video masks.

    For the FLAT schemes the 3D flattening order is implied by the scheme;
    ``flatten_order`` only matters for TAC/LTAC, where it controls the 2D
    traversal of the collapsed composite mask.
    """

    frames: int = 2

    def __post_init__(self):
        super().__post_init__()
        if not self.scheme.is_video:
            raise ValidationError(f"{self.scheme} is a static scheme; use SchemeConfig")
        if self.frames < 1:
            raise ValidationError("frames must be >= 1")
        if self.scheme in (Scheme.FLAT_3DC, Scheme.FLAT_3DF) and self.start_mode is not StartMode.ONE_D:
            raise ValidationError("FLAT video schemes support 1d starts only")
        if self.flatten_order.is_video:
            raise ValidationError("flatten_order is the in-frame 2D order; 3D order is implied")

    @property
    def num_frames(self) -> int:
        return self.frames

    @property
    def vector_length(self) -> int:
        if self.scheme in (Scheme.FLAT_3DC, Scheme.FLAT_3DF):
            return self.frames * self.height * self.width
        return self.height * self.width

    def to_dict(self) -> Dict:
        payload = super().to_dict()
        # composite time labels read frame 1 as the least-significant digit;
        # decoders must agree, so the convention travels with the file
        payload["time_digits"] = TIME_DIGIT_CONVENTION
        return payload

    @property
    def effective_max_len(self) -> int:
        if self.max_len is not None:
            return self.max_len
        if self.scheme is Scheme.FLAT_3DC:
            return self.width
        if self.scheme is Scheme.FLAT_3DF:
            return self.frames  # time varies fastest
        return super().effective_max_len

    @property
    def composite_classes(self) -> int:
        return composite_class_count(self.num_classes, self.frames)


def _start_segments(cfg: SchemeConfig) -> list:
    if cfg.start_mode is StartMode.TWO_D:
        return [(SegmentKind.START_ROW, cfg.height), (SegmentKind.START_COL, cfg.width)]
    return [(SegmentKind.START, cfg.vector_length)]


def build_layout(cfg: SchemeConfig) -> VocabLayout:
    """Lay out the token-id space for a scheme configuration."""
    c = cfg.num_classes
    ml = cfg.effective_max_len
    s = cfg.scheme
    parts: list = []
    if cfg.specials:
        parts.append((SegmentKind.SPECIAL, cfg.specials))

    if s is Scheme.NAIVE_BIN:
        parts += _start_segments(cfg) + [(SegmentKind.LENGTH, ml)]
    elif s is Scheme.NAIVE_MC:
        parts += _start_segments(cfg) + [(SegmentKind.LENGTH, ml), (SegmentKind.CLASS, c)]
    elif s is Scheme.LAC:
        parts += _start_segments(cfg) + [(SegmentKind.LAC, ml * c)]
    elif s is Scheme.BAC:
        parts += [(SegmentKind.LENGTH, ml), (SegmentKind.CLASS, c + 1)]
    elif s is Scheme.BAC_LAC:
        parts += [(SegmentKind.LAC, ml * (c + 1))]
    elif s is Scheme.DIFF_BIN:
        parts += [(SegmentKind.START, cfg.vector_length)]
    elif s is Scheme.DIFF_MC:
        parts += [(SegmentKind.START, cfg.vector_length), (SegmentKind.CLASS, c + 1)]
    elif s is Scheme.SPLIT_STREAM:
        parts += _start_segments(cfg) + [(SegmentKind.LENGTH, ml), (SegmentKind.CLASS, c)]
    elif s in (Scheme.FLAT_3DC, Scheme.FLAT_3DF):
        parts += [(SegmentKind.START, cfg.vector_length), (SegmentKind.LENGTH, ml)]
        if c > 1:
            parts.append((SegmentKind.CLASS, c))
    elif s is Scheme.TAC:
        parts += _start_segments(cfg) + [
            (SegmentKind.LENGTH, ml),
            (SegmentKind.TAC, cfg.composite_classes),
        ]
    elif s is Scheme.LTAC:
        parts += _start_segments(cfg) + [(SegmentKind.LTAC, ml * cfg.composite_classes)]
    else:  # pragma: no cover
        raise ValidationError(f"unhandled scheme {s}")

    segments = []
    offset = 0
    for kind, size in parts:
        segments.append(Segment(kind, offset, size))
        offset += size
    if offset > HARD_VOCAB_CAP:
        raise CapacityError(f"vocabulary of {offset} tokens exceeds the representable cap")
    if cfg.vocab_limit is not None and offset > cfg.vocab_limit:
        raise CapacityError(
            f"vocabulary needs {offset} tokens, over the configured limit {cfg.vocab_limit}"
        )
    return VocabLayout(tuple(segments))


def group_kinds(cfg: SchemeConfig) -> Tuple[SegmentKind, ...]:
    """Per-run token kinds, in emission order."""
    s = cfg.scheme
    starts: Tuple[SegmentKind, ...]
    if cfg.start_mode is StartMode.TWO_D:
        starts = (SegmentKind.START_ROW, SegmentKind.START_COL)
    else:
        starts = (SegmentKind.START,)
    if s is Scheme.NAIVE_BIN:
        return starts + (SegmentKind.LENGTH,)
    if s is Scheme.NAIVE_MC:
        return starts + (SegmentKind.LENGTH, SegmentKind.CLASS)
    if s is Scheme.LAC:
        return starts + (SegmentKind.LAC,)
    if s is Scheme.BAC:
        return (SegmentKind.LENGTH, SegmentKind.CLASS)
    if s is Scheme.BAC_LAC:
        return (SegmentKind.LAC,)
    if s is Scheme.DIFF_BIN:
        return (SegmentKind.START,)
    if s is Scheme.DIFF_MC:
        return (SegmentKind.START, SegmentKind.CLASS)
    if s is Scheme.SPLIT_STREAM:
        return starts + (SegmentKind.LENGTH, SegmentKind.CLASS)
    if s in (Scheme.FLAT_3DC, Scheme.FLAT_3DF):
        kinds = (SegmentKind.START, SegmentKind.LENGTH)
        return kinds + ((SegmentKind.CLASS,) if cfg.num_classes > 1 else ())
    if s is Scheme.TAC:
        return starts + (SegmentKind.LENGTH, SegmentKind.TAC)
    if s is Scheme.LTAC:
        return starts + (SegmentKind.LTAC,)
    raise ValidationError(f"unhandled scheme {s}")  # pragma: no cover


@dataclass(eq=False)
class TokenSequence:
    """A scheme-tagged integer token sequence."""

    ids: np.ndarray
    config: SchemeConfig
    layout: VocabLayout
    kind: str = "static"  # static | video | cw | iw

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        if self.ids.ndim != 1:
            raise ValidationError("token ids must form a 1D sequence")
        if self.ids.size and (self.ids.min() < 0 or self.ids.max() >= self.layout.total):
            raise ValidationError("token id outside vocabulary")

    def __len__(self) -> int:
        return int(self.ids.size)

    @property
    def payload_ids(self) -> np.ndarray:
        """Token ids with reserved specials stripped."""
        if not self.config.specials:
            return self.ids
        return self.ids[self.ids >= self.config.specials]

    @property
    def payload_length(self) -> int:
        return int(self.payload_ids.size)

    def to_list(self) -> list:
        return self.ids.tolist()

    def same_as(self, other: "TokenSequence") -> bool:
        return bool(np.array_equal(self.ids, other.ids))
