"""Static-mask token codecs.

Every scheme shares one pipeline: flatten, take runs (foreground-only,
background-inclusive, or transitions), bound run lengths, then map run
components through the vocabulary layout. Decoding inverts each step and
comes in a strict flavour that rejects ungrammatical sequences and a
lenient one that repairs them, for use on noisy model output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import ParseError, ValidationError
from .masks import FlattenOrder, LabelMask, flatten_2d, unflatten_2d
from .runs import extract_run_arrays, paint_runs, split_run_arrays, _check_mode
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

_COVERAGE_SCHEMES = (Scheme.BAC, Scheme.BAC_LAC)
_DIFF_SCHEMES = (Scheme.DIFF_BIN, Scheme.DIFF_MC)


# ---------------------------------------------------------------------------
# run component <-> token value mapping


def _rows_cols_of(starts: np.ndarray, cfg: SchemeConfig) -> Tuple[np.ndarray, np.ndarray]:
    if cfg.flatten_order is FlattenOrder.COLUMN_MAJOR:
        return starts % cfg.height, starts // cfg.height
    return starts // cfg.width, starts % cfg.width


def _flat_of(rows: np.ndarray, cols: np.ndarray, cfg: SchemeConfig) -> np.ndarray:
    if cfg.flatten_order is FlattenOrder.COLUMN_MAJOR:
        return cols * cfg.height + rows
    return rows * cfg.width + cols


def _class_values_raw(cfg: SchemeConfig) -> bool:
    """BAC and differential schemes emit the class id itself, background
    included; run schemes emit class - 1."""
    return cfg.scheme in (Scheme.BAC, Scheme.DIFF_MC)


def _column_values(
    kind: SegmentKind,
    cfg: SchemeConfig,
    starts: np.ndarray,
    lengths: np.ndarray,
    labels: np.ndarray,
) -> np.ndarray:
    ml = cfg.effective_max_len
    if kind is SegmentKind.START:
        return starts
    if kind is SegmentKind.START_ROW:
        return _rows_cols_of(starts, cfg)[0]
    if kind is SegmentKind.START_COL:
        return _rows_cols_of(starts, cfg)[1]
    if kind is SegmentKind.LENGTH:
        return lengths - 1
    if kind is SegmentKind.CLASS:
        return labels if _class_values_raw(cfg) else labels - 1
    if kind is SegmentKind.LAC:
        base = labels if cfg.scheme is Scheme.BAC_LAC else labels - 1
        return base * ml + lengths - 1
    if kind is SegmentKind.TAC:
        return labels - 1
    if kind is SegmentKind.LTAC:
        return (labels - 1) * ml + lengths - 1
    raise ValidationError(f"no value mapping for {kind}")  # pragma: no cover


def _emit_ids(
    cfg: SchemeConfig,
    layout: VocabLayout,
    starts: np.ndarray,
    lengths: np.ndarray,
    labels: np.ndarray,
) -> np.ndarray:
    kinds = group_kinds(cfg)
    if starts.size == 0:
        return np.zeros(0, dtype=np.int64)
    cols = []
    for kind in kinds:
        seg = layout.segment(kind)
        values = _column_values(kind, cfg, starts, lengths, labels)
        if values.size and (values.min() < 0 or values.max() >= seg.size):
            raise ValidationError(
                f"{kind} value outside segment of size {seg.size}; "
                "mask is inconsistent with the scheme configuration"
            )
        cols.append(values + seg.offset)
    return np.stack(cols, axis=1).reshape(-1)


def _apply_run_order(cfg: SchemeConfig, *arrays: np.ndarray) -> Tuple[np.ndarray, ...]:
    if cfg.run_order != "shuffled" or arrays[0].size < 2:
        return arrays
    perm = np.random.default_rng(cfg.shuffle_seed).permutation(arrays[0].size)
    return tuple(a[perm] for a in arrays)


def _foreground_runs(vector: np.ndarray, cfg: SchemeConfig):
    starts, lengths, labels = extract_run_arrays(vector)
    starts, lengths, labels = split_run_arrays(starts, lengths, labels, cfg.effective_max_len)
    return _apply_run_order(cfg, starts, lengths, labels)


def _coverage_runs(vector: np.ndarray, cfg: SchemeConfig):
    starts, lengths, labels = extract_run_arrays(vector, include_background=True)
    starts, lengths, labels = split_run_arrays(starts, lengths, labels, cfg.effective_max_len)
    return _apply_run_order(cfg, starts, lengths, labels)


def _transitions(vector: np.ndarray, cfg: SchemeConfig):
    """Positions where the label changes, with the implicit leading
    background segment dropped, plus the label after each transition."""
    starts, _, labels = extract_run_arrays(vector, include_background=True)
    if labels.size and labels[0] == 0:
        starts, labels = starts[1:], labels[1:]
    return _apply_run_order(cfg, starts, labels)


def encode_vector(vector: np.ndarray, cfg: SchemeConfig, layout: VocabLayout) -> np.ndarray:
    """Token ids for one flattened label vector (shared by the static and
    video encoders)."""
    if vector.size != cfg.vector_length:
        raise ValidationError(
            f"vector length {vector.size} does not match configuration {cfg.vector_length}"
        )
    if vector.size and int(vector.max()) > _label_budget(cfg):
        raise ValidationError(f"label {int(vector.max())} exceeds configured class count")
    if cfg.scheme in _DIFF_SCHEMES:
        positions, labels = _transitions(vector, cfg)
        lengths = np.ones_like(positions)
        return _emit_ids(cfg, layout, positions, lengths, labels)
    if cfg.scheme in _COVERAGE_SCHEMES:
        starts, lengths, labels = _coverage_runs(vector, cfg)
    else:
        starts, lengths, labels = _foreground_runs(vector, cfg)
    return _emit_ids(cfg, layout, starts, lengths, labels)


def _label_budget(cfg: SchemeConfig) -> int:
    if cfg.scheme.binary_only:
        return 1
    if cfg.scheme in (Scheme.TAC, Scheme.LTAC):
        return getattr(cfg, "composite_classes")
    return cfg.num_classes


# ---------------------------------------------------------------------------
# parsing token ids back into run components


def _strip_specials(ids: np.ndarray, cfg: SchemeConfig, mode: str) -> np.ndarray:
    if not cfg.specials:
        return ids
    special_pos = np.flatnonzero(ids < cfg.specials)
    if special_pos.size == 0:
        return ids
    first = int(special_pos[0])
    if mode == "strict":
        if first != ids.size - 1:
            raise ParseError("reserved token before end of sequence", first)
        if int(ids[first]) != cfg.eos_id:
            raise ParseError(f"unexpected reserved token {int(ids[first])}", first)
    return ids[:first]


def _parse_columns(
    ids: np.ndarray, cfg: SchemeConfig, layout: VocabLayout, mode: str
) -> Dict[SegmentKind, np.ndarray]:
    kinds = group_kinds(cfg)
    k = len(kinds)
    ids = _strip_specials(np.asarray(ids, dtype=np.int64), cfg, mode)
    rem = ids.size % k
    if rem:
        if mode == "strict":
            raise ParseError("sequence ends inside a run group", ids.size - rem)
        ids = ids[: ids.size - rem]
    if ids.size == 0:
        return {kind: np.zeros(0, dtype=np.int64) for kind in kinds}
    table = ids.reshape(-1, k)
    out: Dict[SegmentKind, np.ndarray] = {}
    for j, kind in enumerate(kinds):
        seg = layout.segment(kind)
        col = table[:, j]
        bad = (col < seg.offset) | (col >= seg.offset + seg.size)
        if np.any(bad):
            if mode == "strict":
                row = int(np.flatnonzero(bad)[0])
                raise ParseError(f"expected a {kind.value} token", row * k + j)
            col = np.clip(col, seg.offset, seg.offset + seg.size - 1)
        out[kind] = col - seg.offset
    return out


def _columns_to_runs(
    cols: Dict[SegmentKind, np.ndarray], cfg: SchemeConfig
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(starts, lengths, labels) from parsed per-kind value columns.

    BAC starts come from prefix sums; differential schemes return the
    transition positions with unit lengths.
    """
    ml = cfg.effective_max_len
    if SegmentKind.LAC in cols:
        v = cols[SegmentKind.LAC]
        lengths = v % ml + 1
        labels = v // ml if cfg.scheme is Scheme.BAC_LAC else v // ml + 1
    elif SegmentKind.LTAC in cols:
        v = cols[SegmentKind.LTAC]
        lengths, labels = v % ml + 1, v // ml + 1
    else:
        if SegmentKind.LENGTH in cols:
            lengths = cols[SegmentKind.LENGTH] + 1
        else:
            lengths = np.ones_like(next(iter(cols.values())))
        if SegmentKind.TAC in cols:
            labels = cols[SegmentKind.TAC] + 1
        elif SegmentKind.CLASS in cols:
            raw = cols[SegmentKind.CLASS]
            labels = raw if _class_values_raw(cfg) else raw + 1
        else:
            labels = np.ones_like(lengths)

    if SegmentKind.START in cols:
        starts = cols[SegmentKind.START]
    elif SegmentKind.START_ROW in cols:
        starts = _flat_of(cols[SegmentKind.START_ROW], cols[SegmentKind.START_COL], cfg)
    else:  # coverage schemes: starts are implicit prefix sums
        starts = np.cumsum(lengths) - lengths
    return starts, lengths, labels


def decode_vector(
    ids: np.ndarray, cfg: SchemeConfig, layout: VocabLayout, mode: str = "strict"
) -> np.ndarray:
    """Rebuild the flattened label vector from token ids."""
    _check_mode(mode)
    cols = _parse_columns(ids, cfg, layout, mode)
    starts, lengths, labels = _columns_to_runs(cols, cfg)
    n = cfg.vector_length
    if starts.size == 0:
        return np.zeros(n, dtype=np.int64)

    if cfg.scheme in _DIFF_SCHEMES:
        return _fill_transitions(starts, labels, cfg, mode)
    if cfg.scheme in _COVERAGE_SCHEMES:
        total = int(lengths.sum())
        if mode == "strict" and total != n:
            raise ParseError(f"coverage pairs fill {total} of {n} pixels", int(np.asarray(ids).size))
        vec = np.repeat(labels, lengths)
        if vec.size >= n:
            return vec[:n].astype(np.int64)
        return np.concatenate([vec, np.zeros(n - vec.size, dtype=np.int64)])
    return paint_runs(starts, lengths, labels, n, mode)


def _fill_transitions(positions: np.ndarray, labels: np.ndarray, cfg: SchemeConfig, mode: str) -> np.ndarray:
    n = cfg.vector_length
    if cfg.scheme is Scheme.DIFF_BIN:
        labels = None
    if mode == "strict":
        if np.any(positions[1:] <= positions[:-1]):
            bad = int(np.flatnonzero(positions[1:] <= positions[:-1])[0]) + 1
            k = 1 if labels is None else 2
            raise ParseError("transition positions must strictly increase", bad * k)
        if labels is not None:
            prev = np.concatenate(([0], labels[:-1]))
            if np.any(labels == prev):
                bad = int(np.flatnonzero(labels == prev)[0])
                raise ParseError("transition does not change the label", bad * 2 + 1)
    else:
        order = np.argsort(positions, kind="stable")
        positions = positions[order]
        if labels is not None:
            labels = labels[order]
    if labels is None:
        labels = 1 - (np.arange(positions.size, dtype=np.int64) % 2)
    bounds = np.concatenate([positions, [n]])
    seg_lengths = np.maximum(bounds[1:] - bounds[:-1], 0)
    vec = np.zeros(n, dtype=np.int64)
    head = int(positions[0])
    body = np.repeat(labels, seg_lengths)
    vec[head : head + body.size] = body
    return vec


# ---------------------------------------------------------------------------
# public static codec surface


def make_sequence(ids, cfg: SchemeConfig, kind: str = "static") -> TokenSequence:
    """Wrap raw ids with their configuration and derived layout."""
    return TokenSequence(np.asarray(ids, dtype=np.int64), cfg, build_layout(cfg), kind)


def encode_static(mask: LabelMask, cfg: SchemeConfig) -> TokenSequence:
    """Tokenize a static mask under ``cfg``."""
    if cfg.scheme.is_video:
        raise ValidationError(f"{cfg.scheme} is a video scheme; use encode_video")
    if cfg.scheme is Scheme.SPLIT_STREAM:
        raise ValidationError("split-stream masks are encoded with encode_split_stream")
    if (mask.height, mask.width) != (cfg.height, cfg.width):
        raise ValidationError(
            f"mask is {mask.height}x{mask.width}, configuration expects {cfg.height}x{cfg.width}"
        )
    layout = build_layout(cfg)
    vector = flatten_2d(mask, cfg.flatten_order)
    return TokenSequence(encode_vector(vector, cfg, layout), cfg, layout, "static")


def decode_static(tokens: TokenSequence, mode: str = "strict") -> LabelMask:
    """Invert encode_static. Strict mode raises ParseError on grammar
    violations; lenient mode snaps stray ids to the nearest legal value and
    drops malformed trailing fragments."""
    cfg = tokens.config
    if cfg.scheme.is_video:
        raise ValidationError(f"{cfg.scheme} sequences decode with decode_video")
    if cfg.scheme is Scheme.SPLIT_STREAM:
        raise ValidationError("split-stream sequences decode with decode_split_stream")
    vec = decode_vector(tokens.ids, cfg, tokens.layout, mode)
    if mode == "lenient":
        np.clip(vec, 0, cfg.num_classes, out=vec)
    grid = unflatten_2d(vec, cfg.height, cfg.width, cfg.flatten_order)
    return LabelMask(grid, cfg.num_classes)


@dataclass(eq=False)
class SplitStreams:
    """Four aligned per-run token streams: start row, start column, length,
    class. Each stream has its own small vocabulary."""

    sy: np.ndarray
    sx: np.ndarray
    length: np.ndarray
    cls: np.ndarray
    config: SchemeConfig
    layouts: Dict[str, VocabLayout]

    def __post_init__(self):
        sizes = {len(self.sy), len(self.sx), len(self.length), len(self.cls)}
        if len(sizes) != 1:
            raise ValidationError("split streams must be aligned (equal lengths)")

    @property
    def num_runs(self) -> int:
        return int(len(self.sy))

    def streams(self) -> Dict[str, np.ndarray]:
        return {"sy": self.sy, "sx": self.sx, "len": self.length, "cls": self.cls}


_STREAM_KINDS = {
    "sy": SegmentKind.START_ROW,
    "sx": SegmentKind.START_COL,
    "len": SegmentKind.LENGTH,
    "cls": SegmentKind.CLASS,
}


def _stream_layouts(cfg: SchemeConfig) -> Dict[str, VocabLayout]:
    sizes = {
        "sy": cfg.height,
        "sx": cfg.width,
        "len": cfg.effective_max_len,
        "cls": cfg.num_classes,
    }
    out = {}
    for name, size in sizes.items():
        segs = []
        offset = 0
        if cfg.specials:
            segs.append(Segment(SegmentKind.SPECIAL, 0, cfg.specials))
            offset = cfg.specials
        segs.append(Segment(_STREAM_KINDS[name], offset, size))
        out[name] = VocabLayout(tuple(segs))
    return out


def encode_split_stream(mask: LabelMask, cfg: SchemeConfig) -> SplitStreams:
    """Tokenize each run component into its own stream."""
    if cfg.scheme is not Scheme.SPLIT_STREAM:
        raise ValidationError("configuration must use the split-stream scheme")
    if (mask.height, mask.width) != (cfg.height, cfg.width):
        raise ValidationError("mask size does not match configuration")
    vector = flatten_2d(mask, cfg.flatten_order)
    if vector.size and int(vector.max()) > cfg.num_classes:
        raise ValidationError("label exceeds configured class count")
    starts, lengths, labels = _foreground_runs(vector, cfg)
    rows, cols = _rows_cols_of(starts, cfg)
    layouts = _stream_layouts(cfg)
    sp = cfg.specials
    return SplitStreams(
        sy=rows + sp,
        sx=cols + sp,
        length=lengths - 1 + sp,
        cls=labels - 1 + sp,
        config=cfg,
        layouts=layouts,
    )


def decode_split_stream(streams: SplitStreams, mode: str = "strict") -> LabelMask:
    """Zip the four streams back into runs and rebuild the mask."""
    _check_mode(mode)
    cfg = streams.config
    values = {}
    for name, ids in streams.streams().items():
        ids = np.asarray(ids, dtype=np.int64)
        seg = streams.layouts[name].segment(_STREAM_KINDS[name])
        bad = (ids < seg.offset) | (ids >= seg.offset + seg.size)
        if np.any(bad):
            if mode == "strict":
                raise ParseError(f"stream {name} has an out-of-range token", int(np.flatnonzero(bad)[0]))
            ids = np.clip(ids, seg.offset, seg.offset + seg.size - 1)
        values[name] = ids - seg.offset
    starts = _flat_of(values["sy"], values["sx"], cfg)
    vec = paint_runs(starts, values["len"] + 1, values["cls"] + 1, cfg.vector_length, mode)
    grid = unflatten_2d(vec, cfg.height, cfg.width, cfg.flatten_order)
    return LabelMask(grid, cfg.num_classes)


# ---------------------------------------------------------------------------
# grammar-constrained decoding


class _GrammarState:
    """Tracks which token ids are legal at the current position.

    Legality covers segment membership plus the scheme's structural rules
    (monotone non-overlapping starts, length fitting the remaining space,
    increasing transition positions), so that emitted sequences always
    survive strict parsing.
    """

    def __init__(self, cfg: SchemeConfig, layout: VocabLayout):
        self.cfg = cfg
        self.layout = layout
        self.kinds = group_kinds(cfg)
        self.pos = 0
        self.covered_end = 0  # next admissible start / pixels already covered
        self.last_position = -1  # differential schemes
        self.current_value = 0  # running class of differential decoding
        self.pending_row: Optional[int] = None
        self.pending_start = 0
        self.pending_len = 0
        self.rows_left = 1  # score rows still available, current one included
        self.done = False

    # -- helpers ------------------------------------------------------

    def _mark(self, mask: np.ndarray, kind: SegmentKind, values: np.ndarray):
        seg = self.layout.segment(kind)
        mask[seg.offset + values] = True

    def _start_bound(self) -> int:
        """First admissible flat start index."""
        if self.cfg.scheme in _DIFF_SCHEMES:
            return self.last_position + 1
        return self.covered_end

    def legal_mask(self) -> np.ndarray:
        cfg, layout = self.cfg, self.layout
        v = layout.total
        mask = np.zeros(v, dtype=bool)
        if self.done:
            return mask
        kind = self.kinds[self.pos]
        ml = cfg.effective_max_len
        coverage = cfg.scheme in _COVERAGE_SCHEMES

        if self.pos == 0 and cfg.eos_id is not None:
            # a coverage sequence may only end empty or complete
            if not coverage or self.covered_end == 0:
                mask[cfg.eos_id] = True
        if coverage and self.pos == 0 and not self._coverage_feasible():
            return mask

        if kind is SegmentKind.START:
            seg = layout.segment(kind)
            lo = self._start_bound()
            if lo < seg.size:
                mask[seg.offset + lo : seg.offset + seg.size] = True
        elif kind is SegmentKind.START_ROW:
            rows = np.arange(layout.segment(kind).size)
            flat_hi = _flat_of(rows, np.full(rows.size, cfg.width - 1), cfg)
            self._mark(mask, kind, rows[flat_hi >= self.covered_end])
        elif kind is SegmentKind.START_COL:
            cols = np.arange(layout.segment(kind).size)
            rows = np.full(cols.size, self.pending_row)
            flat = _flat_of(rows, cols, cfg)
            self._mark(mask, kind, cols[flat >= self.covered_end])
        elif kind is SegmentKind.LENGTH:
            hi = min(self._length_bound(), ml)
            lo = self._length_floor()
            if lo <= hi:
                self._mark(mask, kind, np.arange(lo - 1, hi))
        elif kind in (SegmentKind.LAC, SegmentKind.LTAC):
            seg = layout.segment(kind)
            hi = min(self._length_bound(), ml)
            lo = self._length_floor()
            if lo <= hi:
                values = np.arange(seg.size)
                lengths = values % ml + 1
                self._mark(mask, kind, values[(lengths >= lo) & (lengths <= hi)])
        elif kind is SegmentKind.TAC:
            self._mark(mask, kind, np.arange(layout.segment(kind).size))
        elif kind is SegmentKind.CLASS:
            seg = layout.segment(kind)
            values = np.arange(seg.size)
            if cfg.scheme is Scheme.DIFF_MC:
                values = values[values != self.current_value]
            self._mark(mask, kind, values)
        return mask

    def _length_bound(self) -> int:
        n = self.cfg.vector_length
        if self.cfg.scheme in _COVERAGE_SCHEMES:
            return n - self.covered_end
        return n - self.pending_start

    def _length_floor(self) -> int:
        """Minimum legal length.

        For coverage schemes the chosen length must leave a remainder the
        available score rows can still tile, otherwise the sequence could
        never reach exact coverage and strict parsing would reject it.
        """
        if self.cfg.scheme not in _COVERAGE_SCHEMES:
            return 1
        k = len(self.kinds)
        future_groups = max(self.rows_left - k, 0) // k
        coverable_later = future_groups * self.cfg.effective_max_len
        remaining = self.cfg.vector_length - self.covered_end
        return max(1, remaining - coverable_later)

    def _coverage_feasible(self) -> bool:
        """Whether the remaining rows can still tile the remaining pixels."""
        k = len(self.kinds)
        remaining = self.cfg.vector_length - self.covered_end
        return (self.rows_left // k) * self.cfg.effective_max_len >= remaining

    def advance(self, token_id: int):
        cfg = self.cfg
        if cfg.eos_id is not None and token_id == cfg.eos_id:
            self.done = True
            return
        kind = self.kinds[self.pos]
        value = self.layout.value_of(kind, token_id)
        ml = cfg.effective_max_len
        if kind is SegmentKind.START:
            self.pending_start = value
        elif kind is SegmentKind.START_ROW:
            self.pending_row = value
        elif kind is SegmentKind.START_COL:
            self.pending_start = int(_flat_of(np.array([self.pending_row]), np.array([value]), cfg)[0])
        elif kind is SegmentKind.LENGTH:
            self.pending_len = value + 1
        elif kind in (SegmentKind.LAC, SegmentKind.LTAC):
            self.pending_len = value % ml + 1
        elif kind is SegmentKind.CLASS and cfg.scheme is Scheme.DIFF_MC:
            self.current_value = value
        self.pos = (self.pos + 1) % len(self.kinds)
        if self.pos == 0:
            self._finish_group()

    def _finish_group(self):
        cfg = self.cfg
        if cfg.scheme in _DIFF_SCHEMES:
            self.last_position = self.pending_start
            if self.last_position >= cfg.vector_length - 1:
                self.done = True
        elif cfg.scheme in _COVERAGE_SCHEMES:
            self.covered_end += self.pending_len
            if self.covered_end >= cfg.vector_length:
                self.done = True
        else:
            self.covered_end = self.pending_start + self.pending_len
            if self.covered_end >= cfg.vector_length:
                self.done = True


def constrained_argmax_decode(scores: np.ndarray, cfg: SchemeConfig) -> TokenSequence:
    """Greedy decoding restricted to grammatically legal token ids.

    At every position only the ids the scheme grammar allows compete; the
    emitted token is the highest-scoring legal id, ties going to the
    smallest id. Decoding stops at the end special, when the mask is
    exhausted, or when the score rows run out. The result always parses
    strictly.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] < 1:
        raise ValidationError("scores must be a (L, V) matrix with L >= 1")
    layout = build_layout(cfg)
    if scores.shape[1] != layout.total:
        raise ValidationError(
            f"scores have {scores.shape[1]} columns, vocabulary needs {layout.total}"
        )
    state = _GrammarState(cfg, layout)
    out = []
    total_rows = scores.shape[0]
    for i, row in enumerate(scores):
        state.rows_left = total_rows - i
        legal = state.legal_mask()
        if not legal.any():
            break
        masked = np.where(legal, row, -np.inf)
        token = int(np.argmax(masked))
        out.append(token)
        state.advance(token)
        if state.done:
            break
    if state.pos != 0:  # unfinished trailing group cannot parse strictly
        out = out[: len(out) - state.pos]
    kind = "video" if cfg.scheme.is_video else "static"
    return TokenSequence(np.array(out, dtype=np.int64), cfg, layout, kind)
