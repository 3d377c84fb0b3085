"""Vocabulary-size accounting and feasibility limits.

All arithmetic runs in plain Python integers so exponential token counts
stay exact. Feasibility uses the strict convention V < v_limit; boundary
hits are reported, not silently rounded.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

from .errors import ValidationError
from .masks import FlattenOrder
from .schemes import (
    Scheme,
    SchemeConfig,
    SegmentKind,
    StartMode,
    VideoSchemeConfig,
    build_layout,
)

Size = Union[int, Tuple[int, int]]

# Independently documented feasibility limits for common configurations,
# keyed by (scheme, mask side, class count) at v_limit 32000 and no
# reserved specials. Used to cross-check the formula output.
REFERENCE_MAX_N: Dict[Tuple[Scheme, int, int], int] = {
    (Scheme.TAC, 80, 1): 14,
    (Scheme.TAC, 80, 2): 9,
    (Scheme.TAC, 160, 1): 12,
    (Scheme.TAC, 160, 2): 6,
    (Scheme.LTAC, 80, 1): 8,
    (Scheme.LTAC, 80, 2): 5,
    (Scheme.FLAT_3DC, 80, 1): 5,
    (Scheme.FLAT_3DC, 160, 1): 1,
}

DEFAULT_V_LIMIT = 32000


def _as_size(size: Size) -> Tuple[int, int]:
    if isinstance(size, int):
        return size, size
    h, w = size
    return int(h), int(w)


def make_config(
    scheme: Scheme,
    size: Size,
    num_classes: int,
    frames: int = 1,
    start_mode: StartMode = StartMode.ONE_D,
    specials: int = 0,
    max_len: Optional[int] = None,
    flatten_order: FlattenOrder = FlattenOrder.ROW_MAJOR,
) -> SchemeConfig:
    """Build the right config class for a scheme from planner-style args."""
    h, w = _as_size(size)
    common = dict(
        scheme=scheme,
        height=h,
        width=w,
        num_classes=num_classes,
        start_mode=start_mode,
        flatten_order=flatten_order,
        max_len=max_len,
        specials=specials,
    )
    if scheme.is_video:
        return VideoSchemeConfig(frames=frames, **common)
    return SchemeConfig(**common)


@dataclass(frozen=True)
class VocabBreakdown:
    """Per-segment token counts plus the total vocabulary size."""

    scheme: Scheme
    segments: Tuple[Tuple[SegmentKind, int], ...]
    total: int

    def size_of(self, kind: SegmentKind) -> int:
        for k, size in self.segments:
            if k is kind:
                return size
        return 0


def vocab_breakdown(
    scheme: Scheme,
    size: Size,
    num_classes: int,
    frames: int = 1,
    start_mode: StartMode = StartMode.ONE_D,
    specials: int = 0,
    max_len: Optional[int] = None,
) -> VocabBreakdown:
    """Exact segment sizes and total V for one configuration."""
    cfg = make_config(scheme, size, num_classes, frames, start_mode, specials, max_len)
    layout = build_layout(cfg)
    return VocabBreakdown(
        scheme=scheme,
        segments=tuple((s.kind, s.size) for s in layout.segments),
        total=layout.total,
    )


def max_feasible_n(
    scheme: Scheme,
    size: Size,
    num_classes: int,
    v_limit: int = DEFAULT_V_LIMIT,
    start_mode: StartMode = StartMode.ONE_D,
    specials: int = 0,
    max_len: Optional[int] = None,
    n_cap: int = 10_000,
) -> int:
    """Largest frame count N with V < v_limit (strict), 0 if none fits.

    V is monotone increasing in N for every video scheme, so a linear
    scan from N=1 suffices.
    """
    if not scheme.is_video:
        raise ValidationError(f"{scheme} has no frame count to size")
    if v_limit < 1:
        raise ValidationError("v_limit must be positive")
    best = 0
    n = 1
    while n <= n_cap:
        v = vocab_breakdown(scheme, size, num_classes, n, start_mode, specials, max_len).total
        if v >= v_limit:
            break
        best = n
        n += 1
    return best


@dataclass(frozen=True)
class FeasibilityReport:
    """Formula-derived limit beside any documented reference limit."""

    scheme: Scheme
    size: Tuple[int, int]
    num_classes: int
    v_limit: int
    computed_n: int
    v_at_computed: Optional[int]
    v_at_next: Optional[int]
    reference_n: Optional[int]
    discrepancy: bool
    note: str = ""


def feasibility_report(
    scheme: Scheme,
    size: Size,
    num_classes: int,
    v_limit: int = DEFAULT_V_LIMIT,
    start_mode: StartMode = StartMode.ONE_D,
    specials: int = 0,
) -> FeasibilityReport:
    """Feasibility with cross-checking against documented reference limits.

    When the formula result and the reference disagree the report flags
    the discrepancy instead of preferring either number; extra reserved
    ids in the reference setup are the usual explanation.
    """
    h, w = _as_size(size)
    n = max_feasible_n(scheme, size, num_classes, v_limit, start_mode, specials)
    v_at = (
        vocab_breakdown(scheme, size, num_classes, n, start_mode, specials).total if n else None
    )
    v_next = vocab_breakdown(scheme, size, num_classes, n + 1, start_mode, specials).total
    reference = None
    if h == w and v_limit == DEFAULT_V_LIMIT and specials == 0 and start_mode is StartMode.ONE_D:
        reference = REFERENCE_MAX_N.get((scheme, h, num_classes))
        if reference is None and scheme in (Scheme.FLAT_3DC, Scheme.FLAT_3DF):
            reference = REFERENCE_MAX_N.get((Scheme.FLAT_3DC, h, 1))
    discrepancy = reference is not None and reference != n
    note = ""
    if n == 0:
        note = f"no feasible N: even N=1 needs V={v_next} against the strict limit {v_limit}"
    elif v_next == v_limit or (v_at is not None and v_at == v_limit - 1):
        note = f"boundary case: V for N={n + 1} is {v_next} against the strict limit {v_limit}"
    elif discrepancy:
        note = (
            f"formula allows N={n} (V={v_at}) but the documented limit is N={reference}; "
            "the reference setup likely reserves extra tokens"
        )
    return FeasibilityReport(
        scheme=scheme,
        size=(h, w),
        num_classes=num_classes,
        v_limit=v_limit,
        computed_n=n,
        v_at_computed=v_at,
        v_at_next=v_next,
        reference_n=reference,
        discrepancy=discrepancy,
        note=note,
    )
