"""Token-corruption simulation, robustness measurement, and the minimal
morphological repair used to patch up decoded masks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .errors import ValidationError
from .masks import LabelMask
from .metrics import ConfusionMatrix, compute_metrics
from .schemes import SchemeConfig, TokenSequence, group_kinds
from .static_codecs import decode_static, encode_static

DROP_RUN = "drop_run"
DROP_TOKEN = "drop_token"
PERTURB_TOKEN = "perturb_token"


@dataclass(frozen=True)
class CorruptionSpec:
    """What to break: whole run groups, single tokens, or token values
    nudged within their own vocabulary segment."""

    kind: str
    count: int
    radius: int = 1

    def __post_init__(self):
        if self.kind not in (DROP_RUN, DROP_TOKEN, PERTURB_TOKEN):
            raise ValidationError(f"unknown corruption kind {self.kind!r}")
        if self.count < 0:
            raise ValidationError("count must be >= 0")
        if self.radius < 1:
            raise ValidationError("radius must be >= 1")


def _split_trailing_eos(seq: TokenSequence) -> Tuple[np.ndarray, np.ndarray]:
    ids = seq.ids
    sp = seq.config.specials
    if sp and ids.size and ids[-1] < sp:
        return ids[:-1], ids[-1:]
    if sp and np.any(ids < sp):
        raise ValidationError("cannot corrupt sequences with interior reserved tokens")
    return ids, np.zeros(0, dtype=np.int64)


def _clamped(requested: int, available: int, what: str) -> int:
    if requested > available:
        warnings.warn(f"requested {requested} {what} but only {available} available; clamping")
        return available
    return requested


def corrupt(seq: TokenSequence, spec: CorruptionSpec, seed: int = 0) -> TokenSequence:
    """Deterministically corrupted copy of ``seq``.

    drop_run removes whole per-run token groups, drop_token removes single
    ids, perturb_token replaces ids with other legal ids of the same
    vocabulary segment within the given radius.
    """
    if seq.kind not in ("static", "video"):
        raise ValidationError("corruption operates on fixed-group static/video sequences")
    rng = np.random.default_rng(seed)
    body, tail = _split_trailing_eos(seq)
    k = len(group_kinds(seq.config))

    if spec.kind == DROP_RUN:
        groups = body.reshape(-1, k)
        n = _clamped(spec.count, groups.shape[0], "run groups")
        if n:
            drop = rng.choice(groups.shape[0], size=n, replace=False)
            groups = np.delete(groups, drop, axis=0)
        body = groups.reshape(-1)
    elif spec.kind == DROP_TOKEN:
        n = _clamped(spec.count, body.size, "tokens")
        if n:
            drop = rng.choice(body.size, size=n, replace=False)
            body = np.delete(body, drop)
    else:  # perturb within-segment
        n = _clamped(spec.count, body.size, "tokens")
        body = body.copy()
        if n:
            picks = rng.choice(body.size, size=n, replace=False)
            for pos in picks:
                token = int(body[pos])
                kind, _ = seq.layout.kind_of(token)
                s = seq.layout.segment(kind)
                lo = max(s.offset, token - spec.radius)
                hi = min(s.offset + s.size - 1, token + spec.radius)
                candidates = [t for t in range(lo, hi + 1) if t != token]
                if candidates:
                    body[pos] = candidates[int(rng.integers(0, len(candidates)))]
    return TokenSequence(np.concatenate([body, tail]), seq.config, seq.layout, seq.kind)


@dataclass
class RobustnessReport:
    trials: int
    dice_per_trial: List[float]
    changed_per_trial: List[int]
    dice_mean: float
    dice_min: float
    changed_mean: float
    changed_max: int


def robustness_eval(
    mask: LabelMask,
    cfg: SchemeConfig,
    spec: CorruptionSpec,
    trials: int = 1,
    seed: int = 0,
) -> RobustnessReport:
    """Corrupt, leniently decode, and score against the clean mask.

    Trial t uses seed + t, so trials are independent and reproducible in
    any execution order.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    clean_seq = encode_static(mask, cfg)
    dices: List[float] = []
    changed: List[int] = []
    for t in range(trials):
        noisy = corrupt(clean_seq, spec, seed + t)
        decoded = decode_static(noisy, mode="lenient")
        changed.append(int(np.count_nonzero(decoded.labels != mask.labels)))
        dices.append(_foreground_dice(mask, decoded))
    return RobustnessReport(
        trials=trials,
        dice_per_trial=dices,
        changed_per_trial=changed,
        dice_mean=float(np.mean(dices)),
        dice_min=float(np.min(dices)),
        changed_mean=float(np.mean(changed)),
        changed_max=int(np.max(changed)),
    )


def _foreground_dice(gt: LabelMask, pred: LabelMask) -> float:
    cm = ConfusionMatrix(gt.num_classes)
    cm.add(gt, pred)
    try:
        return compute_metrics(cm, include_background=False).mean_dice
    except ValidationError:
        return 1.0 if gt.same_as(pred) else 0.0


def _shift(binary: np.ndarray, delta: int, axis: int, fill: bool) -> np.ndarray:
    out = np.full_like(binary, fill)
    if delta == 0:
        return binary.copy()
    src = [slice(None)] * binary.ndim
    dst = [slice(None)] * binary.ndim
    if delta > 0:
        src[axis] = slice(0, binary.shape[axis] - delta)
        dst[axis] = slice(delta, None)
    else:
        src[axis] = slice(-delta, None)
        dst[axis] = slice(0, binary.shape[axis] + delta)
    out[tuple(dst)] = binary[tuple(src)]
    return out


def _dilate(binary: np.ndarray, radius: int) -> np.ndarray:
    out = binary
    for axis in (0, 1):
        acc = out.copy()
        for d in range(1, radius + 1):
            acc |= _shift(out, d, axis, False)
            acc |= _shift(out, -d, axis, False)
        out = acc
    return out


def _erode(binary: np.ndarray, radius: int) -> np.ndarray:
    # pixels beyond the edge count as foreground, so solid regions touching
    # the border survive closing unchanged
    out = binary
    for axis in (0, 1):
        acc = out.copy()
        for d in range(1, radius + 1):
            acc &= _shift(out, d, axis, True)
            acc &= _shift(out, -d, axis, True)
        out = acc
    return out


def morph_repair(mask: LabelMask, op: str = "close", radius: int = 1) -> LabelMask:
    """Per-class binary closing or opening with a square element of side
    2*radius + 1; where repaired classes overlap, the smallest id wins."""
    if op not in ("close", "open"):
        raise ValidationError("op must be 'close' or 'open'")
    if radius < 1:
        raise ValidationError("radius must be >= 1")
    out = np.zeros_like(mask.labels)
    for c in range(1, mask.num_classes + 1):
        binary = mask.labels == c
        if not binary.any():
            continue
        if op == "close":
            repaired = _erode(_dilate(binary, radius), radius)
        else:
            repaired = _dilate(_erode(binary, radius), radius)
        out = np.where((out == 0) & repaired, c, out)
    return LabelMask(out, mask.num_classes)
