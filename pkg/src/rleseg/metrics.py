"""Segmentation metrics over pixel confusion counts, sequence-length
statistics, and subsampling quality measurement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import UndefinedMetricError, ValidationError
from .masks import LabelMask, VideoMask, subsample, upsample
from .schemes import Scheme, SchemeConfig, VideoSchemeConfig


class ConfusionMatrix:
    """(C+1) x (C+1) pixel counts, n[i][j] = pixels of true class i
    predicted as class j; background is row/column 0."""

    def __init__(self, num_classes: int, counts: Optional[np.ndarray] = None):
        if num_classes < 1:
            raise ValidationError("num_classes must be >= 1")
        self.num_classes = num_classes
        side = num_classes + 1
        if counts is None:
            counts = np.zeros((side, side), dtype=np.int64)
        else:
            counts = np.asarray(counts, dtype=np.int64)
            if counts.shape != (side, side):
                raise ValidationError(f"counts must be {side}x{side}")
            if counts.min() < 0:
                raise ValidationError("counts must be non-negative")
        self.counts = counts

    def add(self, gt: LabelMask, pred: LabelMask) -> "ConfusionMatrix":
        """Accumulate one ground-truth/prediction pair in place."""
        if gt.labels.shape != pred.labels.shape:
            raise ValidationError("ground truth and prediction sizes differ")
        side = self.num_classes + 1
        if int(gt.labels.max()) >= side or int(pred.labels.max()) >= side:
            raise ValidationError("labels outside the confusion matrix class set")
        flat = gt.labels.reshape(-1) * side + pred.labels.reshape(-1)
        self.counts += np.bincount(flat, minlength=side * side).reshape(side, side)
        return self

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.num_classes != self.num_classes:
            raise ValidationError("cannot merge matrices over different class sets")
        return ConfusionMatrix(self.num_classes, self.counts + other.counts)

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return self.merge(other)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def gt_totals(self) -> np.ndarray:
        """t_i: ground-truth pixel count per class."""
        return self.counts.sum(axis=1)


def accumulate(gt: LabelMask, pred: LabelMask, cm: ConfusionMatrix) -> ConfusionMatrix:
    """Fold one image pair into ``cm`` (mutates and returns it)."""
    return cm.add(gt, pred)


@dataclass
class SegMetrics:
    """Per-class and mean metric values.

    ``fw_prec_mean`` normalizes the weighted IoU sum by the total pixel
    count; ``fw_prec_reciprocal`` scales it by the sum of reciprocal
    per-class counts instead. Both normalizations exist in the wild, so
    both are always reported; ``fw_prec`` mirrors the variant selected at
    computation time.
    """

    classes: Tuple[int, ...]
    rec: Dict[int, float]
    prec: Dict[int, float]
    dice: Dict[int, float]
    mean_rec: float
    mean_prec: float
    mean_dice: float
    fw_rec: float
    fw_prec: float
    fw_prec_mean: float
    fw_prec_reciprocal: float
    excluded: Dict[str, Tuple[int, ...]] = field(default_factory=dict)


def compute_metrics(
    cm: ConfusionMatrix,
    class_set: Optional[Sequence[int]] = None,
    include_background: bool = True,
    fw_prec_variant: str = "mean",
) -> SegMetrics:
    """Recall, precision (per-class IoU), their frequency-weighted forms,
    and the Dice score.

    Classes whose denominators are zero are dropped from the means and
    listed in ``excluded`` rather than being scored 0 or 1.
    """
    if fw_prec_variant not in ("mean", "reciprocal"):
        raise ValidationError("fw_prec_variant must be 'mean' or 'reciprocal'")
    if class_set is None:
        class_set = range(0 if include_background else 1, cm.num_classes + 1)
    classes = tuple(int(c) for c in class_set)
    if not classes:
        raise ValidationError("class_set must not be empty")
    side = cm.num_classes + 1
    if any(not 0 <= c < side for c in classes):
        raise ValidationError("class_set outside the confusion matrix")
    if cm.total == 0:
        raise UndefinedMetricError("confusion matrix is empty")

    n = cm.counts.astype(np.float64)
    t = n.sum(axis=1)  # ground-truth totals
    p = n.sum(axis=0)  # prediction totals
    diag = np.diag(n)

    rec: Dict[int, float] = {}
    prec: Dict[int, float] = {}
    dice: Dict[int, float] = {}
    excluded: Dict[str, List[int]] = {"rec": [], "prec": [], "dice": []}
    for c in classes:
        if t[c] > 0:
            rec[c] = float(diag[c] / t[c])
        else:
            excluded["rec"].append(c)
        union = t[c] + p[c] - diag[c]
        if union > 0:
            prec[c] = float(diag[c] / union)
        else:
            excluded["prec"].append(c)
        if t[c] + p[c] > 0:
            dice[c] = float(2.0 * diag[c] / (t[c] + p[c]))
        else:
            excluded["dice"].append(c)

    if not rec and not prec and not dice:
        raise UndefinedMetricError("all requested classes have zero denominators")

    sel_t = sum(t[c] for c in classes)
    fw_rec = float(sum(diag[c] for c in classes) / sel_t) if sel_t > 0 else 0.0

    weighted = sum(t[c] * prec[c] for c in classes if c in prec)
    fw_mean = float(weighted / sel_t) if sel_t > 0 else 0.0
    recip = sum(1.0 / t[c] for c in classes if t[c] > 0)
    fw_reciprocal = float(recip * weighted)

    def _mean(d: Dict[int, float]) -> float:
        return float(sum(d.values()) / len(d)) if d else 0.0

    return SegMetrics(
        classes=classes,
        rec=rec,
        prec=prec,
        dice=dice,
        mean_rec=_mean(rec),
        mean_prec=_mean(prec),
        mean_dice=_mean(dice),
        fw_rec=fw_rec,
        fw_prec=fw_mean if fw_prec_variant == "mean" else fw_reciprocal,
        fw_prec_mean=fw_mean,
        fw_prec_reciprocal=fw_reciprocal,
        excluded={k: tuple(v) for k, v in excluded.items() if v},
    )


def compare_masks(
    gt: LabelMask,
    pred: LabelMask,
    num_classes: Optional[int] = None,
    **kwargs,
) -> SegMetrics:
    """One-shot metrics for a single mask pair."""
    c = num_classes if num_classes is not None else max(gt.num_classes, pred.num_classes)
    cm = ConfusionMatrix(c)
    cm.add(gt, pred)
    return compute_metrics(cm, **kwargs)


@dataclass
class ConcentrationResult:
    per_image: List[float]
    median: float


def concentration_mae(
    pairs: Iterable[Tuple[LabelMask, LabelMask]], class_id: int
) -> ConcentrationResult:
    """Per-image absolute error in the pixel fraction of ``class_id``,
    aggregated as the median over images."""
    errors: List[float] = []
    for gt, pred in pairs:
        if gt.labels.shape != pred.labels.shape:
            raise ValidationError("paired masks must share a size")
        total = gt.labels.size
        conc_gt = float(np.count_nonzero(gt.labels == class_id)) / total
        conc_pred = float(np.count_nonzero(pred.labels == class_id)) / total
        errors.append(abs(conc_gt - conc_pred))
    if not errors:
        raise UndefinedMetricError("no image pairs supplied")
    return ConcentrationResult(errors, float(np.median(errors)))


@dataclass
class SeqLengthStats:
    count: int
    lengths: List[int]
    mean: float
    max: int
    pct_exceeding: Dict[int, float]


def sequence_length(item: Union[LabelMask, VideoMask], cfg: SchemeConfig) -> int:
    """Token count the configured codec needs for one mask."""
    from .static_codecs import encode_split_stream, encode_static
    from .video_codecs import encode_video

    if isinstance(cfg, VideoSchemeConfig):
        if not isinstance(item, VideoMask):
            raise ValidationError("video configuration needs VideoMask inputs")
        return encode_video(item, cfg).payload_length
    if cfg.scheme is Scheme.SPLIT_STREAM:
        streams = encode_split_stream(item, cfg)
        return 4 * streams.num_runs
    return encode_static(item, cfg).payload_length


def seq_length_stats(
    masks: Sequence[Union[LabelMask, VideoMask]],
    cfg: SchemeConfig,
    thresholds: Sequence[int] = (),
) -> SeqLengthStats:
    """Mean and maximum sequence length over a dataset, plus the share of
    inputs whose length strictly exceeds each threshold."""
    if not masks:
        raise ValidationError("dataset must not be empty")
    lengths = [sequence_length(m, cfg) for m in masks]
    pct = {
        int(th): 100.0 * sum(l > th for l in lengths) / len(lengths) for th in thresholds
    }
    return SeqLengthStats(
        count=len(lengths),
        lengths=lengths,
        mean=float(np.mean(lengths)),
        max=int(max(lengths)),
        pct_exceeding=pct,
    )


def subsample_quality(mask: LabelMask, target, **metric_kwargs) -> SegMetrics:
    """Metrics of subsample-then-replicate against the original mask,
    measuring what block pooling to ``target`` destroys."""
    small = subsample(mask, target)
    restored = upsample(small, (mask.height, mask.width))
    return compare_masks(mask, restored, num_classes=mask.num_classes, **metric_kwargs)
