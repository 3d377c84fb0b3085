"""Run-length tokenization codecs for segmentation masks.

Masks become sequences of discrete integer tokens and back, losslessly,
under a family of schemes trading sequence length against vocabulary
size: naive start/length runs, fused length-class tokens, background-as-
class coverage pairs, differential transitions, split component streams,
and the video schemes built on 3D flattening or composite time classes.
"""

from .errors import (
    CapacityError,
    MaskIOError,
    OverlapError,
    ParseError,
    RangeError,
    UndefinedMetricError,
    ValidationError,
)
from .masks import (
    FlattenOrder,
    InstanceMask,
    LabelMask,
    VideoMask,
    collapse_time_classes,
    composite_class_count,
    expand_time_classes,
    flatten_2d,
    flatten_3d,
    subsample,
    unflatten_2d,
    unflatten_3d,
    upsample,
)
from .runs import Run, RunList, extract_runs, runs_to_vector, shuffle_runs, split_runs
from .schemes import (
    Scheme,
    SchemeConfig,
    Segment,
    SegmentKind,
    StartMode,
    TokenSequence,
    VideoSchemeConfig,
    VocabLayout,
    build_layout,
    group_kinds,
)
from .static_codecs import (
    SplitStreams,
    constrained_argmax_decode,
    decode_split_stream,
    decode_static,
    encode_split_stream,
    encode_static,
    make_sequence,
)
from .video_codecs import decode_video, encode_video
from .structured_codecs import (
    decode_cw,
    decode_iw,
    encode_cw,
    encode_iw,
    structured_layout,
    token_weights,
)
from .planner import (
    FeasibilityReport,
    VocabBreakdown,
    feasibility_report,
    make_config,
    max_feasible_n,
    vocab_breakdown,
)
from .patches import (
    PatchGrid,
    augment_patch,
    extract_patch,
    extract_patches,
    invert_transforms,
    patchify,
    recompose,
)
from .metrics import (
    ConfusionMatrix,
    SegMetrics,
    accumulate,
    compare_masks,
    compute_metrics,
    concentration_mae,
    seq_length_stats,
    sequence_length,
    subsample_quality,
)
from .noise import CorruptionSpec, RobustnessReport, corrupt, morph_repair, robustness_eval

__version__ = "0.1.0"
