"""Command-line interface tying the codecs, planner, patch pipeline,
metrics, and noise harness together.

Exit codes: 0 success, 1 validation failure (including roundtrip
mismatches), 2 I/O error, 3 vocabulary capacity error.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import List, Optional, Tuple

import numpy as np

from .errors import CapacityError, MaskIOError, ValidationError
from .masks import FlattenOrder
from .metrics import (
    ConfusionMatrix,
    compute_metrics,
    concentration_mae,
    seq_length_stats,
    subsample_quality,
)
from .noise import DROP_RUN, DROP_TOKEN, PERTURB_TOKEN, CorruptionSpec, robustness_eval
from .patches import (
    augment_patch,
    extract_patch,
    invert_transforms,
    patchify,
    random_transforms,
    recompose,
)
from .planner import feasibility_report, vocab_breakdown
from .schemes import Scheme, SchemeConfig, StartMode, VideoSchemeConfig
from .static_codecs import decode_static, decode_split_stream, encode_static, encode_split_stream
from .structured_codecs import decode_cw, decode_iw, encode_cw, encode_iw
from .video_codecs import decode_video, encode_video
from . import io_files, viz


def _parse_size(text: str) -> Tuple[int, int]:
    if "x" in text:
        h, w = text.split("x", 1)
        return int(h), int(w)
    side = int(text)
    return side, side


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scheme", default="naive-bin", help="tokenization scheme name")
    p.add_argument("--mask-size", default=None, help="S or HxW (defaults to the input size)")
    p.add_argument("--classes", type=int, default=1, help="foreground class count C")
    p.add_argument("--frames", type=int, default=2, help="frame count N for video schemes")
    p.add_argument("--start-mode", choices=["1d", "2d"], default="1d")
    p.add_argument("--flatten", choices=["row", "col"], default="row")
    p.add_argument("--max-len", type=int, default=None, help="run length bound override")
    p.add_argument("--specials", type=int, default=0, help="reserved token ids")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--run-order", choices=["canonical", "shuffled"], default="canonical")
    p.add_argument("--output-format", choices=["csv", "text"], default="text")


def _config_from_args(args, size: Tuple[int, int]) -> SchemeConfig:
    scheme = Scheme(args.scheme)
    common = dict(
        scheme=scheme,
        height=size[0],
        width=size[1],
        num_classes=args.classes,
        start_mode=StartMode(args.start_mode),
        flatten_order=FlattenOrder(args.flatten),
        max_len=args.max_len,
        specials=args.specials,
        run_order=args.run_order,
        shuffle_seed=args.seed,
    )
    if scheme.is_video:
        return VideoSchemeConfig(frames=args.frames, **common)
    return SchemeConfig(**common)


def _load_input(args, path: str):
    scheme = Scheme(args.scheme)
    if scheme.is_video:
        video = io_files.read_video_mask(path, args.classes)
        return video, (video.height, video.width)
    if getattr(args, "structured", "none") == "iw":
        inst = io_files.read_instance_mask(path)
        return inst, (inst.height, inst.width)
    mask = io_files.read_label_mask(path, args.classes)
    return mask, (mask.height, mask.width)


def _encode(args, item, cfg):
    structured = getattr(args, "structured", "none")
    if structured == "cw":
        return encode_cw(item, cfg)
    if structured == "iw":
        return encode_iw(item, cfg)
    if isinstance(cfg, VideoSchemeConfig):
        return encode_video(item, cfg)
    return encode_static(item, cfg)


def cmd_encode(args) -> int:
    item, size = _load_input(args, args.input)
    cfg = _config_from_args(args, _parse_size(args.mask_size) if args.mask_size else size)
    if Scheme(args.scheme) is Scheme.SPLIT_STREAM:
        raise ValidationError("split-stream encoding emits four files; use the library API")
    seq = _encode(args, item, cfg)
    io_files.write_token_file(args.output, seq)
    print(f"wrote {len(seq)} tokens to {args.output}")
    return 0


def cmd_decode(args) -> int:
    seq = io_files.read_token_file(args.input)
    if seq.kind == "video":
        video = decode_video(seq, mode=args.mode)
        io_files.write_video_mask(args.output, video)
    elif seq.kind == "cw":
        io_files.write_label_mask(args.output, decode_cw(seq, mode=args.mode))
    elif seq.kind == "iw":
        labels, instances = decode_iw(seq, mode=args.mode)
        io_files.write_label_mask(args.output, labels)
        stem, ext = os.path.splitext(args.output)
        io_files.write_instance_mask(stem + "_instances" + (ext or ".png"), instances)
    else:
        io_files.write_label_mask(args.output, decode_static(seq, mode=args.mode))
    print(f"decoded {args.input} -> {args.output}")
    return 0


def cmd_roundtrip(args) -> int:
    item, size = _load_input(args, args.input)
    cfg = _config_from_args(args, _parse_size(args.mask_size) if args.mask_size else size)
    scheme = Scheme(args.scheme)
    structured = getattr(args, "structured", "none")
    if scheme is Scheme.SPLIT_STREAM:
        back = decode_split_stream(encode_split_stream(item, cfg))
        mismatches = int(np.count_nonzero(back.labels != item.labels))
    elif structured == "cw":
        back = decode_cw(encode_cw(item, cfg))
        mismatches = int(np.count_nonzero(back.labels != item.labels))
    elif structured == "iw":
        labels, instances = decode_iw(encode_iw(item, cfg))
        mismatches = int(np.count_nonzero(labels.labels != item.to_label_mask().labels))
    elif isinstance(cfg, VideoSchemeConfig):
        back = decode_video(encode_video(item, cfg))
        mismatches = int(np.count_nonzero(back.stack() != item.stack()))
    else:
        back = decode_static(encode_static(item, cfg))
        mismatches = int(np.count_nonzero(back.labels != item.labels))
    print(f"roundtrip mismatched pixels: {mismatches}")
    return 0 if mismatches == 0 else 1


def cmd_vocab(args) -> int:
    size = _parse_size(args.mask_size) if args.mask_size else (80, 80)
    scheme = Scheme(args.scheme)
    if args.feasibility:
        if not scheme.is_video:
            raise ValidationError("feasibility limits apply to video schemes")
        rep = feasibility_report(scheme, size, args.classes, v_limit=args.limit, specials=args.specials)
        sys.stdout.write(io_files.feasibility_table([rep], args.output_format))
        return 0
    b = vocab_breakdown(
        scheme,
        size,
        args.classes,
        frames=args.frames,
        start_mode=StartMode(args.start_mode),
        specials=args.specials,
        max_len=args.max_len,
    )
    sys.stdout.write(io_files.vocab_table(b, args.output_format))
    print(f"V = {b.total}")
    return 0


def _mask_files(directory: str) -> List[str]:
    if not os.path.isdir(directory):
        raise MaskIOError(f"no such directory: {directory}")
    names = sorted(n for n in os.listdir(directory) if n.endswith((".png", ".grid")))
    if not names:
        raise MaskIOError(f"{directory} holds no mask files")
    return [os.path.join(directory, n) for n in names]


def cmd_stats(args) -> int:
    paths = _mask_files(args.input)
    masks = [io_files.read_label_mask(p, args.classes) for p in paths]
    sizes = {(m.height, m.width) for m in masks}
    if len(sizes) != 1:
        raise ValidationError(f"dataset mixes mask sizes: {sorted(sizes)}")
    cfg = _config_from_args(args, next(iter(sizes)))
    thresholds = [int(t) for t in args.thresholds.split(",")] if args.thresholds else []
    stats = seq_length_stats(masks, cfg, thresholds)
    sys.stdout.write(io_files.stats_table(stats, args.output_format))
    return 0


def cmd_patchify(args) -> int:
    mask = io_files.read_label_mask(args.input, args.classes)
    grid = patchify((mask.height, mask.width), args.patch, args.stride)
    os.makedirs(args.output, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    entries = []
    for i, origin in enumerate(grid.origins):
        piece = extract_patch(mask, origin, args.patch)
        transforms = random_transforms(rng, square=True) if args.augment else []
        piece = augment_patch(piece, transforms)
        name = f"patch_{i:04d}.png"
        io_files.write_label_mask(os.path.join(args.output, name), piece)
        entries.append({"origin": list(origin), "transform": [list(t) for t in transforms], "file": name})
    manifest = os.path.join(args.output, "manifest.json")
    io_files.write_patch_manifest(
        manifest,
        (mask.height, mask.width),
        args.patch,
        args.stride,
        args.classes,
        entries,
        seed=args.seed if args.augment else None,
    )
    print(f"wrote {grid.num_windows} patches and {manifest}")
    return 0


def cmd_recompose(args) -> int:
    doc = io_files.read_patch_manifest(args.manifest)
    base = os.path.dirname(os.path.abspath(args.manifest))
    num_classes = int(doc["num_classes"])
    pieces = []
    for entry in doc["patches"]:
        mask = io_files.read_label_mask(os.path.join(base, entry["file"]), num_classes)
        transforms = [tuple(t) for t in entry.get("transform", [])]
        if transforms:
            mask = augment_patch(mask, invert_transforms(transforms))
        pieces.append((mask, tuple(entry["origin"])))
    out = recompose(pieces, tuple(doc["source_size"]), args.combiner, num_classes=num_classes)
    io_files.write_label_mask(args.output, out)
    print(f"recomposed {len(pieces)} patches -> {args.output}")
    return 0


def _paired_paths(gt: str, pred: str) -> List[Tuple[str, str]]:
    if os.path.isdir(gt) != os.path.isdir(pred):
        raise ValidationError("ground truth and prediction must both be files or both directories")
    if os.path.isdir(gt):
        gt_files = _mask_files(gt)
        pred_files = _mask_files(pred)
        if [os.path.basename(p) for p in gt_files] != [os.path.basename(p) for p in pred_files]:
            raise ValidationError("ground truth and prediction directories hold different files")
        return list(zip(gt_files, pred_files))
    return [(gt, pred)]


def cmd_metrics(args) -> int:
    pairs = _paired_paths(args.gt, args.pred)
    cm = ConfusionMatrix(args.classes)
    loaded = []
    for g, p in pairs:
        gm = io_files.read_label_mask(g, args.classes)
        pm = io_files.read_label_mask(p, args.classes)
        cm.add(gm, pm)
        loaded.append((gm, pm))
    result = compute_metrics(cm, include_background=not args.foreground_only)
    sys.stdout.write(io_files.metrics_table(result, args.output_format))
    if args.concentration_class is not None:
        conc = concentration_mae(loaded, args.concentration_class)
        print(f"concentration_mae_median {conc.median:.6f}")
    return 0


def cmd_subsample_quality(args) -> int:
    mask = io_files.read_label_mask(args.input, args.classes)
    result = subsample_quality(mask, _parse_size(args.target))
    sys.stdout.write(io_files.metrics_table(result, args.output_format))
    return 0


def cmd_noise(args) -> int:
    mask = io_files.read_label_mask(args.input, args.classes)
    cfg = _config_from_args(args, (mask.height, mask.width))
    if args.drop_runs is not None:
        spec = CorruptionSpec(DROP_RUN, args.drop_runs)
    elif args.drop_tokens is not None:
        spec = CorruptionSpec(DROP_TOKEN, args.drop_tokens)
    elif args.perturb is not None:
        spec = CorruptionSpec(PERTURB_TOKEN, args.perturb, radius=args.radius)
    else:
        raise ValidationError("choose one of --drop-runs, --drop-tokens, --perturb")
    report = robustness_eval(mask, cfg, spec, trials=args.trials, seed=args.seed)
    sys.stdout.write(io_files.robustness_table(report, args.output_format))
    return 0


def cmd_viz(args) -> int:
    mask = io_files.read_label_mask(args.input, args.classes)
    rgb = viz.colorize_runs(mask, FlattenOrder(args.flatten)) if args.runs else viz.colorize_mask(mask)
    viz.save_image(args.output, rgb)
    print(f"wrote {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rleseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        _common_flags(p)
        p.set_defaults(fn=fn)
        return p

    p = add("encode", cmd_encode, help="tokenize a mask file or frame directory")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--structured", choices=["none", "cw", "iw"], default="none")

    p = add("decode", cmd_decode, help="decode a token file back to masks")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--mode", choices=["strict", "lenient"], default="strict")

    p = add("roundtrip", cmd_roundtrip, help="encode, decode, and diff (nonzero exit on mismatch)")
    p.add_argument("input")
    p.add_argument("--structured", choices=["none", "cw", "iw"], default="none")

    p = add("vocab", cmd_vocab, help="vocabulary breakdown and feasibility tables")
    p.add_argument("--feasibility", action="store_true")
    p.add_argument("--limit", type=int, default=32000)

    p = add("stats", cmd_stats, help="sequence-length statistics over a mask directory")
    p.add_argument("input")
    p.add_argument("--thresholds", default="")

    p = add("patchify", cmd_patchify, help="extract sliding-window patches plus a manifest")
    p.add_argument("input")
    p.add_argument("--patch", type=int, required=True)
    p.add_argument("--stride", type=int, required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--augment", action="store_true")

    p = add("recompose", cmd_recompose, help="stitch patches back together via a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--combiner", choices=["vote", "last", "or", "and", "min", "max"], default="vote")

    p = add("metrics", cmd_metrics, help="segmentation metrics between masks or directories")
    p.add_argument("gt")
    p.add_argument("pred")
    p.add_argument("--foreground-only", action="store_true")
    p.add_argument("--concentration-class", type=int, default=None)

    p = add("subsample-quality", cmd_subsample_quality, help="degradation from block subsampling")
    p.add_argument("input")
    p.add_argument("--target", required=True)

    p = add("noise", cmd_noise, help="token corruption robustness report")
    p.add_argument("input")
    p.add_argument("--drop-runs", type=int, default=None)
    p.add_argument("--drop-tokens", type=int, default=None)
    p.add_argument("--perturb", type=int, default=None)
    p.add_argument("--radius", type=int, default=1)
    p.add_argument("--trials", type=int, default=1)

    p = add("viz", cmd_viz, help="colorized mask or run-overlay PNG")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--runs", action="store_true")

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 3
    except MaskIOError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, ValueError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
