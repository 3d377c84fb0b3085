"""File formats: mask images, raw grids, token files, patch manifests,
and the CSV / fixed-width table emitters used by the CLI.
"""

from __future__ import annotations

import csv
import io
import json
import os
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image

from .errors import MaskIOError, ValidationError
from .masks import FlattenOrder, InstanceMask, LabelMask, VideoMask
from .metrics import SegMetrics, SeqLengthStats
from .planner import FeasibilityReport, VocabBreakdown
from .schemes import (
    Scheme,
    SchemeConfig,
    StartMode,
    TokenSequence,
    VideoSchemeConfig,
)

TOKEN_MAGIC = "RLETOK"
TOKEN_VERSION = 1
GRID_MAGIC = "RAWGRID"
_GRID_DTYPES = {"u1": np.uint8, "u2": np.uint16, "u4": np.uint32}


# ---------------------------------------------------------------------------
# masks


def write_label_mask(path: str, mask: LabelMask) -> None:
    """Class mask as single-channel PNG (pixel value = class id) or, for a
    .grid path, the dependency-free raw format."""
    if path.endswith(".grid"):
        _write_grid(path, mask.labels)
        return
    if int(mask.labels.max()) > 255:
        raise MaskIOError(f"labels exceed 8-bit range; write {path} as .grid instead")
    Image.fromarray(mask.labels.astype(np.uint8), mode="L").save(path, format="PNG")


def read_label_mask(path: str, num_classes: int) -> LabelMask:
    arr = _read_any_grid(path)
    top = int(arr.max()) if arr.size else 0
    if top > num_classes:
        raise ValidationError(f"{path}: pixel value {top} exceeds class count {num_classes}")
    return LabelMask(arr.astype(np.int64), num_classes)


def _read_any_grid(path: str) -> np.ndarray:
    if not os.path.exists(path):
        raise MaskIOError(f"no such mask file: {path}")
    if path.endswith(".grid"):
        return _read_grid(path)
    try:
        img = Image.open(path)
    except Exception as exc:
        raise MaskIOError(f"cannot open {path}: {exc}") from exc
    if img.mode not in ("L", "I", "I;16", "P"):
        raise MaskIOError(f"{path}: unsupported image mode {img.mode}; need single-channel")
    if img.mode == "P":
        img = img.convert("L")
    return np.asarray(img).astype(np.int64)


def _write_grid(path: str, arr: np.ndarray) -> None:
    top = int(arr.max()) if arr.size else 0
    for code, dtype in _GRID_DTYPES.items():
        if top <= np.iinfo(dtype).max:
            break
    else:
        raise MaskIOError("labels exceed 32-bit range")
    with open(path, "wb") as fh:
        fh.write(f"{GRID_MAGIC} 1 {arr.shape[0]} {arr.shape[1]} {code}\n".encode("ascii"))
        fh.write(arr.astype("<" + code).tobytes())


def _read_grid(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").split()
        if len(header) != 5 or header[0] != GRID_MAGIC:
            raise MaskIOError(f"{path} is not a raw grid file")
        if header[1] != "1":
            raise MaskIOError(f"{path}: unsupported raw grid version {header[1]}")
        h, w, code = int(header[2]), int(header[3]), header[4]
        if code not in _GRID_DTYPES:
            raise MaskIOError(f"{path}: unknown raw grid dtype {code}")
        data = np.frombuffer(fh.read(), dtype="<" + code)
    if data.size != h * w:
        raise MaskIOError(f"{path}: payload holds {data.size} values, expected {h * w}")
    return data.reshape(h, w).astype(np.int64)


def write_instance_mask(path: str, mask: InstanceMask) -> None:
    """Instance ids as 16-bit PNG plus a JSON sidecar mapping id -> class."""
    if int(mask.ids.max()) > 65535:
        raise MaskIOError("instance ids exceed 16-bit range")
    Image.fromarray(mask.ids.astype(np.uint16)).save(path, format="PNG")
    sidecar = {
        "num_classes": mask.num_classes,
        "class_of": {str(k): v for k, v in sorted(mask.class_of.items())},
    }
    with open(_sidecar_path(path), "w") as fh:
        json.dump(sidecar, fh, indent=0, sort_keys=True)


def read_instance_mask(path: str) -> InstanceMask:
    side = _sidecar_path(path)
    if not os.path.exists(side):
        raise MaskIOError(f"missing instance sidecar {side}")
    arr = _read_any_grid(path)
    with open(side) as fh:
        meta = json.load(fh)
    class_of = {int(k): int(v) for k, v in meta["class_of"].items()}
    return InstanceMask(arr, class_of, int(meta["num_classes"]))


def _sidecar_path(path: str) -> str:
    stem, _ = os.path.splitext(path)
    return stem + ".classes.json"


def write_video_mask(directory: str, video: VideoMask, ext: str = ".png") -> None:
    os.makedirs(directory, exist_ok=True)
    for i, frame in enumerate(video.frames):
        write_label_mask(os.path.join(directory, f"frame_{i:04d}{ext}"), frame)


def read_video_mask(directory: str, num_classes: int) -> VideoMask:
    """Frames read in lexicographic filename order."""
    if not os.path.isdir(directory):
        raise MaskIOError(f"no such frame directory: {directory}")
    names = sorted(
        n for n in os.listdir(directory) if n.endswith((".png", ".grid"))
    )
    if not names:
        raise MaskIOError(f"{directory} holds no frame files")
    frames = tuple(read_label_mask(os.path.join(directory, n), num_classes) for n in names)
    return VideoMask(frames)


# ---------------------------------------------------------------------------
# token files


def _config_to_header(seq: TokenSequence) -> str:
    payload = dict(seq.config.to_dict())
    payload["kind"] = seq.kind
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def config_from_dict(meta: Dict) -> SchemeConfig:
    from .schemes import TIME_DIGIT_CONVENTION

    scheme = Scheme(meta["scheme"])
    digits = meta.get("time_digits", TIME_DIGIT_CONVENTION)
    if digits != TIME_DIGIT_CONVENTION:
        raise MaskIOError(f"unsupported composite digit convention {digits!r}")
    common = dict(
        scheme=scheme,
        height=int(meta["height"]),
        width=int(meta["width"]),
        num_classes=int(meta["classes"]),
        start_mode=StartMode(meta.get("start_mode", "1d")),
        flatten_order=FlattenOrder(meta.get("flatten", "row")),
        max_len=meta.get("max_len"),
        specials=int(meta.get("specials", 0)),
        run_order=meta.get("run_order", "canonical"),
        shuffle_seed=int(meta.get("shuffle_seed", 0)),
    )
    if scheme.is_video:
        return VideoSchemeConfig(frames=int(meta.get("frames", 1)), **common)
    return SchemeConfig(**common)


def write_token_file(path: str, seq: TokenSequence) -> None:
    """Header line with version and full configuration, then the ids."""
    with open(path, "w") as fh:
        fh.write(f"{TOKEN_MAGIC} {TOKEN_VERSION} {_config_to_header(seq)}\n")
        fh.write(" ".join(str(t) for t in seq.to_list()))
        fh.write("\n")


def read_token_file(path: str) -> TokenSequence:
    if not os.path.exists(path):
        raise MaskIOError(f"no such token file: {path}")
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        body = fh.read().split()
    parts = header.split(" ", 2)
    if len(parts) != 3 or parts[0] != TOKEN_MAGIC:
        raise MaskIOError(f"{path} is not a token file")
    if parts[1] != str(TOKEN_VERSION):
        raise MaskIOError(f"{path}: unsupported token file version {parts[1]}")
    try:
        meta = json.loads(parts[2])
    except json.JSONDecodeError as exc:
        raise MaskIOError(f"{path}: corrupt header: {exc}") from exc
    kind = meta.pop("kind", "static")
    cfg = config_from_dict(meta)
    if kind in ("cw", "iw"):
        from .structured_codecs import structured_layout

        layout = structured_layout(cfg)
    else:
        from .schemes import build_layout

        layout = build_layout(cfg)
    ids = np.array([int(t) for t in body], dtype=np.int64)
    return TokenSequence(ids, cfg, layout, kind)


# ---------------------------------------------------------------------------
# patch manifests


def write_patch_manifest(
    path: str,
    source_size: Tuple[int, int],
    patch: int,
    stride: int,
    num_classes: int,
    entries: Sequence[Dict],
    seed: Optional[int] = None,
) -> None:
    """Entries carry origin, transform list, and the patch file name, which
    is everything recompose needs to reproduce the source exactly."""
    doc = {
        "version": 1,
        "source_size": list(source_size),
        "patch": patch,
        "stride": stride,
        "num_classes": num_classes,
        "seed": seed,
        "patches": list(entries),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)


def read_patch_manifest(path: str) -> Dict:
    if not os.path.exists(path):
        raise MaskIOError(f"no such manifest: {path}")
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != 1:
        raise MaskIOError(f"{path}: unsupported manifest version {doc.get('version')}")
    return doc


# ---------------------------------------------------------------------------
# tables


def _render(header: List[str], rows: List[List], fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return buf.getvalue()
    str_rows = [[str(v) for v in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in str_rows)) if str_rows else len(h) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(header))]
    for r in str_rows:
        lines.append("  ".join(r[i].ljust(widths[i]) for i in range(len(header))))
    return "\n".join(lines) + "\n"


def _fmt_float(x: float) -> str:
    return f"{x:.6f}"


def vocab_table(b: VocabBreakdown, fmt: str = "text") -> str:
    rows = [[kind.value, size] for kind, size in b.segments]
    rows.append(["total", b.total])
    return _render(["segment", "tokens"], rows, fmt)


def feasibility_table(reports: Sequence[FeasibilityReport], fmt: str = "text") -> str:
    rows = []
    for r in reports:
        rows.append(
            [
                r.scheme.value,
                f"{r.size[0]}x{r.size[1]}",
                r.num_classes,
                r.v_limit,
                r.computed_n,
                r.v_at_computed if r.v_at_computed is not None else "",
                r.reference_n if r.reference_n is not None else "",
                "yes" if r.discrepancy else "no",
                r.note,
            ]
        )
    header = ["scheme", "size", "classes", "v_limit", "max_n", "v_at_max", "reference_n", "discrepancy", "note"]
    return _render(header, rows, fmt)


def metrics_table(m: SegMetrics, fmt: str = "text") -> str:
    rows = []
    for c in m.classes:
        rows.append(
            [
                c,
                _fmt_float(m.rec[c]) if c in m.rec else "undef",
                _fmt_float(m.prec[c]) if c in m.prec else "undef",
                _fmt_float(m.dice[c]) if c in m.dice else "undef",
            ]
        )
    rows.append(["mean", _fmt_float(m.mean_rec), _fmt_float(m.mean_prec), _fmt_float(m.mean_dice)])
    rows.append(["fw", _fmt_float(m.fw_rec), _fmt_float(m.fw_prec_mean), ""])
    rows.append(["fw_reciprocal", "", _fmt_float(m.fw_prec_reciprocal), ""])
    return _render(["class", "rec", "prec", "dice"], rows, fmt)


def stats_table(s: SeqLengthStats, fmt: str = "text") -> str:
    header = ["count", "mean_len", "max_len"] + [f"pct_gt_{t}" for t in sorted(s.pct_exceeding)]
    row = [s.count, _fmt_float(s.mean), s.max] + [
        _fmt_float(s.pct_exceeding[t]) for t in sorted(s.pct_exceeding)
    ]
    return _render(header, [row], fmt)


def robustness_table(rep, fmt: str = "text") -> str:
    header = ["trial", "dice", "changed_pixels"]
    rows = [
        [i, _fmt_float(d), ch]
        for i, (d, ch) in enumerate(zip(rep.dice_per_trial, rep.changed_per_trial))
    ]
    rows.append(["mean", _fmt_float(rep.dice_mean), _fmt_float(rep.changed_mean)])
    rows.append(["min/max", _fmt_float(rep.dice_min), rep.changed_max])
    return _render(header, rows, fmt)
