"""Maximal-run extraction, length-bounded splitting, ordering, and the
inverse reconstruction from runs back to a label vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

import numpy as np

from .errors import OverlapError, RangeError, ValidationError


@dataclass(frozen=True)
class Run:
    """One contiguous stretch of a single label in a flattened mask.

    ``label`` 0 is reserved for background and only appears in coverage
    encodings that spell background out explicitly.
    """

    start: int
    length: int
    label: int = 1
    instance: Optional[int] = None

    def __post_init__(self):
        if self.start < 0:
            raise ValidationError("run start must be >= 0")
        if self.length < 1:
            raise ValidationError("run length must be >= 1")
        if self.label < 0:
            raise ValidationError("run label must be >= 0")


@dataclass(frozen=True)
class RunList:
    """Ordered runs over a vector of ``length`` pixels.

    ``max_len`` records the bound applied by split_runs, None if unsplit.
    """

    runs: Tuple[Run, ...]
    length: int
    max_len: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "runs", tuple(self.runs))
        for r in self.runs:
            if r.start + r.length > self.length:
                raise RangeError(f"run {r} exceeds vector length {self.length}")

    def __len__(self) -> int:
        return len(self.runs)

    def __iter__(self) -> Iterator[Run]:
        return iter(self.runs)

    def __getitem__(self, i):
        return self.runs[i]

    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(starts, lengths, labels) as int64 arrays."""
        if not self.runs:
            z = np.zeros(0, dtype=np.int64)
            return z, z.copy(), z.copy()
        return (
            np.array([r.start for r in self.runs], dtype=np.int64),
            np.array([r.length for r in self.runs], dtype=np.int64),
            np.array([r.label for r in self.runs], dtype=np.int64),
        )


def _segment_boundaries(vector: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Starts and one-past-ends of maximal constant segments."""
    changes = np.flatnonzero(vector[1:] != vector[:-1]) + 1
    starts = np.concatenate(([0], changes))
    ends = np.concatenate((changes, [vector.size]))
    return starts, ends


def extract_run_arrays(
    vector: np.ndarray, include_background: bool = False
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized maximal-run extraction returning (starts, lengths, labels).

    Adjacent pixels with different foreground labels always begin new runs.
    With ``include_background`` the runs tile the whole vector, background
    segments included.
    """
    vector = np.asarray(vector)
    if vector.ndim != 1:
        raise ValidationError("expected a 1D label vector")
    if vector.size == 0:
        z = np.zeros(0, dtype=np.int64)
        return z, z.copy(), z.copy()
    if vector.min() < 0:
        raise ValidationError("labels must be >= 0")
    starts, ends = _segment_boundaries(vector)
    labels = vector[starts].astype(np.int64)
    if not include_background:
        keep = labels != 0
        starts, ends, labels = starts[keep], ends[keep], labels[keep]
    return starts.astype(np.int64), (ends - starts).astype(np.int64), labels


def split_run_arrays(
    starts: np.ndarray, lengths: np.ndarray, labels: np.ndarray, max_len: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split every run longer than ``max_len`` into consecutive pieces."""
    if max_len < 1:
        raise ValidationError("max_len must be >= 1")
    if starts.size == 0 or int(lengths.max()) <= max_len:
        return starts, lengths, labels
    pieces = -(-lengths // max_len)  # ceil division
    total = int(pieces.sum())
    rep = np.repeat(np.arange(starts.size), pieces)
    offsets = np.arange(total) - np.repeat(np.cumsum(pieces) - pieces, pieces)
    out_starts = starts[rep] + offsets * max_len
    out_lengths = np.minimum(max_len, lengths[rep] - offsets * max_len)
    return out_starts, out_lengths, labels[rep]


def paint_runs(
    starts: np.ndarray,
    lengths: np.ndarray,
    labels: np.ndarray,
    length: int,
    mode: str = "strict",
) -> np.ndarray:
    """Write runs into a fresh zero vector of ``length`` pixels.

    Strict mode rejects overlapping runs and runs leaving the vector;
    lenient mode clips to bounds and lets later runs overwrite earlier ones.
    """
    _check_mode(mode)
    vec = np.zeros(length, dtype=np.int64)
    if starts.size == 0:
        return vec
    if mode == "strict":
        if int(starts.min()) < 0 or int((starts + lengths).max()) > length:
            raise RangeError("run exceeds vector bounds in strict mode")
        order = np.argsort(starts, kind="stable")
        s, e = starts[order], (starts + lengths)[order]
        if np.any(s[1:] < e[:-1]):
            raise OverlapError("runs overlap in strict mode")
        idx = np.repeat(starts, lengths) + _within_run_offsets(lengths)
        vec[idx] = np.repeat(labels, lengths)
        return vec
    # lenient: clip, later runs win
    c_starts = np.clip(starts, 0, length)
    c_ends = np.clip(starts + lengths, 0, length)
    keep = c_ends > c_starts
    c_starts, c_ends, c_labels = c_starts[keep], c_ends[keep], labels[keep]
    c_lengths = c_ends - c_starts
    if c_starts.size:
        idx = np.repeat(c_starts, c_lengths) + _within_run_offsets(c_lengths)
        vec[idx] = np.repeat(c_labels, c_lengths)
    return vec


def _within_run_offsets(lengths: np.ndarray) -> np.ndarray:
    return np.arange(int(lengths.sum())) - np.repeat(np.cumsum(lengths) - lengths, lengths)


def _check_mode(mode: str):
    if mode not in ("strict", "lenient"):
        raise ValidationError(f"mode must be 'strict' or 'lenient', got {mode!r}")


def _wrap(starts, lengths, labels, length, max_len=None, instances=None) -> RunList:
    runs = tuple(
        Run(int(s), int(l), int(c), None if instances is None else int(i))
        for s, l, c, i in zip(
            starts, lengths, labels, instances if instances is not None else starts
        )
    )
    return RunList(runs, length, max_len)


def extract_runs(vector: np.ndarray) -> RunList:
    """Maximal runs of constant nonzero label, in increasing start order."""
    vector = np.asarray(vector)
    starts, lengths, labels = extract_run_arrays(vector)
    return _wrap(starts, lengths, labels, vector.size)


def split_runs(runs: RunList, max_len: int) -> RunList:
    """Bound every run length by ``max_len``, preserving labels and pixels."""
    if max_len < 1:
        raise ValidationError("max_len must be >= 1")
    out: List[Run] = []
    for r in runs:
        start, remaining = r.start, r.length
        while remaining > max_len:
            out.append(Run(start, max_len, r.label, r.instance))
            start += max_len
            remaining -= max_len
        out.append(Run(start, remaining, r.label, r.instance))
    return RunList(tuple(out), runs.length, max_len)


def runs_to_vector(runs: RunList, length: int, mode: str = "strict") -> np.ndarray:
    """Rebuild the label vector covered by ``runs``; see paint_runs."""
    starts, lengths, labels = runs.arrays()
    return paint_runs(starts, lengths, labels, length, mode)


def shuffle_runs(runs: RunList, seed: int) -> RunList:
    """Deterministically permute run order; the canonical increasing-start
    invariant is deliberately given up on the output."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(runs))
    return RunList(tuple(runs[int(i)] for i in perm), runs.length, runs.max_len)
