"""Ingestion, normalization, segmentation, and windowing of dyad recordings.

A dyad pairs one speaker feature stream with one listener feature stream and
per-frame competence/warmth labels. Frames are grouped into fixed-length
segments; each segment doubles as one training window whose regression target
is the mean label over its frames.
"""

import csv
import json
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    ConfigError,
    EmptyInputError,
    InputShapeError,
    InsufficientDataError,
    IoError,
    ParseError,
)

STD_FLOOR = 1e-8

SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class LabelSequence:
    """Per-frame competence and warmth annotations (no value range limit)."""

    competence: np.ndarray
    warmth: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.competence, dtype=np.float64)
        w = np.asarray(self.warmth, dtype=np.float64)
        if c.ndim != 1 or w.ndim != 1 or c.shape != w.shape:
            raise InputShapeError("competence and warmth must be equal-length 1-D vectors")
        object.__setattr__(self, "competence", c)
        object.__setattr__(self, "warmth", w)

    def __len__(self) -> int:
        return self.competence.shape[0]


@dataclass(frozen=True)
class DyadRecord:
    """One speaker/listener pair with aligned features and labels."""

    speaker: np.ndarray
    listener: np.ndarray
    listener_id: int
    labels: LabelSequence

    def __post_init__(self):
        s = as_feature_matrix(self.speaker, "speaker")
        l = as_feature_matrix(self.listener, "listener")
        if s.shape[0] != l.shape[0] or s.shape[0] != len(self.labels):
            raise InputShapeError(
                f"frame counts differ: speaker={s.shape[0]} listener={l.shape[0]} "
                f"labels={len(self.labels)}"
            )
        object.__setattr__(self, "speaker", s)
        object.__setattr__(self, "listener", l)

    @property
    def frames(self) -> int:
        return self.speaker.shape[0]


@dataclass(frozen=True)
class SegmentPlan:
    """Half-open frame ranges partitioning [0, T)."""

    segment_length: int
    boundaries: tuple

    @property
    def n(self) -> int:
        return len(self.boundaries)

    @property
    def total_frames(self) -> int:
        return self.boundaries[-1][1] if self.boundaries else 0


@dataclass(frozen=True)
class Window:
    """One training example: a frame range of a dyad plus its mean-label target."""

    dyad_index: int
    start: int
    end: int
    target_competence: float
    target_warmth: float


@dataclass(frozen=True)
class WindowSet:
    """All windows of a dataset plus their train/val/test assignment."""

    windows: tuple
    splits: dict

    def indices(self, split: str) -> tuple:
        if split not in self.splits:
            raise ConfigError(f"unknown split '{split}' (expected one of {SPLIT_NAMES})")
        return self.splits[split]


@dataclass
class DyadDataset:
    """Dyad records, listener vocabulary size, and (optionally) the window split."""

    dyads: list
    n_listeners: int
    windows: Optional[WindowSet] = None

    @property
    def speaker_dim(self) -> int:
        return self.dyads[0].speaker.shape[1]

    @property
    def listener_dim(self) -> int:
        return self.dyads[0].listener.shape[1]


@dataclass(frozen=True)
class NormStats:
    """Per-column mean and floored standard deviation."""

    mean: np.ndarray
    std: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def as_feature_matrix(data, name: str = "features") -> np.ndarray:
    """Validate and return a T x D float64 matrix (finite, nonempty)."""
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2:
        raise InputShapeError(f"{name}: expected a 2-D matrix, got ndim={x.ndim}")
    if x.shape[0] < 1 or x.shape[1] < 1:
        raise EmptyInputError(f"{name}: empty matrix of shape {x.shape}")
    if not np.isfinite(x).all():
        raise ParseError(f"{name}: matrix contains NaN or Inf entries")
    return x


def load_feature_csv(path: str, expected_dim: int) -> np.ndarray:
    """Load a feature CSV (one header row, one frame per row) as a T x D matrix.

    Raises:
        InputShapeError: a row does not have exactly ``expected_dim`` fields.
        ParseError: a cell is not numeric, or parses to NaN/Inf.
        EmptyInputError: the file has no data rows.
        IoError: the file cannot be read.
    """
    if expected_dim < 1:
        raise ConfigError(f"expected_dim must be >= 1, got {expected_dim}")
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise EmptyInputError(f"{path}: file is empty")
            rows = []
            for i, row in enumerate(reader):
                if len(row) != expected_dim:
                    raise InputShapeError(
                        f"{path}: row {i + 1} has {len(row)} fields, expected {expected_dim}"
                    )
                rows.append(row)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise EmptyInputError(f"{path}: no data rows")
    try:
        data = np.asarray(rows, dtype=np.float64)
    except ValueError:
        # locate the offending cell for the error message
        for i, row in enumerate(rows):
            for j, cell in enumerate(row):
                try:
                    float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}: non-numeric value {cell!r} at row {i + 1}, column {j + 1}"
                    ) from None
        raise ParseError(f"{path}: non-numeric value") from None
    if not np.isfinite(data).all():
        bad = np.argwhere(~np.isfinite(data))[0]
        raise ParseError(f"{path}: non-finite value at row {bad[0] + 1}, column {bad[1] + 1}")
    return data


def load_label_csv(path: str) -> LabelSequence:
    """Load a label CSV with header ``competence,warmth`` into a LabelSequence."""
    data = load_feature_csv(path, expected_dim=2)
    try:
        with open(path, newline="") as fh:
            header = next(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    names = [h.strip().lower() for h in header]
    if names != ["competence", "warmth"]:
        raise ParseError(f"{path}: label header must be 'competence,warmth', got {header}")
    return LabelSequence(competence=data[:, 0], warmth=data[:, 1])


def load_dataset(manifest_path: str) -> DyadDataset:
    """Load a dataset from a JSON manifest listing per-dyad CSV files."""
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{manifest_path}: invalid JSON: {exc}") from exc
    for key in ("n_listeners", "speaker_dim", "listener_dim", "dyads"):
        if key not in manifest:
            raise ParseError(f"{manifest_path}: manifest missing key '{key}'")
    base = os.path.dirname(os.path.abspath(manifest_path))
    dyads = []
    for entry in manifest["dyads"]:
        speaker = load_feature_csv(os.path.join(base, entry["speaker_csv"]), manifest["speaker_dim"])
        listener = load_feature_csv(os.path.join(base, entry["listener_csv"]), manifest["listener_dim"])
        labels = load_label_csv(os.path.join(base, entry["labels_csv"]))
        lid = int(entry["listener_id"])
        if not 0 <= lid < manifest["n_listeners"]:
            raise ParseError(
                f"{manifest_path}: listener_id {lid} outside [0, {manifest['n_listeners']})"
            )
        dyads.append(DyadRecord(speaker=speaker, listener=listener, listener_id=lid, labels=labels))
    if not dyads:
        raise EmptyInputError(f"{manifest_path}: manifest lists no dyads")
    return DyadDataset(dyads=dyads, n_listeners=int(manifest["n_listeners"]))


def zscore_fit(x: np.ndarray, rows: Optional[Sequence[int]] = None) -> NormStats:
    """Fit per-column mean/std over the given rows (all rows when ``rows`` is None).

    Uses the population standard deviation, floored at 1e-8 so constant
    columns stay finite under division.
    """
    x = as_feature_matrix(x, "zscore input")
    if rows is None:
        sub = x
    else:
        idx = np.asarray(list(rows), dtype=np.int64)
        if idx.size == 0:
            raise EmptyInputError("zscore_fit: empty row set")
        sub = x[idx]
    mean = sub.mean(axis=0)
    std = np.maximum(sub.std(axis=0), STD_FLOOR)
    return NormStats(mean=mean, std=std)


def zscore_apply(stats: NormStats, x: np.ndarray) -> np.ndarray:
    """Apply fitted normalization column-wise: (x - mean) / std."""
    x = as_feature_matrix(x, "zscore input")
    if x.shape[1] != stats.dim:
        raise InputShapeError(f"stats have dim {stats.dim}, matrix has dim {x.shape[1]}")
    return (x - stats.mean) / stats.std


def make_segment_plan(frames: int, segment_length: int) -> SegmentPlan:
    """Partition [0, frames) into ceil(frames/segment_length) ordered segments.

    Every segment is full length except possibly a shorter final remainder.
    """
    if frames == 0:
        raise EmptyInputError("cannot segment an empty sequence")
    if frames < 0:
        raise InputShapeError(f"negative frame count {frames}")
    if segment_length < 2:
        raise ConfigError(f"segment_length must be >= 2, got {segment_length}")
    starts = range(0, frames, segment_length)
    boundaries = tuple((s, min(s + segment_length, frames)) for s in starts)
    return SegmentPlan(segment_length=segment_length, boundaries=boundaries)


def _split_counts(n: int, ratios: Sequence[float]) -> list:
    """Floor counts, hand remainders to earlier splits, force >=1 per nonzero ratio."""
    counts = [int(np.floor(n * r)) for r in ratios]
    remainder = n - sum(counts)
    for i in range(len(counts)):
        if remainder == 0:
            break
        if ratios[i] > 0:
            take = remainder if i == 0 else 1
            counts[i] += take
            remainder -= take
    for i, r in enumerate(ratios):
        if r > 0 and counts[i] == 0:
            donor = int(np.argmax(counts))
            counts[donor] -= 1
            counts[i] += 1
    return counts


def build_windows(
    dyads: Sequence[DyadRecord],
    segment_length: int,
    ratios: Sequence[float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> WindowSet:
    """Cut every dyad into segment-aligned windows and split them reproducibly.

    Window targets are the mean competence/warmth over the window's frames.
    The split is a seeded random permutation partitioned by ``ratios``
    (train, val, test); each nonzero-ratio split receives at least one window.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3:
        raise ConfigError(f"expected 3 split ratios, got {len(ratios)}")
    if any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must be nonnegative and sum to 1, got {ratios}")
    windows = []
    for d_idx, dyad in enumerate(dyads):
        plan = make_segment_plan(dyad.frames, segment_length)
        for start, end in plan.boundaries:
            windows.append(
                Window(
                    dyad_index=d_idx,
                    start=start,
                    end=end,
                    target_competence=float(dyad.labels.competence[start:end].mean()),
                    target_warmth=float(dyad.labels.warmth[start:end].mean()),
                )
            )
    n = len(windows)
    needed = sum(1 for r in ratios if r > 0)
    if n < needed:
        raise InsufficientDataError(f"{n} windows cannot fill {needed} nonzero splits")
    counts = _split_counts(n, ratios)
    perm = np.random.default_rng(seed).permutation(n)
    splits = {}
    offset = 0
    for name, count in zip(SPLIT_NAMES, counts):
        splits[name] = tuple(sorted(int(i) for i in perm[offset : offset + count]))
        offset += count
    return WindowSet(windows=tuple(windows), splits=splits)


def fit_split_stats(dyads: Sequence[DyadRecord], window_set: WindowSet, split: str = "train"):
    """Fit speaker/listener NormStats over the frames of one split's windows."""
    idx = window_set.indices(split)
    if not idx:
        raise InsufficientDataError(f"split '{split}' has no windows")
    speaker_rows = []
    listener_rows = []
    for i in idx:
        w = window_set.windows[i]
        speaker_rows.append(dyads[w.dyad_index].speaker[w.start : w.end])
        listener_rows.append(dyads[w.dyad_index].listener[w.start : w.end])
    return (
        zscore_fit(np.concatenate(speaker_rows, axis=0)),
        zscore_fit(np.concatenate(listener_rows, axis=0)),
    )
