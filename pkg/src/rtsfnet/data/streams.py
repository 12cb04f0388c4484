"""Continuous labeled recordings, NaN gap filling and boundary-respecting segmentation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..channels import ChannelLayout
from ..errors import ConfigError

NULL_LABEL = -1


@dataclass
class LabeledStream:
    """One trial: (samples, channels) values with per-sample labels (NULL_LABEL for unlabeled)."""

    values: np.ndarray
    labels: np.ndarray
    trial: str
    subject: int
    sample_rate_hz: float
    layout: ChannelLayout | None = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.values.ndim != 2:
            raise ConfigError(f"stream values must be (samples, channels), got {self.values.shape}")
        if self.labels.shape != (self.values.shape[0],):
            raise ConfigError(
                f"{self.trial}: {self.labels.shape[0]} labels for {self.values.shape[0]} samples"
            )
        if self.sample_rate_hz <= 0:
            raise ConfigError(f"{self.trial}: sample rate must be positive")
        if self.layout is not None and len(self.layout) != self.values.shape[1]:
            raise ConfigError(f"{self.trial}: layout has {len(self.layout)} channels, data {self.values.shape[1]}")

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass
class Segments:
    """A stack of equal-length windows with labels and provenance."""

    values: np.ndarray  # (n, window, channels) float32
    labels: np.ndarray  # (n,) int
    subjects: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    trials: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @classmethod
    def empty(cls, window: int, n_channels: int) -> "Segments":
        return cls(np.zeros((0, window, n_channels), np.float32), np.zeros(0, np.int64),
                   np.zeros(0, np.int64), [])

    @classmethod
    def concat(cls, parts: list["Segments"], window: int, n_channels: int) -> "Segments":
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty(window, n_channels)
        return cls(
            np.concatenate([p.values for p in parts]),
            np.concatenate([p.labels for p in parts]),
            np.concatenate([p.subjects for p in parts]),
            [t for p in parts for t in p.trials],
        )


def _nan_runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """[start, end) of each run of True."""
    if not mask.any():
        return []
    padded = np.concatenate([[False], mask, [False]])
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return list(zip(edges[::2].tolist(), edges[1::2].tolist()))


def interpolate_nan(stream: LabeledStream, max_gap_seconds: float = 0.2) -> LabeledStream:
    """Linearly fill interior NaN runs of at most round(max_gap_seconds * rate) samples."""
    limit = int(round(max_gap_seconds * stream.sample_rate_hz))
    out = stream.values.copy()
    n = out.shape[0]
    for c in range(out.shape[1]):
        col = out[:, c]
        for start, end in _nan_runs(np.isnan(col)):
            if start == 0 or end == n or end - start > limit:
                continue
            left, right = col[start - 1], col[end]
            steps = np.arange(1, end - start + 1) / (end - start + 1)
            col[start:end] = left + (right - left) * steps
    return LabeledStream(out, stream.labels, stream.trial, stream.subject, stream.sample_rate_hz, stream.layout)


def clean_runs(stream: LabeledStream) -> list[tuple[int, int, int]]:
    """Maximal (start, end, label) runs with one non-NULL label and no NaN in any channel."""
    ok = (stream.labels != NULL_LABEL) & ~np.isnan(stream.values).any(axis=1)
    runs = []
    n = len(stream)
    i = 0
    while i < n:
        if not ok[i]:
            i += 1
            continue
        j = i
        lab = stream.labels[i]
        while j < n and ok[j] and stream.labels[j] == lab:
            j += 1
        runs.append((i, j, int(lab)))
        i = j
    return runs


def segment_count(run_length: int, window: int, stride: int) -> int:
    return (run_length - window) // stride + 1 if run_length >= window else 0


def segment(stream: LabeledStream, window: int, stride: int) -> Segments:
    """Sliding windows that never leave a clean run (one trial, one label, no NaN)."""
    if window <= 0 or stride <= 0:
        raise ConfigError(f"window and stride must be positive, got {window} and {stride}")
    vals, labs = [], []
    for start, end, lab in clean_runs(stream):
        for k in range(segment_count(end - start, window, stride)):
            s = start + k * stride
            vals.append(stream.values[s : s + window])
            labs.append(lab)
    n_ch = stream.values.shape[1]
    if not vals:
        return Segments.empty(window, n_ch)
    return Segments(
        np.stack(vals).astype(np.float32),
        np.asarray(labs, dtype=np.int64),
        np.full(len(labs), stream.subject, dtype=np.int64),
        [stream.trial] * len(labs),
    )


@dataclass(frozen=True)
class SplitSpec:
    """Train/validation/test membership by subject id or by trial name.

    Anything not listed under validation or test belongs to train.
    """

    by: str  # "subject" or "trial"
    validation: frozenset
    test: frozenset

    def __post_init__(self) -> None:
        if self.by not in ("subject", "trial"):
            raise ConfigError(f"split must be subject- or trial-based, got {self.by!r}")
        if self.validation & self.test:
            raise ConfigError(f"validation and test overlap: {sorted(self.validation & self.test)}")

    def assign(self, stream: LabeledStream) -> str:
        key = stream.subject if self.by == "subject" else stream.trial
        if key in self.test:
            return "test"
        if key in self.validation:
            return "validation"
        return "train"

    def to_dict(self) -> dict:
        return {"by": self.by, "validation": sorted(self.validation), "test": sorted(self.test)}


SPLITS = ("train", "validation", "test")


def split_streams(streams: list[LabeledStream], spec: SplitSpec, window: int, stride: int,
                  max_gap_seconds: float = 0.2) -> dict[str, Segments]:
    """Interpolate, segment and route every stream to its split."""
    if not streams:
        raise ConfigError("no streams to segment")
    n_ch = streams[0].values.shape[1]
    parts: dict[str, list[Segments]] = {k: [] for k in SPLITS}
    for st in streams:
        parts[spec.assign(st)].append(segment(interpolate_nan(st, max_gap_seconds), window, stride))
    return {k: Segments.concat(v, window, n_ch) for k, v in parts.items()}
