"""Readers for the benchmark datasets in their published text layouts.

Column positions are 0-based below. Every reader returns LabeledStreams with
labels already mapped to class indices (NULL_LABEL for unlabeled samples);
UCI HAR ships pre-segmented and is returned as Segments directly.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from ..channels import ChannelLayout, ChannelSpec
from ..errors import ConfigError, InputError
from .streams import NULL_LABEL, LabeledStream, Segments, SplitSpec


def _triad(prefix: str, kind: str, location: int) -> list[ChannelSpec]:
    return [ChannelSpec(f"{prefix}_{kind}_{ax}", kind, location, ax) for ax in "xyz"]


@dataclass(frozen=True)
class DatasetInfo:
    name: str
    layout: ChannelLayout
    class_names: tuple[str, ...]
    sample_rate_hz: float
    window: int
    stride: int
    split: SplitSpec


# --------------------------------------------------------------------------
# UCI HAR

UCI_CLASSES = ("walking", "walking_upstairs", "walking_downstairs", "sitting", "standing", "laying")
UCI_LAYOUT = ChannelLayout(tuple(_triad("body", "acc", 1) + _triad("body", "gyro", 1)))
UCI_SPLIT = SplitSpec("subject", frozenset({7, 22}), frozenset({2, 4, 9, 10, 12, 13, 18, 20, 24}))
UCI_SIGNALS = [f"body_acc_{a}" for a in "xyz"] + [f"body_gyro_{a}" for a in "xyz"]


def _read_matrix(path: Path, width: int | None = None) -> np.ndarray:
    """Whitespace-separated numbers ("NaN" allowed); InputError names the first bad line."""
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)  # empty file
            arr = np.loadtxt(path, dtype=np.float64, ndmin=2)
        if arr.size == 0:
            return np.zeros((0, width or 0))
        if width is None or arr.shape[1] == width:
            return arr
    except ValueError:
        pass
    return _read_matrix_slow(path, width)


def _read_matrix_slow(path: Path, width: int | None) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = [float(v) for v in line.split()]
            except ValueError:
                raise InputError(f"{path}:{lineno}: non-numeric value") from None
            if width is not None and len(row) != width:
                raise InputError(f"{path}:{lineno}: expected {width} values, got {len(row)}")
            rows.append(row)
    return np.asarray(rows, dtype=np.float64)


def load_ucihar(root) -> dict[str, Segments]:
    """Pre-segmented 128-sample windows; validation subjects are carved out of the train part."""
    root = Path(root)
    needed = []
    for part in ("train", "test"):
        base = root / part
        needed += [base / "Inertial Signals" / f"{s}_{part}.txt" for s in UCI_SIGNALS]
        needed += [base / f"y_{part}.txt", base / f"subject_{part}.txt"]
    missing = [str(p) for p in needed if not p.is_file()]
    if missing:
        raise InputError("missing UCI HAR files: " + ", ".join(missing))

    out: dict[str, list[Segments]] = {"train": [], "validation": [], "test": []}
    for part in ("train", "test"):
        base = root / part
        chans = [_read_matrix(base / "Inertial Signals" / f"{s}_{part}.txt", 128) for s in UCI_SIGNALS]
        values = np.stack(chans, axis=-1).astype(np.float32)
        labels = _read_matrix(base / f"y_{part}.txt", 1)[:, 0].astype(np.int64) - 1
        subjects = _read_matrix(base / f"subject_{part}.txt", 1)[:, 0].astype(np.int64)
        if not (len(values) == len(labels) == len(subjects)):
            raise InputError(f"{base}: signal, label and subject files disagree in length")
        if labels.min() < 0 or labels.max() >= len(UCI_CLASSES):
            raise InputError(f"{base}: activity ids outside 1..{len(UCI_CLASSES)}")
        for split in out:
            if part == "test" and split != "test":
                continue
            if split == "test":
                keep = np.isin(subjects, sorted(UCI_SPLIT.test))
            elif split == "validation":
                keep = np.isin(subjects, sorted(UCI_SPLIT.validation))
            else:
                keep = ~np.isin(subjects, sorted(UCI_SPLIT.validation | UCI_SPLIT.test))
            out[split].append(Segments(values[keep], labels[keep], subjects[keep], [part] * int(keep.sum())))
    return {k: Segments.concat(v, 128, 6) for k, v in out.items()}


# --------------------------------------------------------------------------
# PAMAP2

PAMAP2_ACTIVITIES = {1: "lying", 2: "sitting", 3: "standing", 4: "walking", 5: "running", 6: "cycling",
                     7: "nordic_walking", 12: "ascending_stairs", 13: "descending_stairs",
                     16: "vacuum_cleaning", 17: "ironing"}
PAMAP2_CLASSES = tuple(PAMAP2_ACTIVITIES.values())
PAMAP2_IMUS = (("hand", 3, 1), ("chest", 20, 2), ("ankle", 37, 3))  # name, first column, location
PAMAP2_WIDTH = 54


def _pamap2_columns() -> list[int]:
    cols = []
    for _, start, _ in PAMAP2_IMUS:
        cols += [start + 1, start + 2, start + 3]  # acc, +-16 g
        cols += [start + 7, start + 8, start + 9]  # gyro
        cols += [start + 10, start + 11, start + 12]  # mag
    return cols


PAMAP2_LAYOUT = ChannelLayout(tuple(
    c for name, _, loc in PAMAP2_IMUS
    for c in _triad(name, "acc", loc) + _triad(name, "gyro", loc) + _triad(name, "mag", loc)
))
PAMAP2_SPLIT = SplitSpec("subject", frozenset({5}), frozenset({6}))


def read_pamap2(path) -> LabeledStream:
    path = Path(path)
    m = re.search(r"subject10(\d)", path.name)
    if not m:
        raise InputError(f"{path}: expected a subject10X.dat file name")
    raw = _read_matrix(path, PAMAP2_WIDTH)
    code = {a: i for i, a in enumerate(PAMAP2_ACTIVITIES)}
    labels = np.array([code.get(int(a), NULL_LABEL) for a in raw[:, 1]], dtype=np.int64)
    return LabeledStream(raw[:, _pamap2_columns()], labels, path.stem, int(m.group(1)), 100.0, PAMAP2_LAYOUT)


# --------------------------------------------------------------------------
# Daphnet freezing of gait

DAPHNET_CLASSES = ("no_freeze", "freeze")
DAPHNET_LAYOUT = ChannelLayout(tuple(
    _triad("shank", "acc", 1) + _triad("thigh", "acc", 2) + _triad("trunk", "acc", 3)
))
DAPHNET_SPLIT = SplitSpec("trial", frozenset({"S02R02", "S03R03", "S05R01"}),
                          frozenset({"S02R01", "S04R01", "S05R02"}))


def read_daphnet(path) -> LabeledStream:
    path = Path(path)
    m = re.fullmatch(r"S(\d\d)R(\d\d)", path.stem)
    if not m:
        raise InputError(f"{path}: expected an SxxRyy.txt file name")
    raw = _read_matrix(path, 11)
    ann = raw[:, 10].astype(np.int64)
    if ((ann < 0) | (ann > 2)).any():
        bad = int(np.flatnonzero((ann < 0) | (ann > 2))[0]) + 1
        raise InputError(f"{path}:{bad}: annotation must be 0, 1 or 2")
    labels = np.where(ann == 0, NULL_LABEL, ann - 1)
    return LabeledStream(raw[:, 1:10], labels, path.stem, int(m.group(1)), 64.0, DAPHNET_LAYOUT)


# --------------------------------------------------------------------------
# OPPORTUNITY (locomotion-free gesture track, NULL excluded)

OPP_GESTURES = {
    406516: "open_door_1", 406517: "open_door_2", 404516: "close_door_1", 404517: "close_door_2",
    406520: "open_fridge", 404520: "close_fridge", 406505: "open_dishwasher", 404505: "close_dishwasher",
    406519: "open_drawer_1", 404519: "close_drawer_1", 406511: "open_drawer_2", 404511: "close_drawer_2",
    406508: "open_drawer_3", 404508: "close_drawer_3", 408512: "clean_table", 407521: "drink_from_cup",
    405506: "toggle_switch",
}
OPP_CLASSES = tuple(OPP_GESTURES.values())
OPP_LABEL_COLUMN = 249
OPP_WIDTH = 250
# five motion-jacket IMUs (acc, gyro, mag) and the two inertial shoes (body-frame acc, angular velocity)
OPP_JACKET = (("back", 37, 1), ("rua", 50, 2), ("rla", 63, 3), ("lua", 76, 4), ("lla", 89, 5))
OPP_SHOES = (("lshoe", 108, 6), ("rshoe", 124, 7))


def _opp_columns() -> list[int]:
    cols = []
    for _, start, _ in OPP_JACKET:
        cols += list(range(start, start + 9))
    for _, start, _ in OPP_SHOES:
        cols += list(range(start, start + 6))
    return cols


OPP_LAYOUT = ChannelLayout(tuple(
    [c for name, _, loc in OPP_JACKET
     for c in _triad(name, "acc", loc) + _triad(name, "gyro", loc) + _triad(name, "mag", loc)]
    + [c for name, _, loc in OPP_SHOES for c in _triad(name, "acc", loc) + _triad(name, "gyro", loc)]
))
OPP_SPLIT = SplitSpec(
    "trial",
    frozenset({"S1-ADL1", "S3-ADL3", "S3-Drill", "S4-ADL4"}),
    frozenset({"S2-ADL2", "S2-Drill", "S3-ADL1", "S4-ADL5"}),
)


def read_opportunity(path) -> LabeledStream:
    path = Path(path)
    m = re.fullmatch(r"S(\d)-(ADL\d|Drill)", path.stem)
    if not m:
        raise InputError(f"{path}: expected an S<n>-ADL<k>.dat or S<n>-Drill.dat file name")
    raw = _read_matrix(path, OPP_WIDTH)
    labels = np.array([
        list(OPP_GESTURES).index(int(v)) if int(v) in OPP_GESTURES else NULL_LABEL
        for v in raw[:, OPP_LABEL_COLUMN]
    ], dtype=np.int64)
    return LabeledStream(raw[:, _opp_columns()], labels, path.stem, int(m.group(1)), 30.0, OPP_LAYOUT)


# --------------------------------------------------------------------------
# registry

DATASETS = {
    "ucihar": DatasetInfo("ucihar", UCI_LAYOUT, UCI_CLASSES, 50.0, 128, 64, UCI_SPLIT),
    "pamap2": DatasetInfo("pamap2", PAMAP2_LAYOUT, PAMAP2_CLASSES, 100.0, 256, 128, PAMAP2_SPLIT),
    "daphnet": DatasetInfo("daphnet", DAPHNET_LAYOUT, DAPHNET_CLASSES, 64.0, 192, 96, DAPHNET_SPLIT),
    "opportunity": DatasetInfo("opportunity", OPP_LAYOUT, OPP_CLASSES, 30.0, 32, 16, OPP_SPLIT),
}
RAW_READERS = {"pamap2": (read_pamap2, "**/subject10?.dat"),
               "daphnet": (read_daphnet, "**/S??R??.txt"),
               "opportunity": (read_opportunity, "**/S?-*.dat")}


def dataset_info(name: str) -> DatasetInfo:
    if name not in DATASETS:
        raise ConfigError(f"unknown dataset {name!r}; supported: {', '.join(sorted(DATASETS))}, synthetic")
    return DATASETS[name]


def layout_for(name: str) -> ChannelLayout:
    if name == "synthetic":
        from ..synthetic import SYNTHETIC_LAYOUT

        return SYNTHETIC_LAYOUT
    return dataset_info(name).layout


def ingest_raw(kind: str, files: Iterable) -> list[LabeledStream]:
    """Parse raw files of a streaming dataset into LabeledStreams (sorted by trial name)."""
    if kind not in RAW_READERS:
        raise ConfigError(f"raw ingestion supports {', '.join(sorted(RAW_READERS))}, got {kind!r}")
    reader, _ = RAW_READERS[kind]
    streams = [reader(f) for f in sorted(Path(f) for f in files)]
    if not streams:
        raise InputError(f"no {kind} files given")
    return streams


def find_raw_files(kind: str, root) -> list[Path]:
    root = Path(root)
    if not root.is_dir():
        raise InputError(f"dataset root does not exist: {root}")
    _, pattern = RAW_READERS[kind]
    files = sorted(root.glob(pattern))
    if kind == "pamap2" and any(f.parent.name == "Protocol" for f in files):
        files = [f for f in files if f.parent.name == "Protocol"]
    if not files:
        raise InputError(f"no {kind} files matching {pattern} under {root}")
    return files
