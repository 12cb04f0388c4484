"""Binary segment store and the split manifest.

One file per split::

    magic "RTSFSEGS" | u32 version | u32 header length | JSON header
    | float32 LE values (n, window, channels) | int32 LE labels (n) | int32 LE subjects (n)

The header carries the dataset id, window, stride, channel manifest, split tag,
class names and segment count. Everything is written deterministically so that
identical inputs give byte-identical files.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..channels import ChannelLayout
from ..errors import InputError, UsageError
from .streams import SPLITS, Segments, SplitSpec

STORE_MAGIC = b"RTSFSEGS"
STORE_VERSION = 1
SPLIT_MANIFEST = "splits.json"


@dataclass
class SegmentStore:
    dataset: str
    split: str
    window: int
    stride: int
    layout: ChannelLayout
    class_names: tuple[str, ...]
    segments: Segments

    def __len__(self) -> int:
        return len(self.segments)

    def header(self) -> dict:
        return {
            "dataset": self.dataset,
            "split": self.split,
            "window": self.window,
            "stride": self.stride,
            "channels": self.layout.to_dicts(),
            "class_names": list(self.class_names),
            "count": len(self.segments),
        }

    def class_histogram(self) -> list[int]:
        return np.bincount(self.segments.labels, minlength=len(self.class_names)).tolist()


def store_path(directory, split: str) -> Path:
    return Path(directory) / f"{split}.seg"


def write_store(path, store: SegmentStore) -> None:
    seg = store.segments
    n = len(seg)
    if seg.values.shape != (n, store.window, len(store.layout)):
        raise UsageError(f"segments {seg.values.shape} do not match window {store.window} "
                         f"and {len(store.layout)} channels")
    head = json.dumps(store.header(), sort_keys=True).encode("utf-8")
    parts = [STORE_MAGIC, struct.pack("<II", STORE_VERSION, len(head)), head,
             np.ascontiguousarray(seg.values, dtype="<f4").tobytes(),
             np.ascontiguousarray(seg.labels, dtype="<i4").tobytes(),
             np.ascontiguousarray(seg.subjects if len(seg.subjects) == n else np.zeros(n), dtype="<i4").tobytes()]
    Path(path).write_bytes(b"".join(parts))


def read_store(path) -> SegmentStore:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"segment store not found: {p}")
    buf = p.read_bytes()
    if buf[: len(STORE_MAGIC)] != STORE_MAGIC:
        raise InputError(f"{p}: not a segment store")
    pos = len(STORE_MAGIC)
    try:
        version, hlen = struct.unpack_from("<II", buf, pos)
    except struct.error:
        raise InputError(f"{p}: truncated header") from None
    if version != STORE_VERSION:
        raise InputError(f"{p}: unsupported store version {version}")
    pos += 8
    try:
        head = json.loads(buf[pos : pos + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise InputError(f"{p}: corrupt header") from None
    pos += hlen
    n, w = int(head["count"]), int(head["window"])
    layout = ChannelLayout.from_dicts(head["channels"])
    c = len(layout)
    need = 4 * n * w * c + 8 * n
    if len(buf) - pos != need:
        raise InputError(f"{p}: expected {need} payload bytes, found {len(buf) - pos}")
    values = np.frombuffer(buf, dtype="<f4", count=n * w * c, offset=pos).reshape(n, w, c).astype(np.float32)
    pos += 4 * n * w * c
    labels = np.frombuffer(buf, dtype="<i4", count=n, offset=pos).astype(np.int64)
    pos += 4 * n
    subjects = np.frombuffer(buf, dtype="<i4", count=n, offset=pos).astype(np.int64)
    return SegmentStore(head["dataset"], head["split"], w, int(head["stride"]), layout,
                        tuple(head["class_names"]), Segments(values, labels, subjects, []))


def write_split_manifest(directory, dataset: str, split: SplitSpec | None, stores: dict[str, SegmentStore]) -> Path:
    data = {
        "dataset": dataset,
        "split_rule": split.to_dict() if split is not None else None,
        "splits": {
            k: {
                "file": store_path(directory, k).name,
                "segments": len(s),
                "class_histogram": s.class_histogram(),
                "subjects": sorted({int(v) for v in s.segments.subjects.tolist()}),
            }
            for k, s in stores.items()
        },
    }
    path = Path(directory) / SPLIT_MANIFEST
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_split(directory, split: str) -> SegmentStore:
    if split not in SPLITS:
        raise UsageError(f"split must be one of {', '.join(SPLITS)}, got {split!r}")
    d = Path(directory)
    if not d.is_dir():
        raise InputError(f"data directory not found: {d}")
    return read_store(store_path(d, split))
