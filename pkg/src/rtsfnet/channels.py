"""Channel layouts: names, sensor types, body locations and the tags derived from them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ConfigError
from .rotation import TriadMap

SENSOR_TYPES = {"acc": 1, "gyro": 2, "mag": 3, "other": 4}
AXIS_TYPES = {"": 0, "x": 1, "y": 2, "z": 3, "norm": 4}
ROTATABLE = ("acc", "gyro", "mag")


@dataclass(frozen=True)
class ChannelSpec:
    name: str
    sensor_type: str = "other"
    location: int = 0
    axis: str = ""

    def __post_init__(self) -> None:
        if self.sensor_type not in SENSOR_TYPES:
            raise ConfigError(f"channel {self.name!r}: unknown sensor_type {self.sensor_type!r}")
        if self.axis not in AXIS_TYPES:
            raise ConfigError(f"channel {self.name!r}: unknown axis {self.axis!r}")

    def tag(self) -> tuple[int, int, int]:
        return (int(self.location), SENSOR_TYPES[self.sensor_type], AXIS_TYPES[self.axis])

    def to_dict(self) -> dict:
        return {"name": self.name, "sensor_type": self.sensor_type, "location": self.location, "axis": self.axis}


@dataclass(frozen=True)
class ChannelLayout:
    channels: tuple[ChannelSpec, ...]

    def __len__(self) -> int:
        return len(self.channels)

    @classmethod
    def from_dicts(cls, items: Iterable[dict]) -> "ChannelLayout":
        try:
            return cls(tuple(ChannelSpec(**d) for d in items))
        except TypeError as exc:
            raise ConfigError(f"bad channel entry: {exc}") from None

    def to_dicts(self) -> list[dict]:
        return [c.to_dict() for c in self.channels]

    def triad_map(self) -> TriadMap:
        """Consecutive x, y, z channels of one rotatable sensor at one location form a triad."""
        triads = []
        others = []
        i = 0
        chans = self.channels
        while i < len(chans):
            c = chans[i]
            if c.sensor_type in ROTATABLE and c.axis == "x" and i + 2 < len(chans):
                y, z = chans[i + 1], chans[i + 2]
                same = all(
                    d.sensor_type == c.sensor_type and d.location == c.location for d in (y, z)
                )
                if same and y.axis == "y" and z.axis == "z":
                    triads.append((i, i + 1, i + 2))
                    i += 3
                    continue
            others.append(i)
            i += 1
        return TriadMap(tuple(triads), tuple(others))

    def tags(self) -> np.ndarray:
        return np.array([c.tag() for c in self.channels], dtype=np.int64).reshape(-1, 3)

    def triad_tags(self) -> list[tuple[int, int]]:
        """(location, sensor type id) of every triad, in triad order."""
        tm = self.triad_map()
        return [self.channels[t[0]].tag()[:2] for t in tm.triads]


def simple_layout(n_triads: int, n_other: int = 0) -> ChannelLayout:
    """acc/gyro triads alternating at increasing locations, then generic channels."""
    chans = []
    for t in range(n_triads):
        kind = ("acc", "gyro")[t % 2]
        loc = t // 2 + 1
        for ax in "xyz":
            chans.append(ChannelSpec(f"{kind}{loc}_{ax}", kind, loc, ax))
    for k in range(n_other):
        chans.append(ChannelSpec(f"other{k}", "other", 0, ""))
    return ChannelLayout(tuple(chans))


@dataclass
class Segment:
    """A fixed-length (time, channels) window with one activity label."""

    values: np.ndarray
    label: int
    layout: ChannelLayout | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values)
        if self.values.ndim != 2:
            raise ConfigError(f"segment values must be (time, channels), got {self.values.shape}")
        if self.layout is not None and len(self.layout) != self.values.shape[1]:
            raise ConfigError(
                f"layout lists {len(self.layout)} channels, segment has {self.values.shape[1]}"
            )
