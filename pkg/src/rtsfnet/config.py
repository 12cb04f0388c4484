"""Model configuration: the 29 numeric hyperparameters, block sets and layout.

Configuration files are YAML. Hyperparameter tables may be given as 14-element
lists or in grouped form, e.g. ``{"1,3,5,8,10,12": 128, "2,9": 128, ...}``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .channels import ChannelLayout
from .errors import ConfigError
from .tsf import SELECTED_FEATURES, BlockSpec, FeatureRef, parse_feature_list

N_SLOTS = 14

# Slot roles within one path (rotation path uses 1-7, main path 8-14):
# 1 mainstream axis-wise MLP, 2 mainstream final MLP, 3/4 axis-gate sub-block
# (axis-wise, final), 5/6 channel-gate sub-block (axis-wise, final),
# 7 MLP over all serialized block features.
SLOT_ROLES = {
    1: "axis-wise MLP",
    2: "final MLP",
    3: "axis-gate axis-wise MLP",
    4: "axis-gate final MLP",
    5: "channel-gate axis-wise MLP",
    6: "channel-gate final MLP",
    7: "head MLP",
}
TIED_GROUPS = ((1, 3, 5, 8, 10, 12), (2, 9), (6, 13))
META_HEADS = 4
GATE_MODES = ("soft", "hard", "straight_through")


@dataclass(frozen=True)
class ModelConfig:
    n_h: int
    n_bk: tuple[int, ...]
    n_d: tuple[int, ...]
    rotation_block_sets: tuple[BlockSpec, ...]
    main_block_sets: tuple[BlockSpec, ...]
    layout: ChannelLayout | None = None
    segment_length: int | None = None
    class_count: int | None = None
    leaky_slope: float = 0.3
    dropout: float = 0.5
    meta_setting: bool = False
    use_rotation: bool = True
    gate_mode: str = "soft"
    seed: int = 42
    class_names: tuple[str, ...] = ()
    name: str = ""

    def slot(self, i: int) -> tuple[int, int]:
        """(stage count, base kernels) of 1-based slot i."""
        return self.n_d[i - 1], self.n_bk[i - 1]

    @property
    def hyperparameters(self) -> list[int]:
        return [self.n_h, *self.n_bk, *self.n_d]

    def with_data(self, layout: ChannelLayout, segment_length: int, class_count: int,
                  class_names: tuple[str, ...] = ()) -> "ModelConfig":
        return replace(
            self,
            layout=self.layout or layout,
            segment_length=self.segment_length or segment_length,
            class_count=self.class_count or class_count,
            class_names=self.class_names or tuple(class_names),
        )

    def to_dict(self) -> dict[str, Any]:
        def blocks(sets):
            return [
                {"length": b.block_length, "overlap": b.overlap, "features": [str(f) for f in b.features]}
                for b in sets
            ]

        return {
            "name": self.name,
            "seed": self.seed,
            "meta_setting": self.meta_setting,
            "hyperparameters": {"n_h": self.n_h, "n_bk": list(self.n_bk), "n_d": list(self.n_d)},
            "rotation_blocks": blocks(self.rotation_block_sets),
            "main_blocks": blocks(self.main_block_sets),
            "channels": self.layout.to_dicts() if self.layout else None,
            "segment_length": self.segment_length,
            "classes": self.class_count,
            "class_names": list(self.class_names),
            "leaky_slope": self.leaky_slope,
            "dropout": self.dropout,
            "use_rotation": self.use_rotation,
            "gate_mode": self.gate_mode,
        }

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()


def validate_config(config: ModelConfig) -> ModelConfig:
    """Check positivity, table sizes, tying rules (meta-setting mode) and block/segment fit."""
    if len(config.n_bk) != N_SLOTS or len(config.n_d) != N_SLOTS:
        raise ConfigError(
            f"n_bk and n_d need {N_SLOTS} entries each, got {len(config.n_bk)} and {len(config.n_d)}"
        )
    values = config.hyperparameters
    if len(values) != 1 + 2 * N_SLOTS:
        raise ConfigError(f"expected 29 hyperparameters, got {len(values)}")
    for name, v in [("n_h", config.n_h)] + [
        (f"n_bk[{i + 1}]", v) for i, v in enumerate(config.n_bk)
    ] + [(f"n_d[{i + 1}]", v) for i, v in enumerate(config.n_d)]:
        if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
            raise ConfigError(f"positivity: {name} must be a positive integer, got {v!r}")
    if config.meta_setting:
        if config.n_h != META_HEADS:
            raise ConfigError(f"tying constraint: meta-setting mode fixes n_h = {META_HEADS}, got {config.n_h}")
        for group in TIED_GROUPS:
            for table, label in ((config.n_bk, "n_bk"), (config.n_d, "n_d")):
                vals = {i: table[i - 1] for i in group}
                if len(set(vals.values())) != 1:
                    desc = " == ".join(f"{label}[{i}]" for i in group)
                    raise ConfigError(f"tying constraint {desc} violated: {vals}")
    if not 0.0 <= config.dropout < 1.0:
        raise ConfigError(f"dropout must lie in [0, 1), got {config.dropout}")
    if config.leaky_slope < 0:
        raise ConfigError(f"leaky_slope must be non-negative, got {config.leaky_slope}")
    if config.gate_mode not in GATE_MODES:
        raise ConfigError(f"gate_mode must be one of {GATE_MODES}, got {config.gate_mode!r}")
    if not config.main_block_sets:
        raise ConfigError("at least one main-path block set is required")
    if config.use_rotation and not config.rotation_block_sets:
        raise ConfigError("at least one rotation-path block set is required")
    if config.class_count is not None and config.class_count < 2:
        raise ConfigError(f"class count must be at least 2, got {config.class_count}")
    if config.segment_length is not None:
        for spec in (*config.rotation_block_sets, *config.main_block_sets):
            spec.check(config.segment_length)
    if config.layout is not None and config.use_rotation and not config.layout.triad_map().triads:
        raise ConfigError("the channel layout has no rotatable triad; disable use_rotation")
    return config


# --------------------------------------------------------------------------
# file loading


def _slot_table(raw: Any, label: str) -> tuple[int, ...]:
    if isinstance(raw, (list, tuple)):
        return tuple(raw)
    if isinstance(raw, dict):
        table: dict[int, Any] = {}
        for key, value in raw.items():
            for part in str(key).split(","):
                try:
                    idx = int(part)
                except ValueError:
                    raise ConfigError(f"{label}: bad slot key {key!r}") from None
                if not 1 <= idx <= N_SLOTS:
                    raise ConfigError(f"{label}: slot {idx} outside 1..{N_SLOTS}")
                if idx in table:
                    raise ConfigError(f"{label}: slot {idx} given twice")
                table[idx] = value
        missing = sorted(set(range(1, N_SLOTS + 1)) - set(table))
        if missing:
            raise ConfigError(f"{label}: missing slots {missing}")
        return tuple(table[i] for i in range(1, N_SLOTS + 1))
    raise ConfigError(f"{label} must be a list or a slot table")


def _block_sets(raw: Any, default_features: tuple[FeatureRef, ...]) -> tuple[BlockSpec, ...]:
    if raw is None:
        return ()
    specs = []
    for entry in raw:
        if isinstance(entry, int):
            entry = {"length": entry}
        feats = entry.get("features")
        features = parse_feature_list(feats) if feats else default_features
        specs.append(BlockSpec(int(entry["length"]), int(entry.get("overlap", 0)), features))
    return tuple(specs)


def _layout(raw: Any) -> ChannelLayout | None:
    if raw is None:
        return None
    if isinstance(raw, str):
        from .data.datasets import layout_for

        return layout_for(raw)
    return ChannelLayout.from_dicts(raw)


def config_from_dict(data: dict[str, Any]) -> ModelConfig:
    hp = data.get("hyperparameters", data)
    try:
        features = parse_feature_list(data["features"]) if data.get("features") else SELECTED_FEATURES
        shared = data.get("blocks")
        rot = _block_sets(data.get("rotation_blocks", shared), features)
        main = _block_sets(data.get("main_blocks", shared), features)
        cfg = ModelConfig(
            n_h=hp["n_h"],
            n_bk=_slot_table(hp["n_bk"], "n_bk"),
            n_d=_slot_table(hp["n_d"], "n_d"),
            rotation_block_sets=rot,
            main_block_sets=main,
            layout=_layout(data.get("channels")),
            segment_length=data.get("segment_length"),
            class_count=data.get("classes"),
            leaky_slope=float(data.get("leaky_slope", 0.3)),
            dropout=float(data.get("dropout", 0.5)),
            meta_setting=bool(data.get("meta_setting", False)),
            use_rotation=bool(data.get("use_rotation", True)),
            gate_mode=str(data.get("gate_mode", "soft")),
            seed=int(data.get("seed", 42)),
            class_names=tuple(data.get("class_names") or ()),
            name=str(data.get("name", "")),
        )
    except KeyError as exc:
        raise ConfigError(f"missing configuration key {exc}") from None
    return validate_config(cfg)


def config_from_text(text: str) -> ModelConfig:
    data = yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    return config_from_dict(data)


PRESETS = ("ucihar", "ucihar-norot", "pamap2", "daphnet", "opportunity", "opportunity-ispl",
           "synthetic", "synthetic-norot")


def load_config(path_or_preset: str | Path) -> ModelConfig:
    """Load a YAML file, or one of the bundled presets by name."""
    p = Path(path_or_preset)
    if p.is_file():
        return config_from_text(p.read_text(encoding="utf-8"))
    name = str(path_or_preset)
    if name in PRESETS:
        text = resources.files("rtsfnet.configs").joinpath(f"{name}.yaml").read_text(encoding="utf-8")
        return config_from_text(text)
    raise ConfigError(f"config {name!r} is neither a file nor a preset ({', '.join(PRESETS)})")
