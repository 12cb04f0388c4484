"""The rTsfNet network.

Layout conventions: a batch of segments is (B, T, C); per-axis series are
(B, A, T); block features are (B, n_blocks, A, F) so that one TSF Mixer Block
(weights shared over the blocks of a block set) sees an (A, F) table per block.
"""

from __future__ import annotations

import torch
from torch import Tensor, nn

from . import autodiff as ad
from .channels import AXIS_TYPES, ChannelLayout
from .config import ModelConfig, validate_config
from .errors import ConfigError
from .rotation import accumulate_heads, rotate_stack
from .tsf import BlockSpec, append_tags


def stage_widths(n_stages: int, base_kernels: int) -> list[int]:
    """Widths of an MLP Block: base * 2^(distance from the last stage)."""
    return [base_kernels * 2 ** (n_stages - j) for j in range(1, n_stages + 1)]


class MlpBlock(nn.Module):
    """n stages of affine -> layer norm -> LeakyReLU -> dropout."""

    def __init__(self, in_width: int, n_stages: int, base_kernels: int, slope: float, rate: float,
                 init_gen: torch.Generator | None = None, drop_gen: torch.Generator | None = None):
        super().__init__()
        self.widths = stage_widths(n_stages, base_kernels)
        self.slope = slope
        self.affines = nn.ModuleList()
        self.norms = nn.ModuleList()
        width = in_width
        for w in self.widths:
            self.affines.append(ad.Affine(width, w, init_gen))
            self.norms.append(ad.LayerNorm(w))
            width = w
        self.drop = ad.Dropout(rate, drop_gen)
        self.out_width = width

    def forward(self, x: Tensor) -> Tensor:
        for affine, norm in zip(self.affines, self.norms):
            x = self.drop(ad.leaky_relu(norm(affine(x)), self.slope))
        return x


class TsfMixerSub(nn.Module):
    """Axis-wise MLP shared by every axis, serialization, then a final MLP."""

    def __init__(self, n_axes: int, n_feat: int, axis_slot: tuple[int, int], final_slot: tuple[int, int],
                 slope: float, rate: float, init_gen=None, drop_gen=None):
        super().__init__()
        self.axis_mlp = MlpBlock(n_feat, *axis_slot, slope, rate, init_gen, drop_gen)
        self.final_mlp = MlpBlock(n_axes * self.axis_mlp.out_width, *final_slot, slope, rate, init_gen, drop_gen)
        self.out_width = self.final_mlp.out_width

    def axis_features(self, x: Tensor) -> Tensor:
        return self.axis_mlp(x)

    def serialize(self, h: Tensor) -> Tensor:
        return self.final_mlp(h.flatten(-2))

    def forward(self, x: Tensor) -> Tensor:
        return self.serialize(self.axis_features(x))


class TsfMixer(nn.Module):
    """TSF Mixer sub-Block with axis-wise and channel-wise gates.

    Slots are 1-based indices into the 14-entry hyperparameter tables:
    ``first`` is the mainstream axis-wise slot; the next five follow the
    order main-final, axis-gate (axis, final), channel-gate (axis, final).
    """

    def __init__(self, cfg: ModelConfig, n_axes: int, n_feat: int, first: int, init_gen=None, drop_gen=None):
        super().__init__()
        s, r = cfg.leaky_slope, cfg.dropout
        slot = cfg.slot
        self.main = TsfMixerSub(n_axes, n_feat, slot(first), slot(first + 1), s, r, init_gen, drop_gen)
        self.axis_gate_net = TsfMixerSub(n_axes, n_feat, slot(first + 2), slot(first + 3), s, r, init_gen, drop_gen)
        self.channel_gate_net = TsfMixerSub(n_axes, n_feat, slot(first + 4), slot(first + 5), s, r, init_gen, drop_gen)
        self.n_channels = self.main.axis_mlp.out_width
        self.axis_gate_fc = ad.Affine(self.axis_gate_net.out_width, n_axes, init_gen)
        self.channel_gate_fc = ad.Affine(self.channel_gate_net.out_width, self.n_channels, init_gen)
        self.gate_mode = cfg.gate_mode
        self.out_width = self.main.out_width

    def _squash(self, logits: Tensor) -> Tensor:
        soft = ad.sigmoid(logits)
        hard_now = self.gate_mode == "straight_through" or (self.gate_mode == "hard" and not self.training)
        if not hard_now:
            return soft
        on = soft > 0.5
        ad.kinks.note(on)
        hard = on.to(soft.dtype)
        # straight-through: forward value is exactly `hard`, gradient is that of `soft`
        return hard + (soft - soft.detach())

    def gates(self, x: Tensor) -> tuple[Tensor, Tensor]:
        """(..., A) axis gates and (..., channels) channel gates computed from the input."""
        axis = self._squash(self.axis_gate_fc(self.axis_gate_net(x)))
        channel = self._squash(self.channel_gate_fc(self.channel_gate_net(x)))
        return axis, channel

    def apply_gates(self, h: Tensor, axis_gate: Tensor, channel_gate: Tensor) -> Tensor:
        h = ad.elementwise_mul(h, axis_gate.unsqueeze(-1))
        return ad.elementwise_mul(h, channel_gate.unsqueeze(-2))

    def forward(self, x: Tensor, axis_gate: Tensor | None = None, channel_gate: Tensor | None = None) -> Tensor:
        h = self.main.axis_features(x)
        if axis_gate is None or channel_gate is None:
            ag, cg = self.gates(x)
            axis_gate = ag if axis_gate is None else axis_gate
            channel_gate = cg if channel_gate is None else channel_gate
        return self.main.serialize(self.apply_gates(h, axis_gate, channel_gate))


def block_set_features(series: Tensor, spec: BlockSpec, tags: Tensor) -> Tensor:
    """(B, A, T) -> (B, n_blocks, A, F + 3) including tag columns."""
    feats = spec.features_of(series)  # (B, A, nb, F)
    return append_tags(feats, tags).transpose(1, 2)


class BlockSetHead(nn.Module):
    """Per-block-set TSF Mixer Blocks, serialization over all blocks, MLP, output affine."""

    def __init__(self, cfg: ModelConfig, block_sets: tuple[BlockSpec, ...], n_axes: int, first: int,
                 out_width: int, init_gen=None, drop_gen=None):
        super().__init__()
        self.block_sets = block_sets
        T = cfg.segment_length
        self.mixers = nn.ModuleList(
            TsfMixer(cfg, n_axes, spec.n_features() + 3, first, init_gen, drop_gen) for spec in block_sets
        )
        serial = sum(spec.n_blocks(T) * m.out_width for spec, m in zip(block_sets, self.mixers))
        self.mlp = MlpBlock(serial, *cfg.slot(first + 6), cfg.leaky_slope, cfg.dropout, init_gen, drop_gen)
        self.out = ad.Affine(self.mlp.out_width, out_width, init_gen)

    def block_features(self, series: Tensor, tags: Tensor) -> list[Tensor]:
        return [block_set_features(series, spec, tags) for spec in self.block_sets]

    def head(self, features: list[Tensor]) -> Tensor:
        """Output from precomputed block features (one tensor per block set)."""
        pieces = [mixer(feats).flatten(1) for feats, mixer in zip(features, self.mixers)]
        return self.out(self.mlp(ad.concat(pieces, dim=-1)))

    def forward(self, series: Tensor, tags: Tensor) -> Tensor:
        return self.head(self.block_features(series, tags))


class MultiHead3DRotation(nn.Module):
    """Rotation parameters from triad-norm features; n_h rotated copies of every triad."""

    def __init__(self, cfg: ModelConfig, triads, norm_tags: Tensor, init_gen=None, drop_gen=None):
        super().__init__()
        self.n_h = cfg.n_h
        self.triads = [list(t) for t in triads]
        self.register_buffer("norm_tags", norm_tags, persistent=False)
        self.rpc = BlockSetHead(cfg, cfg.rotation_block_sets, len(self.triads), 1, 4 * cfg.n_h, init_gen, drop_gen)

    def raw_params(self, norms: Tensor, features: list[Tensor] | None = None) -> Tensor:
        """(B, n_h, 4) tanh outputs of the Rotation Parameter Calculation Block."""
        if features is None:
            features = self.rpc.block_features(norms, self.norm_tags)
        return ad.tanh(self.rpc.head(features)).view(-1, self.n_h, 4)

    def forward(self, x: Tensor, norms: Tensor, raw: Tensor | None = None) -> tuple[Tensor, Tensor]:
        if raw is None:
            raw = self.raw_params(norms)
        params = accumulate_heads(raw)
        R = ad.rodrigues_rotation(params)
        return rotate_stack(x, R, self.triads), params


class RTsfNet(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg = validate_config(cfg)
        if cfg.layout is None or cfg.segment_length is None or cfg.class_count is None:
            raise ConfigError("model needs a channel layout, segment length and class count")
        self.cfg = cfg
        layout: ChannelLayout = cfg.layout
        tm = layout.triad_map()
        self.triads = [list(t) for t in tm.triads]
        self.others = list(tm.others)
        self.n_channels = len(layout)
        self.segment_length = cfg.segment_length

        init_gen = torch.Generator().manual_seed(cfg.seed)
        self.drop_gen = torch.Generator().manual_seed(cfg.seed + 1)

        tags = torch.from_numpy(layout.tags())
        norm_tags = torch.tensor(
            [[loc, st, AXIS_TYPES["norm"]] for loc, st in layout.triad_tags()], dtype=torch.long
        ).reshape(-1, 3)
        rot_idx = [i for t in self.triads for i in t]
        heads = cfg.n_h if cfg.use_rotation else 1
        rotated_tags = tags[rot_idx].repeat(heads, 1) if rot_idx else tags[:0]
        main_tags = torch.cat([norm_tags, rotated_tags, tags[self.others]], dim=0)
        self.register_buffer("main_tags", main_tags, persistent=False)
        self.n_axes = main_tags.shape[0]

        self.register_buffer("input_scale", torch.ones(self.n_channels))
        self.register_buffer("input_offset", torch.zeros(self.n_channels))

        self.mh3dr = None
        if cfg.use_rotation:
            self.mh3dr = MultiHead3DRotation(cfg, self.triads, norm_tags, init_gen, self.drop_gen)
        self.classifier = BlockSetHead(
            cfg, cfg.main_block_sets, self.n_axes, 8, cfg.class_count, init_gen, self.drop_gen
        )

    def set_normalization(self, offset, scale) -> None:
        self.input_offset.copy_(torch.as_tensor(offset, dtype=self.input_offset.dtype))
        self.input_scale.copy_(torch.as_tensor(scale, dtype=self.input_scale.dtype))

    def _channels(self, x: Tensor) -> Tensor:
        if x.dim() != 3 or x.shape[1] != self.segment_length or x.shape[2] != self.n_channels:
            raise ConfigError(
                f"expected input (batch, {self.segment_length}, {self.n_channels}), got {tuple(x.shape)}"
            )
        x = (x.to(self.input_scale.dtype) - self.input_offset) / self.input_scale
        return x.transpose(1, 2)

    def triad_norms(self, xc: Tensor) -> Tensor:
        if not self.triads:
            return xc[:, :0]
        idx = torch.tensor(self.triads, dtype=torch.long, device=xc.device)
        return ad.l2_norm(xc[:, idx, :], dim=2)

    def axes(self, x: Tensor, raw_rotation: Tensor | None = None, rotated: Tensor | None = None) -> Tensor:
        """(B, A, T) concatenation of triad norms, rotated triads and other channels."""
        xc = self._channels(x)
        norms = self.triad_norms(xc)
        rot_idx = [i for t in self.triads for i in t]
        if rotated is None:
            if self.mh3dr is not None:
                rotated, _ = self.mh3dr(xc, norms, raw_rotation)
            else:
                rotated = xc[:, rot_idx]
        return ad.concat([norms, rotated, xc[:, self.others]], dim=1)

    def logits(self, x: Tensor, raw_rotation: Tensor | None = None, rotated: Tensor | None = None) -> Tensor:
        return self.classifier(self.axes(x, raw_rotation, rotated), self.main_tags)

    def forward(self, x: Tensor, raw_rotation: Tensor | None = None) -> Tensor:
        """Class probabilities (B, classes)."""
        return ad.softmax(self.logits(x, raw_rotation), dim=-1)

    def rotation_params(self, x: Tensor) -> Tensor:
        """Accumulated per-head 4-vectors (B, n_h, 4)."""
        if self.mh3dr is None:
            raise ConfigError("model was built without the rotation block")
        xc = self._channels(x)
        return accumulate_heads(self.mh3dr.raw_params(self.triad_norms(xc)))

    @torch.no_grad()
    def predict(self, x: Tensor, batch_size: int = 256) -> Tensor:
        was = self.training
        self.eval()
        out = [self(x[i : i + batch_size]).argmax(dim=-1) for i in range(0, x.shape[0], batch_size)]
        self.train(was)
        return torch.cat(out) if out else torch.zeros(0, dtype=torch.long)


def build_model(cfg: ModelConfig) -> RTsfNet:
    return RTsfNet(cfg)
