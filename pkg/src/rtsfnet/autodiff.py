"""Differentiation core.

Reverse-mode differentiation is delegated to torch autograd; this module
pins down the operator set the network uses, the seeded stochastic layer,
the finite-difference checking harness and the checkpoint file format.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import torch
from torch import Tensor, nn
from torch.nn import functional as F

from . import kinks
from .errors import ConfigError, InputError, UsageError
from .rotation import rodrigues

LEAKY_SLOPE = 0.3
LN_EPS = 1e-5
DROPOUT_RATE = 0.5

# --------------------------------------------------------------------------
# operators


def affine(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """x @ weight.T + bias over the last dimension; weight is (out, in)."""
    if x.shape[-1] != weight.shape[-1]:
        raise ConfigError(f"affine: input width {x.shape[-1]} != weight fan-in {weight.shape[-1]}")
    return F.linear(x, weight, bias)


def layer_norm(x: Tensor, scale: Tensor | None = None, shift: Tensor | None = None, eps: float = LN_EPS) -> Tensor:
    """(x - mean) / sqrt(biased var + eps) over the last dimension, then scale and shift."""
    return F.layer_norm(x, x.shape[-1:], scale, shift, eps)


def leaky_relu(x: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    if kinks.active():
        kinks.note(x >= 0)
    return F.leaky_relu(x, slope)


def tanh(x: Tensor) -> Tensor:
    return torch.tanh(x)


def sigmoid(x: Tensor) -> Tensor:
    return torch.sigmoid(x)


def softmax(x: Tensor, dim: int = -1) -> Tensor:
    if x.shape[dim] == 0:
        raise ConfigError("softmax over an empty dimension")
    z = x - x.amax(dim=dim, keepdim=True).detach()
    e = torch.exp(z)
    return e / e.sum(dim=dim, keepdim=True)


def dropout(x: Tensor, rate: float, training: bool, generator: torch.Generator | None = None) -> Tensor:
    """Inverted dropout; identity outside training."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    keep = torch.rand(x.shape, generator=generator, dtype=x.dtype, device=x.device) >= rate
    return x * keep.to(x.dtype) / (1.0 - rate)


def concat(tensors: Sequence[Tensor], dim: int = -1) -> Tensor:
    ref = tensors[0].shape
    d = dim % len(ref)
    for t in tensors[1:]:
        if t.dim() != len(ref) or any(a != b for i, (a, b) in enumerate(zip(t.shape, ref)) if i != d):
            raise ConfigError(f"concat: incompatible shapes {tuple(ref)} and {tuple(t.shape)}")
    return torch.cat(list(tensors), dim=dim)


def elementwise_mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        torch.broadcast_shapes(a.shape, b.shape)
    except RuntimeError:
        raise ConfigError(f"elementwise_mul: shapes {tuple(a.shape)} and {tuple(b.shape)} do not broadcast") from None
    return a * b


def reduce_sum(x: Tensor, dim=None) -> Tensor:
    return x.sum() if dim is None else x.sum(dim=dim)


def reduce_mean(x: Tensor, dim=None) -> Tensor:
    return x.mean() if dim is None else x.mean(dim=dim)


def l2_norm(x: Tensor, dim: int = -1) -> Tensor:
    sq = (x * x).sum(dim=dim)
    pos = sq > 0
    kinks.note(pos)
    return torch.where(pos, torch.sqrt(torch.where(pos, sq, torch.ones_like(sq))), torch.zeros_like(sq))


def rodrigues_rotation(params: Tensor) -> Tensor:
    """(..., 4) raw axis/angle vectors -> (..., 3, 3) rotation matrices."""
    return rodrigues(params)


def cross_entropy(probs: Tensor, labels: Tensor, eps: float = 1e-12) -> Tensor:
    """Mean categorical cross-entropy of softmax outputs."""
    picked = probs.gather(-1, labels.long().unsqueeze(-1)).squeeze(-1)
    return -torch.log(picked.clamp_min(eps)).mean()


# --------------------------------------------------------------------------
# parameterized layers


class Affine(nn.Module):
    """Fully connected layer with Glorot-uniform weights and zero bias."""

    def __init__(self, fan_in: int, fan_out: int, generator: torch.Generator | None = None):
        super().__init__()
        if fan_in <= 0 or fan_out <= 0:
            raise ConfigError(f"affine layer needs positive sizes, got {fan_in}->{fan_out}")
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        w = (torch.rand(fan_out, fan_in, generator=generator) * 2.0 - 1.0) * bound
        self.weight = nn.Parameter(w)
        self.bias = nn.Parameter(torch.zeros(fan_out))

    def forward(self, x: Tensor) -> Tensor:
        return affine(x, self.weight, self.bias)


class LayerNorm(nn.Module):
    def __init__(self, width: int, eps: float = LN_EPS):
        super().__init__()
        self.eps = eps
        self.scale = nn.Parameter(torch.ones(width))
        self.shift = nn.Parameter(torch.zeros(width))

    def forward(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.scale, self.shift, self.eps)


class Dropout(nn.Module):
    def __init__(self, rate: float, generator: torch.Generator | None = None):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate
        self.generator = generator

    def forward(self, x: Tensor) -> Tensor:
        return dropout(x, self.rate, self.training, self.generator)


# --------------------------------------------------------------------------
# backward and gradient checking


def backward(loss: Tensor, params: Iterable[Tensor]) -> list[Tensor]:
    """Gradients of a scalar loss for each tensor; unreachable tensors get zeros."""
    params = list(params)
    if loss.numel() != 1:
        raise UsageError(f"backward needs a scalar loss, got shape {tuple(loss.shape)}")
    grads = torch.autograd.grad(loss.reshape(()), params, allow_unused=True)
    return [torch.zeros_like(p) if g is None else g for p, g in zip(params, grads)]


@dataclass
class GradCheckStats:
    max_error: float = 0.0
    checked: int = 0
    reduced_step: int = 0
    skipped: int = 0

    def merge(self, other: "GradCheckStats") -> "GradCheckStats":
        return GradCheckStats(max(self.max_error, other.max_error), self.checked + other.checked,
                              self.reduced_step + other.reduced_step, self.skipped + other.skipped)


def grad_check(fn: Callable[[], Tensor], params: Sequence[Tensor], eps: float = 1e-4) -> float:
    """Max over all parameter entries of |analytic - central difference| / max(|a|, |n|, 1e-8).

    ``fn`` evaluates the scalar objective from the current values of ``params``;
    entries are perturbed in place and restored.
    """
    return grad_check_stats(fn, params, eps).max_error


def grad_check_stats(fn: Callable[[], Tensor], params: Sequence[Tensor], eps: float = 1e-4,
                     extrapolate: bool = False, max_shrink: int = 3) -> GradCheckStats:
    """:func:`grad_check` with bookkeeping for piecewise-smooth objectives.

    Branch decisions (see :mod:`kinks`) are recorded at the base point and at
    every probe. A central difference is only accepted when both probes stay
    on the base point's branches; otherwise the step is divided by 10, up to
    ``max_shrink`` times, before the entry is counted as skipped.

    With ``extrapolate`` each estimate is the Richardson combination
    (4 D(h/2) - D(h)) / 3 of two central differences, which cancels the h^2
    error term for objectives with large third derivatives.
    """
    params = list(params)
    with torch.no_grad():
        f0 = fn().detach().clone()
        f1 = fn().detach().clone()
    if not torch.equal(f0, f1):
        raise UsageError("objective is not deterministic; disable dropout and fix the seed")
    for p in params:
        p.requires_grad_(True)
    analytic = backward(fn(), params)

    def probe() -> tuple[float, list[Tensor]]:
        with kinks.recording() as log:
            value = fn().item()
        return value, log

    stats = GradCheckStats()
    with torch.no_grad():
        _, base = probe()

        def central(flat: Tensor, i: int, orig: float, h: float) -> float | None:
            flat[i] = orig + h
            fp, log_p = probe()
            if not kinks.same(base, log_p):
                flat[i] = orig
                return None
            flat[i] = orig - h
            fm, log_m = probe()
            flat[i] = orig
            if not kinks.same(base, log_m):
                return None
            return (fp - fm) / (2 * h)

        for p, g in zip(params, analytic):
            flat = p.view(-1)
            gflat = g.reshape(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                num = None
                h = eps
                for _ in range(max_shrink + 1):
                    d1 = central(flat, i, orig, h)
                    if d1 is not None and extrapolate:
                        d2 = central(flat, i, orig, h / 2)
                        d1 = None if d2 is None else (4 * d2 - d1) / 3
                    if d1 is not None:
                        num = d1
                        break
                    h /= 10
                if num is None:
                    stats.skipped += 1
                    continue
                if h < eps:
                    stats.reduced_step += 1
                a = gflat[i].item()
                err = abs(a - num) / max(abs(a), abs(num), 1e-8)
                stats.max_error = max(stats.max_error, err)
                stats.checked += 1
    return stats


# --------------------------------------------------------------------------
# checkpoints

CHECKPOINT_MAGIC = b"RTSFCKPT"
CHECKPOINT_VERSION = 1


def config_hash(config_text: str) -> bytes:
    return hashlib.sha256(config_text.encode("utf-8")).digest()


def save_checkpoint(path, tensors: Mapping[str, Tensor], config_text: str = "{}", meta: Mapping | None = None) -> None:
    """Header (magic, version, sha256 of the config, config text, meta JSON) then
    named float32 little-endian parameter blocks."""
    meta_text = json.dumps(dict(meta or {}), sort_keys=True)
    parts = [CHECKPOINT_MAGIC, struct.pack("<I", CHECKPOINT_VERSION), config_hash(config_text)]
    for text in (config_text, meta_text):
        raw = text.encode("utf-8")
        parts += [struct.pack("<I", len(raw)), raw]
    parts.append(struct.pack("<I", len(tensors)))
    for name, t in tensors.items():
        raw_name = name.encode("utf-8")
        arr = np.array(t.detach().cpu().numpy(), dtype="<f4", order="C")  # keeps 0-d shapes
        parts += [struct.pack("<H", len(raw_name)), raw_name, struct.pack("<B", arr.ndim)]
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path) -> tuple[str, dict, dict[str, Tensor]]:
    """Returns (config_text, meta, tensors)."""
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"checkpoint not found: {p}")
    buf = p.read_bytes()
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(buf):
            raise InputError(f"{p}: truncated checkpoint")
        out = buf[pos : pos + n]
        pos += n
        return out

    if take(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
        raise InputError(f"{p}: not an rtsfnet checkpoint")
    (version,) = struct.unpack("<I", take(4))
    if version != CHECKPOINT_VERSION:
        raise InputError(f"{p}: unsupported checkpoint version {version}")
    digest = take(32)
    texts = []
    for _ in range(2):
        (n,) = struct.unpack("<I", take(4))
        texts.append(take(n).decode("utf-8"))
    config_text, meta_text = texts
    if config_hash(config_text) != digest:
        raise InputError(f"{p}: config hash mismatch")
    (count,) = struct.unpack("<I", take(4))
    tensors: dict[str, Tensor] = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = take(nlen).decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        n = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(take(4 * n), dtype="<f4").reshape(shape)
        tensors[name] = torch.from_numpy(arr.astype(np.float32))
    return config_text, json.loads(meta_text), tensors
