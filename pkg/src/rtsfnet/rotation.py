"""Rodrigues-parameterized 3D rotations.

A rotation is driven by a 4-vector ``(ux, uy, uz, a)`` of tanh outputs: the
axis is ``u / |u|`` and the angle is ``a * pi``. The Jacobian of the matrix
with respect to that 4-vector is written out analytically and used as the
backward pass of :class:`RodriguesFunction`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
from torch import Tensor

from . import kinks
from .errors import ConfigError

ANGLE_SCALE = math.pi
AXIS_EPS = 1e-8
FALLBACK_AXIS = (0.0, 0.0, 1.0)


@dataclass(frozen=True)
class RotationParams:
    axis: tuple[float, float, float]
    angle_raw: float

    def as_array(self) -> np.ndarray:
        return np.array([*self.axis, self.angle_raw], dtype=np.float64)

    @classmethod
    def from_array(cls, v) -> "RotationParams":
        v = np.asarray(v, dtype=np.float64).ravel()
        if v.size != 4:
            raise ConfigError(f"rotation parameters need 4 values, got {v.size}")
        return cls((float(v[0]), float(v[1]), float(v[2])), float(v[3]))


@dataclass(frozen=True)
class TriadMap:
    """Channel indices of each rotatable 3-axis sensor plus the remaining channels."""

    triads: tuple[tuple[int, int, int], ...]
    others: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        seen: set[int] = set()
        for t in self.triads:
            if len(t) != 3:
                raise ConfigError(f"triad {t} does not have exactly 3 channels")
            seen.update(t)
        if len(seen) != 3 * len(self.triads):
            raise ConfigError("triads overlap")
        if seen & set(self.others):
            raise ConfigError("a channel is listed both in a triad and as non-rotatable")
        covered = seen | set(self.others)
        if covered and covered != set(range(len(covered))):
            raise ConfigError(f"triads and other channels must cover 0..{len(covered) - 1} exactly")

    @property
    def n_channels(self) -> int:
        return 3 * len(self.triads) + len(self.others)

    @property
    def rotatable(self) -> list[int]:
        return [i for t in self.triads for i in t]

    def check(self, n_channels: int) -> None:
        if n_channels != self.n_channels:
            raise ConfigError(f"triad map covers {self.n_channels} channels, segment has {n_channels}")


def _cross_matrix(k: Tensor) -> Tensor:
    """(..., 3) -> (..., 3, 3) skew-symmetric matrix with K v = k x v."""
    z = torch.zeros_like(k[..., 0])
    kx, ky, kz = k[..., 0], k[..., 1], k[..., 2]
    rows = [
        torch.stack([z, -kz, ky], dim=-1),
        torch.stack([kz, z, -kx], dim=-1),
        torch.stack([-ky, kx, z], dim=-1),
    ]
    return torch.stack(rows, dim=-2)


def _unit_axis(u: Tensor) -> tuple[Tensor, Tensor, Tensor]:
    r = torch.linalg.vector_norm(u, dim=-1)
    degenerate = r < AXIS_EPS
    kinks.note(degenerate)
    fallback = torch.tensor(FALLBACK_AXIS, dtype=u.dtype, device=u.device).expand_as(u)
    safe_r = torch.where(degenerate, torch.ones_like(r), r)
    k = torch.where(degenerate.unsqueeze(-1), fallback, u / safe_r.unsqueeze(-1))
    return k, safe_r, degenerate


def rodrigues_forward(p: Tensor) -> Tensor:
    """R = I + sin(t) K + (1 - cos(t)) K^2 for a batch of 4-vectors (..., 4)."""
    k, _, _ = _unit_axis(p[..., :3])
    theta = ANGLE_SCALE * p[..., 3]
    K = _cross_matrix(k)
    s = torch.sin(theta)[..., None, None]
    c1 = (1.0 - torch.cos(theta))[..., None, None]
    eye = torch.eye(3, dtype=p.dtype, device=p.device)
    return eye + s * K + c1 * (K @ K)


def rodrigues_jacobian_t(p: Tensor) -> Tensor:
    """dR/dp with shape (..., 3, 3, 4); zero axis columns where the axis is degenerate."""
    k, r, degenerate = _unit_axis(p[..., :3])
    theta = ANGLE_SCALE * p[..., 3]
    s = torch.sin(theta)[..., None, None]
    c = torch.cos(theta)[..., None, None]
    K = _cross_matrix(k)
    K2 = K @ K

    d_angle = ANGLE_SCALE * (c * K + s * K2)

    basis = torch.eye(3, dtype=p.dtype, device=p.device)
    E = _cross_matrix(basis)  # E[j] = cross matrix of e_j
    Kb = K.unsqueeze(-3)
    # dR/dk_j = sin E_j + (1 - cos)(E_j K + K E_j), stacked on dim -3
    d_k = s.unsqueeze(-3) * E + (1.0 - c).unsqueeze(-3) * (E @ Kb + Kb @ E)
    # dk/du = (I - k k^T) / |u|
    proj = (basis - k.unsqueeze(-1) * k.unsqueeze(-2)) / r[..., None, None]
    d_u = torch.einsum("...jab,...jm->...abm", d_k, proj)
    d_u = torch.where(degenerate[..., None, None, None], torch.zeros_like(d_u), d_u)
    return torch.cat([d_u, d_angle.unsqueeze(-1)], dim=-1)


class RodriguesFunction(torch.autograd.Function):
    """Rotation matrices from raw 4-vectors with the hand-derived backward."""

    @staticmethod
    def forward(ctx, p: Tensor) -> Tensor:
        ctx.save_for_backward(p)
        return rodrigues_forward(p)

    @staticmethod
    def backward(ctx, grad_out: Tensor) -> Tensor:
        (p,) = ctx.saved_tensors
        jac = rodrigues_jacobian_t(p)
        return torch.einsum("...ab,...abm->...m", grad_out, jac)


def rodrigues(p: Tensor) -> Tensor:
    return RodriguesFunction.apply(p)


def _params_tensor(params) -> Tensor:
    if isinstance(params, RotationParams):
        params = params.as_array()
    arr = np.asarray(params, dtype=np.float64)
    if arr.shape[-1] != 4:
        raise ConfigError(f"rotation parameters need a trailing dimension of 4, got {arr.shape}")
    return torch.from_numpy(arr.copy())


def rodrigues_matrix(params) -> np.ndarray:
    """3x3 rotation matrix (or a stack of them) from RotationParams / 4-vectors."""
    with torch.no_grad():
        return rodrigues_forward(_params_tensor(params)).numpy()


def rodrigues_jacobian(params) -> np.ndarray:
    with torch.no_grad():
        return rodrigues_jacobian_t(_params_tensor(params)).numpy()


def accumulate_head_params(raw) -> np.ndarray | list[RotationParams]:
    """Head m uses the elementwise sum of the first m raw 4-vectors.

    Accepts a list of :class:`RotationParams` (returns the same type) or an
    array of shape (..., n_heads, 4).
    """
    if isinstance(raw, (list, tuple)) and raw and isinstance(raw[0], RotationParams):
        acc = np.cumsum(np.stack([r.as_array() for r in raw]), axis=0)
        return [RotationParams.from_array(v) for v in acc]
    arr = np.asarray(raw, dtype=np.float64)
    if arr.ndim < 2 or arr.shape[-2] == 0:
        raise ConfigError("at least one head of rotation parameters is required")
    if arr.shape[-1] != 4:
        raise ConfigError(f"rotation parameters need a trailing dimension of 4, got {arr.shape}")
    return np.cumsum(arr, axis=-2)


def accumulate_heads(raw: Tensor) -> Tensor:
    """Torch version over (..., n_heads, 4)."""
    if raw.shape[-2] == 0:
        raise ConfigError("at least one head of rotation parameters is required")
    return torch.cumsum(raw, dim=-2)


def rotate_triads(R, segment, triad_map: TriadMap) -> np.ndarray:
    """Apply one rotation matrix to every triad of a (T, C) segment."""
    seg = np.asarray(segment, dtype=np.float64)
    if seg.ndim != 2:
        raise ConfigError(f"segment must be (time, channels), got {seg.shape}")
    triad_map.check(seg.shape[1])
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise ConfigError(f"rotation matrix must be 3x3, got {R.shape}")
    out = seg.copy()
    for t in triad_map.triads:
        idx = list(t)
        out[:, idx] = seg[:, idx] @ R.T
    return out


def rotate_stack(x: Tensor, R: Tensor, triads: Sequence[Sequence[int]]) -> Tensor:
    """Rotate every triad of x (B, C, T) by each head matrix R (B, H, 3, 3).

    Returns (B, H * 3 * n_triads, T) ordered head-major, then triad, then axis.
    """
    idx = torch.tensor([list(t) for t in triads], dtype=torch.long, device=x.device)
    v = x[:, idx, :]  # (B, n_triads, 3, T)
    rotated = torch.einsum("bhij,bnjt->bhnit", R, v)
    b, h, n, _, t = rotated.shape
    return rotated.reshape(b, h * n * 3, t)
