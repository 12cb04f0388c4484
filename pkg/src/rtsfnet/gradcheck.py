"""Finite-difference check of the full network's gradients.

Perturbing a classifier weight leaves the rotated series (and therefore the
main-path block features) untouched, and no parameter affects the triad norms
fed to the rotation path. Both feature sets are computed once and reused, which
keeps the check exact while making each perturbed evaluation cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import Tensor

from . import autodiff as ad
from .channels import simple_layout
from .config import ModelConfig
from .model import RTsfNet
from .tsf import SELECTED_FEATURES, BlockSpec

GRAD_TOLERANCE = 1e-3
# Count and crossing features are piecewise constant: their derivative is zero
# almost everywhere and a central difference straddling a jump is meaningless.
SMOOTH_FEATURES = tuple(f for f in SELECTED_FEATURES if f.differentiable)


@dataclass
class GradCheckResult:
    max_error: float
    n_params: int
    rotation_error: float
    classifier_error: float
    reduced_step: int = 0
    skipped: int = 0

    @property
    def passed(self) -> bool:
        return self.max_error < GRAD_TOLERANCE


def tiny_config(seed: int = 42, features=SMOOTH_FEATURES) -> ModelConfig:
    """n_h = 2, all kernel counts 8, one stage each, 2 triads, 16 samples, 3 classes."""
    blocks = (BlockSpec(8, 0, features), BlockSpec(16, 0, features))
    return ModelConfig(
        n_h=2, n_bk=(8,) * 14, n_d=(1,) * 14,
        rotation_block_sets=blocks, main_block_sets=blocks,
        layout=simple_layout(2), segment_length=16, class_count=3,
        dropout=0.0, seed=seed, name="gradcheck-tiny",
    )


def check_model_gradients(model: RTsfNet, x: Tensor, y: Tensor, eps: float = 1e-4) -> GradCheckResult:
    """Max relative error between autograd and central differences over every parameter."""
    model = model.double().eval()
    x = x.double()
    with torch.no_grad():
        xc = model._channels(x)
        norms = model.triad_norms(xc)
        rot_feats = None
        if model.mh3dr is not None:
            rot_feats = [f.detach() for f in model.mh3dr.rpc.block_features(norms, model.mh3dr.norm_tags)]

    def rotated() -> Tensor | None:
        if model.mh3dr is None:
            return None
        raw = model.mh3dr.raw_params(norms, rot_feats)
        out, _ = model.mh3dr(xc, norms, raw)
        return out

    def full_loss() -> Tensor:
        axes = model.axes(x, rotated=rotated())
        return ad.cross_entropy(ad.softmax(model.classifier(axes, model.main_tags)), y)

    with torch.no_grad():
        main_feats = [f.detach() for f in model.classifier.block_features(model.axes(x, rotated=rotated()),
                                                                           model.main_tags)]

    def classifier_loss() -> Tensor:
        return ad.cross_entropy(ad.softmax(model.classifier.head(main_feats)), y)

    cls_params = list(model.classifier.parameters())
    rot_params = list(model.mh3dr.parameters()) if model.mh3dr is not None else []
    cls = ad.grad_check_stats(classifier_loss, cls_params, eps, extrapolate=True)
    rot = ad.grad_check_stats(full_loss, rot_params, eps, extrapolate=True) if rot_params else ad.GradCheckStats()
    total = cls.merge(rot)
    n = sum(p.numel() for p in cls_params + rot_params)
    return GradCheckResult(total.max_error, n, rot.max_error, cls.max_error, total.reduced_step, total.skipped)


def tiny_batch(seed: int = 42, batch: int = 4) -> tuple[Tensor, Tensor]:
    g = torch.Generator().manual_seed(seed)
    x = torch.randn(batch, 16, 6, generator=g, dtype=torch.float64)
    y = torch.arange(batch) % 3
    return x, y


def run_tiny_check(seed: int = 42, eps: float = 1e-4) -> GradCheckResult:
    torch.manual_seed(seed)
    model = RTsfNet(tiny_config(seed))
    x, y = tiny_batch(seed)
    return check_model_gradients(model, x, y, eps)
