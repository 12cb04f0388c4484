"""Time-series feature (TSF) engine.

All kernels operate on the last dimension of a torch tensor and broadcast over
any leading dimensions, so the same code serves the scalar API in
:mod:`rtsfnet.features`, bulk extraction over blocks, and the network forward
pass (where gradients must flow from the features back into the rotation
parameters).

Feature ids follow the catalog numbering 1-49. Id 4 covers both order-statistic
quartiles and time-position quantiles (``FeatureRef.time_based``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np
import torch
from torch import Tensor

from . import kinks
from .errors import ConfigError, DomainError

TIME_POSITIONS = {"t25": 0.25, "t50": 0.5, "t75": 0.75}
COUNT_THRESHOLDS = ("zero", "mean", "start", "end", "t25", "t50", "t75")
CROSSING_THRESHOLDS = ("zero", "mean", "q1", "q2", "q3", "start", "end", "t25", "t50", "t75")


# --------------------------------------------------------------------------
# numeric helpers


def _amax(x: Tensor, keepdim: bool = False) -> Tensor:
    if kinks.active():
        kinks.note(x.argmax(dim=-1))
    return x.amax(dim=-1, keepdim=keepdim)


def _amin(x: Tensor) -> Tensor:
    if kinks.active():
        kinks.note(x.argmin(dim=-1))
    return x.amin(dim=-1)


def _abs(x: Tensor) -> Tensor:
    if kinks.active():
        kinks.note(x >= 0)
    return x.abs()


def _where_safe(cond: Tensor, fn: Callable[[Tensor], Tensor], x: Tensor, fill: float = 0.0) -> Tensor:
    kinks.note(cond)
    # double-where keeps NaN/inf out of the backward pass of the masked branch
    safe_x = torch.where(cond, x, torch.ones_like(x))
    return torch.where(cond, fn(safe_x), torch.full_like(x, fill))


def safe_sqrt(x: Tensor) -> Tensor:
    return _where_safe(x > 0, torch.sqrt, x)


def safe_div(num: Tensor, den: Tensor) -> Tensor:
    ok = den != 0
    kinks.note(ok)
    safe_den = torch.where(ok, den, torch.ones_like(den))
    return torch.where(ok, num / safe_den, torch.zeros_like(num))


def _degenerate(m2: Tensor, x: Tensor) -> Tensor:
    """True where the population variance is zero up to rounding of the data scale."""
    eps = torch.finfo(x.dtype).eps
    scale = x.detach().abs().amax(dim=-1)
    out = m2.detach() <= (16 * eps * scale) ** 2
    kinks.note(out)
    return out


def _central_moments(x: Tensor) -> tuple[Tensor, Tensor, Tensor, Tensor]:
    mu = x.mean(dim=-1)
    c = x - mu.unsqueeze(-1)
    c2 = c * c
    return mu, c2.mean(dim=-1), (c2 * c).mean(dim=-1), (c2 * c2).mean(dim=-1)


def mean(x: Tensor) -> Tensor:
    return x.mean(dim=-1)


def variance(x: Tensor) -> Tensor:
    _, m2, _, _ = _central_moments(x)
    return m2


def std(x: Tensor) -> Tensor:
    return safe_sqrt(variance(x))


def skewness(x: Tensor) -> Tensor:
    _, m2, m3, _ = _central_moments(x)
    ok = ~_degenerate(m2, x)
    den = torch.where(ok, m2, torch.ones_like(m2)) ** 1.5
    return torch.where(ok, m3 / den, torch.zeros_like(m3))


def kurtosis(x: Tensor) -> Tensor:
    """Excess kurtosis m4 / m2^2 - 3; zero for a degenerate series."""
    _, m2, _, m4 = _central_moments(x)
    ok = ~_degenerate(m2, x)
    den = torch.where(ok, m2, torch.ones_like(m2)) ** 2
    return torch.where(ok, m4 / den - 3.0, torch.zeros_like(m4))


def rms(x: Tensor) -> Tensor:
    return safe_sqrt((x * x).mean(dim=-1))


def abs_max(x: Tensor) -> Tensor:
    return _amax(_abs(x))


def quantiles(x: Tensor, levels: Sequence[float]) -> Tensor:
    """Order-statistic quantiles with linear interpolation, shape (..., len(levels))."""
    n = x.shape[-1]
    xs, order = torch.sort(x, dim=-1)
    kinks.note(order)
    out = []
    for p in levels:
        h = (n - 1) * p
        lo = int(math.floor(h))
        hi = min(lo + 1, n - 1)
        frac = h - lo
        v = xs[..., lo]
        if frac > 0:
            v = v + frac * (xs[..., hi] - xs[..., lo])
        out.append(v)
    return torch.stack(out, dim=-1)


def time_index(n: int, position: float) -> int:
    return int(math.floor(position * (n - 1)))


def time_quantiles(x: Tensor, positions: Sequence[float]) -> Tensor:
    """Samples found at fractional positions along the time axis."""
    n = x.shape[-1]
    return torch.stack([x[..., time_index(n, p)] for p in positions], dim=-1)


def diffs(x: Tensor) -> Tensor:
    return x[..., 1:] - x[..., :-1]


def mean_change(x: Tensor) -> Tensor:
    return diffs(x).sum(dim=-1) / x.shape[-1]


def sum_of_change(x: Tensor) -> Tensor:
    return diffs(x).sum(dim=-1)


def mean_abs_change(x: Tensor) -> Tensor:
    return _abs(diffs(x)).sum(dim=-1) / x.shape[-1]


def abs_sum_of_changes(x: Tensor) -> Tensor:
    return _abs(diffs(x)).sum(dim=-1)


def abs_energy(x: Tensor) -> Tensor:
    return (x * x).sum(dim=-1)


def cid(x: Tensor) -> Tensor:
    d = diffs(x)
    return safe_sqrt((d * d).sum(dim=-1))


def threshold(x: Tensor, kind: str) -> Tensor:
    """Resolve a named threshold to a per-series value, shape (...)."""
    if kind == "zero":
        return torch.zeros_like(x[..., 0])
    if kind == "mean":
        return x.mean(dim=-1)
    if kind == "start":
        return x[..., 0]
    if kind == "end":
        return x[..., -1]
    if kind in TIME_POSITIONS:
        return x[..., time_index(x.shape[-1], TIME_POSITIONS[kind])]
    if kind in ("q1", "q2", "q3"):
        level = {"q1": 0.25, "q2": 0.5, "q3": 0.75}[kind]
        return quantiles(x, (level,))[..., 0]
    raise ConfigError(f"unknown threshold kind {kind!r}")


def count_above(x: Tensor, kind: str) -> Tensor:
    thr = threshold(x.detach(), kind)
    return (x.detach() > thr.unsqueeze(-1)).sum(dim=-1).to(x.dtype)


def sign_changes(x: Tensor, thr: Tensor) -> Tensor:
    """Changes of the indicator ``x > thr`` between neighbours; a tie counts as not above."""
    above = x > thr.unsqueeze(-1)
    return (above[..., 1:] != above[..., :-1]).sum(dim=-1).to(x.dtype)


def crossings(x: Tensor, kind: str) -> Tensor:
    xd = x.detach()
    return sign_changes(xd, threshold(xd, kind))


def spectrum(x: Tensor) -> tuple[Tensor, Tensor]:
    """Real and imaginary parts of the one-sided DFT, each (..., n // 2 + 1)."""
    z = torch.fft.rfft(x, dim=-1)
    return z.real, z.imag


def fft_amplitude(x: Tensor) -> Tensor:
    re, im = spectrum(x)
    if kinks.active():
        # the DC bin (and Nyquist for even n) is real, so its amplitude is |re|
        real_bins = [0] + ([x.shape[-1] // 2] if x.shape[-1] % 2 == 0 else [])
        kinks.note(re[..., real_bins] >= 0)
    return safe_sqrt(re * re + im * im)


def fft_amplitude_ratio(x: Tensor, norm: str = "max") -> Tensor:
    amp = fft_amplitude(x)
    if norm == "max":
        den = _amax(amp, keepdim=True)
    elif norm == "sum":
        den = amp.sum(dim=-1, keepdim=True)
    else:
        raise ConfigError(f"unknown ratio normalization {norm!r}")
    return safe_div(amp, den.expand_as(amp))


def fft_angle(x: Tensor) -> Tensor:
    re, im = spectrum(x)
    ok = (re != 0) | (im != 0)
    kinks.note(ok)
    if kinks.active():
        kinks.note((re < 0) & (im >= 0))  # side of the branch cut
    safe_re = torch.where(ok, re, torch.ones_like(re))
    safe_im = torch.where(ok, im, torch.zeros_like(im))
    return torch.where(ok, torch.atan2(safe_im, safe_re), torch.zeros_like(re))


def autocorrelation(x: Tensor, lag: int) -> Tensor:
    n = x.shape[-1]
    if lag < 0 or lag > n // 2:
        raise ConfigError(f"lag {lag} outside 0..{n // 2} for length {n}")
    return autocorrelations(x, [lag])[..., 0]


def autocorrelations(x: Tensor, lags: Sequence[int]) -> Tensor:
    """(1 / ((n - l) var)) * sum_t (x_t - mu)(x_{t+l} - mu) for each lag, (..., len(lags))."""
    n = x.shape[-1]
    mu, m2, _, _ = _central_moments(x)
    c = x - mu.unsqueeze(-1)
    ok = ~_degenerate(m2, x)
    var = torch.where(ok, m2, torch.ones_like(m2))
    lag_t = torch.as_tensor(list(lags), dtype=torch.long, device=x.device)
    # shifted[..., k, t] = c[t + lags[k]], zero past the end
    shifted = torch.nn.functional.pad(c, (0, n)).unfold(-1, n, 1).index_select(-2, lag_t)
    s = (shifted * c.unsqueeze(-2)).sum(dim=-1)
    counts = (n - lag_t).to(x.dtype)
    return torch.where(ok.unsqueeze(-1), s / (counts * var.unsqueeze(-1)), torch.zeros_like(s))


def lag_multiples(n: int, step: int) -> list[int]:
    if step < 1:
        raise ConfigError(f"lag step must be >= 1, got {step}")
    lags = list(range(step, n // 2 + 1, step))
    if not lags:
        raise DomainError(f"no lag that is a multiple of {step} fits a length-{n} series")
    return lags


_STATS: dict[str, Callable[[Tensor], Tensor]] = {
    "mean": mean,
    "variance": variance,
    "skewness": skewness,
    "kurtosis": kurtosis,
}


# --------------------------------------------------------------------------
# catalog


@dataclass(frozen=True)
class FeatureRef:
    """One entry of a feature selection: catalog id plus its parameters."""

    fid: int
    levels: tuple[float, ...] = (0.25, 0.5, 0.75)
    time_based: bool = False
    lag: int = 1
    step: int = 1
    norm: str = "max"

    def __str__(self) -> str:
        parts = [str(self.fid)]
        if self.fid == 4:
            if self.time_based:
                parts.append("time")
            if self.levels != (0.25, 0.5, 0.75):
                parts.append("q=" + ",".join(f"{v:g}" for v in self.levels))
        elif self.fid == 45 and self.lag != 1:
            parts.append(f"lag={self.lag}")
        elif 46 <= self.fid <= 49 and self.step != 1:
            parts.append(f"n={self.step}")
        elif self.fid in (35, 40, 41, 42, 43) and self.norm != "max":
            parts.append(f"norm={self.norm}")
        return " ".join(parts)

    @classmethod
    def parse(cls, text: str | int) -> "FeatureRef":
        """Parse ``"<id> [key=value ...]"``; keys: q, time, lag, n, norm."""
        if isinstance(text, (int, np.integer)):
            tokens = [str(int(text))]
        else:
            tokens = str(text).split()
        if not tokens:
            raise ConfigError("empty feature entry")
        try:
            fid = int(tokens[0])
        except ValueError:
            raise ConfigError(f"feature id must be an integer, got {tokens[0]!r}") from None
        ref = cls(fid)
        for tok in tokens[1:]:
            key, _, value = tok.partition("=")
            try:
                if key == "time" and not value:
                    ref = replace(ref, time_based=True)
                elif key == "q":
                    ref = replace(ref, levels=tuple(float(v) for v in value.split(",")))
                elif key == "lag":
                    ref = replace(ref, lag=int(value))
                elif key == "n":
                    ref = replace(ref, step=int(value))
                elif key == "norm":
                    ref = replace(ref, norm=value)
                else:
                    raise ConfigError(f"unknown feature parameter {tok!r} in {text!r}")
            except ValueError:
                raise ConfigError(f"bad value in feature parameter {tok!r}") from None
        ref.validate()
        return ref

    def validate(self) -> None:
        if self.fid not in CATALOG:
            raise ConfigError(f"unknown feature id {self.fid} (catalog ids are 1-49)")
        if any(not 0.0 <= q <= 1.0 for q in self.levels) or not self.levels:
            raise ConfigError(f"quantile levels must lie in [0, 1]: {self.levels}")
        if self.norm not in ("max", "sum"):
            raise ConfigError(f"ratio normalization must be 'max' or 'sum', got {self.norm!r}")
        if self.step < 1 or self.lag < 0:
            raise ConfigError(f"invalid lag parameters in feature {self}")

    def width(self, n: int) -> int:
        if self.fid == 4:
            return len(self.levels)
        if self.fid in (34, 35, 44):
            return n // 2 + 1
        return 1

    def check_length(self, n: int) -> None:
        """Raise if this feature is undefined on length-``n`` blocks."""
        needs_pairs = {10, 11, 12, 14, 16} | set(range(24, 34)) | set(range(45, 50))
        if n < 1 or (self.fid in needs_pairs and n < 2):
            raise DomainError(f"feature {self.fid} needs at least 2 samples, block has {n}")
        if self.fid == 45 and self.lag > n // 2:
            raise ConfigError(f"lag {self.lag} exceeds half of block length {n}")
        if 46 <= self.fid <= 49:
            lag_multiples(n, self.step)

    def compute(self, x: Tensor, memo: dict | None = None) -> Tensor:
        """Feature values with shape (..., width).

        ``memo`` shares sorts, spectra and autocorrelations between features of
        the same blocks; pass one dict per input tensor.
        """
        return CATALOG[self.fid].fn(x, self, {} if memo is None else memo)

    @property
    def differentiable(self) -> bool:
        return CATALOG[self.fid].differentiable


FeatureFn = Callable[[Tensor, FeatureRef, dict], Tensor]


@dataclass(frozen=True)
class FeatureDef:
    fid: int
    name: str
    fn: FeatureFn
    differentiable: bool = True


def _memo(memo: dict, key, thunk: Callable[[], Tensor]) -> Tensor:
    if key not in memo:
        memo[key] = thunk()
    return memo[key]


def _scalar(f: Callable[[Tensor], Tensor]) -> FeatureFn:
    return lambda x, ref, memo: f(x).unsqueeze(-1)


def _amplitude(x: Tensor, memo: dict) -> Tensor:
    return _memo(memo, "amp", lambda: fft_amplitude(x))


def _ratio(x: Tensor, ref: FeatureRef, memo: dict) -> Tensor:
    def thunk() -> Tensor:
        amp = _amplitude(x, memo)
        den = _amax(amp, keepdim=True) if ref.norm == "max" else amp.sum(dim=-1, keepdim=True)
        return safe_div(amp, den.expand_as(amp))

    return _memo(memo, ("ratio", ref.norm), thunk)


def _quantile_feature(x: Tensor, ref: FeatureRef, memo: dict) -> Tensor:
    if ref.time_based:
        return time_quantiles(x, ref.levels)
    return _memo(memo, ("q", ref.levels), lambda: quantiles(x, ref.levels))


def _spectrum_stat(stat: str, ratio: bool) -> FeatureFn:
    def fn(x: Tensor, ref: FeatureRef, memo: dict) -> Tensor:
        spec = _ratio(x, ref, memo) if ratio else _amplitude(x, memo)
        return _STATS[stat](spec).unsqueeze(-1)

    return fn


def _acf_stat(stat: str) -> FeatureFn:
    def fn(x: Tensor, ref: FeatureRef, memo: dict) -> Tensor:
        lags = lag_multiples(x.shape[-1], ref.step)
        acf = _memo(memo, ("acf", ref.step), lambda: autocorrelations(x, lags))
        return _STATS[stat](acf).unsqueeze(-1)

    return fn


def _count(kind: str) -> FeatureFn:
    return lambda x, ref, memo: count_above(x, kind).unsqueeze(-1)


def _cross(kind: str) -> FeatureFn:
    def fn(x: Tensor, ref: FeatureRef, memo: dict) -> Tensor:
        if kind in ("q1", "q2", "q3"):
            with torch.no_grad():
                q = _memo(memo, "quartiles", lambda: quantiles(x.detach(), (0.25, 0.5, 0.75)))
            thr = q[..., ("q1", "q2", "q3").index(kind)]
            return sign_changes(x.detach(), thr).unsqueeze(-1)
        return crossings(x, kind).unsqueeze(-1)

    return fn


def _build_catalog() -> dict[int, FeatureDef]:
    defs = [
        FeatureDef(1, "mean", _scalar(mean)),
        FeatureDef(2, "minimum", _scalar(_amin)),
        FeatureDef(3, "maximum", _scalar(_amax)),
        FeatureDef(4, "quantiles", _quantile_feature),
        FeatureDef(5, "skewness", _scalar(skewness)),
        FeatureDef(6, "kurtosis", _scalar(kurtosis)),
        FeatureDef(7, "variance", _scalar(variance)),
        FeatureDef(8, "standard deviation", _scalar(std)),
        FeatureDef(9, "rooted mean squared", _scalar(rms)),
        FeatureDef(10, "mean change", _scalar(mean_change)),
        FeatureDef(11, "sum of change", _scalar(sum_of_change)),
        FeatureDef(12, "mean abs. change", _scalar(mean_abs_change)),
        FeatureDef(13, "abs. energy", _scalar(abs_energy)),
        FeatureDef(14, "abs. sum of changes", _scalar(abs_sum_of_changes)),
        FeatureDef(15, "abs. max", _scalar(abs_max)),
        FeatureDef(16, "CID", _scalar(cid)),
    ]
    for fid, kind in zip(range(17, 24), ("zero", "mean", "start", "t25", "t50", "t75", "end")):
        defs.append(FeatureDef(fid, f"count above {kind}", _count(kind), differentiable=False))
    cross_kinds = ("zero", "mean", "q1", "q2", "q3", "start", "t25", "t50", "t75", "end")
    for fid, kind in zip(range(24, 34), cross_kinds):
        defs.append(FeatureDef(fid, f"crossings with {kind}", _cross(kind), differentiable=False))
    defs += [
        FeatureDef(34, "FFT amplitude", lambda x, ref, memo: _amplitude(x, memo)),
        FeatureDef(35, "FFT amplitude ratio", _ratio),
    ]
    fid = 36
    for ratio in (False, True):
        for stat in ("mean", "variance", "skewness", "kurtosis"):
            label = "FFT amplitude ratio" if ratio else "FFT amplitude"
            defs.append(FeatureDef(fid, f"{stat} of {label}", _spectrum_stat(stat, ratio)))
            fid += 1
    defs += [
        FeatureDef(44, "FFT angle", lambda x, ref, memo: fft_angle(x)),
        FeatureDef(45, "autocorrelation", lambda x, ref, memo: autocorrelation(x, ref.lag).unsqueeze(-1)),
    ]
    for fid, stat in zip(range(46, 50), ("mean", "variance", "skewness", "kurtosis")):
        defs.append(FeatureDef(fid, f"{stat} of autocorrelation over lag multiples", _acf_stat(stat)))
    return {d.fid: d for d in defs}


CATALOG: dict[int, FeatureDef] = _build_catalog()

# Minimum, maximum, abs. energy, abs. sum of changes, mean change, RMS, count above
# start/end, crossings with 1st/3rd quartile, mean FFT ratio, skewness of FFT
# amplitude, mean/kurtosis of autocorrelation with N=1.
SELECTED_FEATURES: tuple[FeatureRef, ...] = tuple(
    FeatureRef(i) for i in (2, 3, 13, 14, 10, 9, 19, 23, 26, 28, 40, 38, 46, 49)
)


def parse_feature_list(entries: Iterable[str | int]) -> tuple[FeatureRef, ...]:
    refs = tuple(FeatureRef.parse(e) for e in entries)
    if not refs:
        raise ConfigError("feature selection is empty")
    return refs


def read_feature_file(path) -> tuple[FeatureRef, ...]:
    """One feature per line, ``#`` starts a comment."""
    lines = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if line:
                lines.append(line)
    return parse_feature_list(lines)


# --------------------------------------------------------------------------
# blocks


@dataclass(frozen=True)
class BlockSpec:
    block_length: int
    overlap: int = 0
    features: tuple[FeatureRef, ...] = field(default=SELECTED_FEATURES)

    def __post_init__(self) -> None:
        if self.block_length <= 0:
            raise ConfigError(f"block_length must be positive, got {self.block_length}")
        if not 0 <= self.overlap < self.block_length:
            raise ConfigError(f"overlap must satisfy 0 <= overlap < block_length, got {self.overlap}")
        if not self.features:
            raise ConfigError("block spec lists no features")
        for ref in self.features:
            ref.validate()

    @property
    def stride(self) -> int:
        return self.block_length - self.overlap

    def n_blocks(self, length: int) -> int:
        if length < self.block_length:
            raise ConfigError(f"segment length {length} is shorter than block length {self.block_length}")
        return (length - self.block_length) // self.stride + 1

    def n_features(self) -> int:
        """Feature columns per axis and block, excluding the three tag entries."""
        return sum(ref.width(self.block_length) for ref in self.features)

    def check(self, length: int) -> None:
        self.n_blocks(length)
        for ref in self.features:
            ref.check_length(self.block_length)

    def blocks(self, x: Tensor) -> Tensor:
        """(..., T) -> (..., n_blocks, block_length); a trailing partial block is dropped."""
        self.n_blocks(x.shape[-1])
        return x.unfold(-1, self.block_length, self.stride)

    def features_of(self, x: Tensor) -> Tensor:
        """(..., T) -> (..., n_blocks, n_features)."""
        self.check(x.shape[-1])
        b = self.blocks(x)
        memo: dict = {}
        return torch.cat([ref.compute(b, memo) for ref in self.features], dim=-1)


@dataclass
class FeatureTensor:
    """Per-axis block features with three trailing tag columns.

    ``values`` has shape (axes, blocks, n_features + 3).
    """

    values: np.ndarray
    axis_tags: np.ndarray
    feature_names: list[str]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape


def feature_names(spec: BlockSpec) -> list[str]:
    names = []
    for ref in spec.features:
        w = ref.width(spec.block_length)
        base = f"f{ref.fid}"
        if w == 1:
            names.append(base)
        elif ref.fid == 4:
            tag = "t" if ref.time_based else "q"
            names.extend(f"{base}_{tag}{lvl:g}" for lvl in ref.levels)
        else:
            names.extend(f"{base}_{k}" for k in range(w))
    return names + ["tag_location", "tag_sensor", "tag_axis"]


def append_tags(features: Tensor, tags: Tensor) -> Tensor:
    """features (..., axes, blocks, F) + tags (axes, 3) -> (..., axes, blocks, F + 3)."""
    t = tags.to(features.dtype)
    t = t.view(*([1] * (features.dim() - 3)), t.shape[0], 1, 3)
    t = t.expand(*features.shape[:-1], 3)
    return torch.cat([features, t], dim=-1)


def extract_block_features(segment, spec: BlockSpec, axis_tags=None) -> FeatureTensor:
    """Features of every axis and block of a (T, C) segment.

    ``segment`` may be a :class:`rtsfnet.channels.Segment` (tags taken from its
    layout) or a bare (T, C) array, in which case ``axis_tags`` defaults to zeros.
    """
    values = getattr(segment, "values", segment)
    if axis_tags is None and getattr(segment, "layout", None) is not None:
        axis_tags = segment.layout.tags()
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ConfigError(f"segment must be 2-D (time, channels), got shape {arr.shape}")
    tags = np.zeros((arr.shape[1], 3), dtype=np.int64) if axis_tags is None else np.asarray(axis_tags)
    if tags.shape != (arr.shape[1], 3):
        raise ConfigError(f"axis tags must have shape ({arr.shape[1]}, 3), got {tags.shape}")
    x = torch.from_numpy(arr.T.copy())
    with torch.no_grad():
        feats = spec.features_of(x)
        out = append_tags(feats, torch.from_numpy(tags))
    return FeatureTensor(out.numpy(), tags.astype(np.int64), feature_names(spec))
