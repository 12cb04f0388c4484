"""Scalar feature API over plain sequences.

Thin float64 wrappers around the kernels in :mod:`rtsfnet.tsf`, so the values
returned here are exactly the ones the network sees.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
import torch
from torch import Tensor

from . import tsf
from .errors import ConfigError, DomainError
from .tsf import (
    _STATS,
    COUNT_THRESHOLDS,
    CROSSING_THRESHOLDS,
    BlockSpec,
    FeatureTensor,
    abs_energy,
    abs_max,
    abs_sum_of_changes,
    autocorrelations,
    cid,
    extract_block_features,
    fft_amplitude,
    fft_amplitude_ratio,
    fft_angle,
    kurtosis,
    lag_multiples,
    mean,
    mean_abs_change,
    mean_change,
    quantiles,
    rms,
    skewness,
    std,
    sum_of_change,
    time_quantiles,
    variance,
)

__all__ = [
    "BlockSpec",
    "FeatureTensor",
    "autocorr_lag_stats",
    "autocorrelation",
    "basic_stats",
    "change_stats",
    "count_above",
    "crossings",
    "extract_block_features",
    "fft_features",
    "l2_norm_series",
]

def _as_series(series) -> Tensor:
    arr = np.asarray(getattr(series, "values", series), dtype=np.float64).ravel()
    if arr.size == 0:
        raise DomainError("series is empty")
    return torch.from_numpy(arr)


def basic_stats(series, which: str) -> float:
    """One of: mean, min, max, q1, median, q3, tq25, tq50, tq75, skewness, kurtosis,
    variance, std, rms, abs_max."""
    x = _as_series(series)
    table: dict[str, Callable[[Tensor], Tensor]] = {
        "mean": mean,
        "min": lambda v: v.amin(dim=-1),
        "max": lambda v: v.amax(dim=-1),
        "q1": lambda v: quantiles(v, (0.25,))[..., 0],
        "median": lambda v: quantiles(v, (0.5,))[..., 0],
        "q3": lambda v: quantiles(v, (0.75,))[..., 0],
        "tq25": lambda v: time_quantiles(v, (0.25,))[..., 0],
        "tq50": lambda v: time_quantiles(v, (0.5,))[..., 0],
        "tq75": lambda v: time_quantiles(v, (0.75,))[..., 0],
        "skewness": skewness,
        "kurtosis": kurtosis,
        "variance": variance,
        "std": std,
        "rms": rms,
        "abs_max": abs_max,
    }
    if which not in table:
        raise ConfigError(f"unknown statistic {which!r}; choose from {sorted(table)}")
    return float(table[which](x))


def change_stats(series, which: str) -> float:
    """One of: mean_change, sum_change, mean_abs_change, abs_sum_changes, abs_energy, cid."""
    x = _as_series(series)
    table = {
        "mean_change": mean_change,
        "sum_change": sum_of_change,
        "mean_abs_change": mean_abs_change,
        "abs_sum_changes": abs_sum_of_changes,
        "abs_energy": abs_energy,
        "cid": cid,
    }
    if which not in table:
        raise ConfigError(f"unknown change statistic {which!r}; choose from {sorted(table)}")
    if which != "abs_energy" and x.numel() < 2:
        raise DomainError(f"{which} needs at least two samples")
    return float(table[which](x))


def count_above(series, threshold_kind: str) -> int:
    if threshold_kind not in COUNT_THRESHOLDS:
        raise ConfigError(f"unknown threshold kind {threshold_kind!r}; choose from {COUNT_THRESHOLDS}")
    return int(tsf.count_above(_as_series(series), threshold_kind))


def crossings(series, threshold_kind: str) -> int:
    if threshold_kind not in CROSSING_THRESHOLDS:
        raise ConfigError(f"unknown threshold kind {threshold_kind!r}; choose from {CROSSING_THRESHOLDS}")
    return int(tsf.crossings(_as_series(series), threshold_kind))


def fft_features(series, which: str, norm: str = "max"):
    """Spectra (amplitude, ratio, angle) as arrays; amp_/ratio_ mean/var/skew/kurt as floats."""
    x = _as_series(series)
    if x.numel() < 2:
        raise DomainError("FFT features need at least two samples")
    if which == "amplitude":
        return fft_amplitude(x).numpy()
    if which == "ratio":
        return fft_amplitude_ratio(x, norm).numpy()
    if which == "angle":
        return fft_angle(x).numpy()
    prefix, _, stat = which.partition("_")
    names = {"mean": "mean", "var": "variance", "skew": "skewness", "kurt": "kurtosis"}
    if prefix not in ("amp", "ratio") or stat not in names:
        raise ConfigError(f"unknown FFT feature {which!r}")
    spec = fft_amplitude(x) if prefix == "amp" else fft_amplitude_ratio(x, norm)
    return float(_STATS[names[stat]](spec))


def autocorrelation(series, lag: int) -> float:
    return float(tsf.autocorrelation(_as_series(series), lag))


def autocorr_lag_stats(series, n: int, which: str) -> float:
    """mean/variance/skewness/kurtosis of autocorrelations at lags n, 2n, ... <= len/2."""
    x = _as_series(series)
    if which not in _STATS:
        raise ConfigError(f"unknown statistic {which!r}; choose from {sorted(_STATS)}")
    acf = autocorrelations(x, lag_multiples(x.numel(), n))
    return float(_STATS[which](acf))


def l2_norm_series(x, y=None, z=None) -> np.ndarray:
    """Per-sample Euclidean norm of a triad given as three series or a (T, 3) array."""
    if y is None and z is None:
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ConfigError(f"triad array must have shape (T, 3), got {arr.shape}")
        cols = [arr[:, 0], arr[:, 1], arr[:, 2]]
    else:
        cols = [np.asarray(c, dtype=np.float64).ravel() for c in (x, y, z)]
        if len({c.size for c in cols}) != 1:
            raise ConfigError(f"triad series lengths differ: {[c.size for c in cols]}")
    return np.sqrt(cols[0] ** 2 + cols[1] ** 2 + cols[2] ** 2)
