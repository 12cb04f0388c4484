"""Naive reference implementations of the feature catalog.

Written from the textbook definitions with Python loops and an explicit DFT
sum, sharing no code with ``rtsfnet.tsf``. Conventions that the definitions
leave open follow the engine's documented choices: population moments,
excess kurtosis, zero for degenerate variance, linear-interpolated quartiles,
time quantiles at index floor(p * (N - 1)), ratio spectrum divided by its
maximum, and a crossing counted wherever ``x > thr`` flips between neighbours.
"""

from __future__ import annotations

import cmath
import math

import numpy as np


def mean(x):
    return sum(x) / len(x)


def moments(x):
    mu = mean(x)
    n = len(x)
    m2 = sum((v - mu) ** 2 for v in x) / n
    m3 = sum((v - mu) ** 3 for v in x) / n
    m4 = sum((v - mu) ** 4 for v in x) / n
    return mu, m2, m3, m4


def _degenerate(x, m2):
    scale = max(abs(v) for v in x)
    return m2 <= (16 * 2.0**-52 * scale) ** 2


def variance(x):
    return moments(x)[1]


def skewness(x):
    _, m2, m3, _ = moments(x)
    return 0.0 if _degenerate(x, m2) else m3 / m2**1.5


def kurtosis(x):
    _, m2, _, m4 = moments(x)
    return 0.0 if _degenerate(x, m2) else m4 / m2**2 - 3.0


def quantile(x, p):
    xs = sorted(x)
    h = (len(xs) - 1) * p
    lo = math.floor(h)
    hi = min(lo + 1, len(xs) - 1)
    frac = h - lo
    v = xs[lo]
    if frac > 0:
        v = v + frac * (xs[hi] - xs[lo])
    return v


def time_value(x, p):
    return x[math.floor(p * (len(x) - 1))]


def threshold(x, kind):
    return {
        "zero": lambda: 0.0,
        "mean": lambda: mean(x),
        "start": lambda: x[0],
        "end": lambda: x[-1],
        "t25": lambda: time_value(x, 0.25),
        "t50": lambda: time_value(x, 0.5),
        "t75": lambda: time_value(x, 0.75),
        "q1": lambda: quantile(x, 0.25),
        "q2": lambda: quantile(x, 0.5),
        "q3": lambda: quantile(x, 0.75),
    }[kind]()


def count_above(x, kind):
    t = threshold(x, kind)
    return sum(1 for v in x if v > t)


def crossings(x, kind):
    t = threshold(x, kind)
    return sum(1 for a, b in zip(x, x[1:]) if (a > t) != (b > t))


def dft(x):
    """One-sided DFT by the defining sum, bins 0..N//2."""
    n = len(x)
    k = np.arange(n // 2 + 1)[:, None]
    t = np.arange(n)[None, :]
    basis = np.exp(-2j * np.pi * ((k * t) % n) / n)
    return basis @ np.asarray(x, dtype=np.float64)


def amplitude(x):
    return [abs(z) for z in dft(x)]


def ratio(x):
    amp = amplitude(x)
    top = max(amp)
    return [a / top if top else 0.0 for a in amp]


def angle(x):
    return [cmath.phase(z) if z != 0 else 0.0 for z in dft(x)]


def autocorrelation(x, lag):
    n = len(x)
    mu, m2, _, _ = moments(x)
    if _degenerate(x, m2):
        return 0.0
    s = sum((x[t] - mu) * (x[t + lag] - mu) for t in range(n - lag))
    return s / ((n - lag) * m2)


def acf_lags(x, step=1):
    n = len(x)
    mu, m2, _, _ = moments(x)
    lags = range(step, n // 2 + 1, step)
    if _degenerate(x, m2):
        return [0.0 for _ in lags]
    c = [v - mu for v in x]
    return [sum(c[t] * c[t + lag] for t in range(n - lag)) / ((n - lag) * m2) for lag in lags]


STAT = {"mean": mean, "variance": variance, "skewness": skewness, "kurtosis": kurtosis}


def feature(fid, x, time_based=False, cache=None):
    """Value(s) of catalog feature ``fid`` as a list of floats.

    ``cache`` (a dict, one per series) keeps spectra and autocorrelations
    between calls.
    """
    cache = {} if cache is None else cache

    def amplitude_c():
        if "amp" not in cache:
            cache["amp"] = amplitude(x)
        return cache["amp"]

    def ratio_c():
        amp = amplitude_c()
        top = max(amp)
        return [a / top if top else 0.0 for a in amp]

    n = len(x)
    d = [b - a for a, b in zip(x, x[1:])]
    if fid == 4:
        f = time_value if time_based else quantile
        return [f(x, p) for p in (0.25, 0.5, 0.75)]
    if 17 <= fid <= 23:
        kinds = ("zero", "mean", "start", "t25", "t50", "t75", "end")
        return [count_above(x, kinds[fid - 17])]
    if 24 <= fid <= 33:
        kinds = ("zero", "mean", "q1", "q2", "q3", "start", "t25", "t50", "t75", "end")
        return [crossings(x, kinds[fid - 24])]
    if fid == 34:
        return amplitude_c()
    if fid == 35:
        return ratio_c()
    if 36 <= fid <= 43:
        spec = amplitude_c() if fid < 40 else ratio_c()
        return [STAT[("mean", "variance", "skewness", "kurtosis")[(fid - 36) % 4]](spec)]
    if fid == 44:
        return angle(x)
    if fid == 45:
        return [autocorrelation(x, 1)]
    if 46 <= fid <= 49:
        if "acf" not in cache:
            cache["acf"] = acf_lags(x)
        return [STAT[("mean", "variance", "skewness", "kurtosis")[fid - 46]](cache["acf"])]
    table = {
        1: lambda: mean(x),
        2: lambda: min(x),
        3: lambda: max(x),
        5: lambda: skewness(x),
        6: lambda: kurtosis(x),
        7: lambda: variance(x),
        8: lambda: math.sqrt(variance(x)),
        9: lambda: math.sqrt(sum(v * v for v in x) / n),
        10: lambda: sum(d) / n,
        11: lambda: sum(d),
        12: lambda: sum(abs(v) for v in d) / n,
        13: lambda: sum(v * v for v in x),
        14: lambda: sum(abs(v) for v in d),
        15: lambda: max(abs(v) for v in x),
        16: lambda: math.sqrt(sum(v * v for v in d)),
    }
    return [table[fid]()]


def scale(fid, x):
    """Natural magnitude of feature ``fid`` on ``x``, the reference for relative error."""
    n = len(x)
    a = max(abs(v) for v in x) or 1.0
    if fid in (1, 2, 3, 4, 8, 9, 10, 12, 15):
        return a
    if fid == 7:
        return a * a
    if fid in (11, 14, 34, 36):
        return n * a
    if fid == 13:
        return n * a * a
    if fid == 16:
        return math.sqrt(n) * a
    if fid == 37:
        return (n * a) ** 2
    return 1.0
