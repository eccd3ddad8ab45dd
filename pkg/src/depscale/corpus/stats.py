"""Descriptive statistics shared by the video and audio feature extractors.

Conventions (fixed so that independent oracles agree):

* variance / std use the sample (n - 1) form; a single value has variance 0;
* mean deviation is the mean absolute deviation about the mean;
* skewness and kurtosis are standardized central moments (kurtosis is *not*
  excess), both 0 for a constant series or when the moment denominator
  underflows to 0;
* mode is the most frequent value after rounding to 4 decimals, smallest wins;
* quantiles interpolate linearly between order statistics.
"""

from __future__ import annotations

import enum
from collections import OrderedDict

import numpy as np

from ..errors import ValidationError

MODE_DECIMALS = 4


class Stat(str, enum.Enum):
    MIN = "min"
    MAX = "max"
    MEAN = "mean"
    MODE = "mode"
    MEDIAN = "median"
    RANGE = "range"
    MEAN_DEVIATION = "meandev"
    VARIANCE = "var"
    STD = "std"
    SKEWNESS = "skew"
    KURTOSIS = "kurt"
    PEAK_TO_RMS = "p2rms"
    RMS = "rms"
    IQR = "iqr"


class StatSet(tuple):
    """Ordered, duplicate-free collection of :class:`Stat` members."""

    def __new__(cls, stats):
        members = tuple(Stat(s) for s in stats)
        if not members:
            raise ValidationError("a StatSet needs at least one statistic")
        if len(set(members)) != len(members):
            raise ValidationError(f"duplicate statistics in {members}")
        return super().__new__(cls, members)

    @property
    def names(self):
        return [s.value for s in self]


VIDEO11 = StatSet([
    Stat.MIN, Stat.MAX, Stat.MEAN, Stat.MODE, Stat.MEDIAN, Stat.RANGE,
    Stat.MEAN_DEVIATION, Stat.VARIANCE, Stat.STD, Stat.SKEWNESS, Stat.KURTOSIS,
])

AUDIO9 = StatSet([
    Stat.MEAN, Stat.MIN, Stat.SKEWNESS, Stat.KURTOSIS, Stat.STD, Stat.MEDIAN,
    Stat.PEAK_TO_RMS, Stat.RMS, Stat.IQR,
])

HEAD3 = StatSet([Stat.MEAN, Stat.MEDIAN, Stat.MODE])


def rounded_mode(x, decimals=MODE_DECIMALS):
    values, counts = np.unique(np.round(x, decimals), return_counts=True)
    # np.unique sorts ascending, so argmax picks the smallest of tied values
    return float(values[np.argmax(counts)])


def descriptive_stats(series, stats=VIDEO11):
    """Compute the requested statistics of a 1-D series.

    Parameters
    ----------
    series : array_like, shape (n,)
        At least one finite value.
    stats : StatSet or iterable of Stat / str
        Statistics to compute, output follows this order.

    Returns
    -------
    OrderedDict
        ``{stat_name: value}``.
    """
    if not isinstance(stats, StatSet):
        stats = StatSet(stats)
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if n == 0:
        raise ValidationError("descriptive_stats needs a non-empty series")
    if not np.all(np.isfinite(x)):
        raise ValidationError("descriptive_stats got non-finite values")

    mean = x.mean()
    centered = x - mean
    constant = x.max() == x.min()
    m2 = np.mean(centered ** 2)
    var = float(np.sum(centered ** 2) / (n - 1)) if n > 1 else 0.0
    rms = float(np.sqrt(np.mean(x ** 2)))

    out = OrderedDict()
    for stat in stats:
        if stat is Stat.MIN:
            v = x.min()
        elif stat is Stat.MAX:
            v = x.max()
        elif stat is Stat.MEAN:
            v = mean
        elif stat is Stat.MODE:
            v = rounded_mode(x)
        elif stat is Stat.MEDIAN:
            v = np.median(x)
        elif stat is Stat.RANGE:
            v = x.max() - x.min()
        elif stat is Stat.MEAN_DEVIATION:
            v = np.mean(np.abs(centered))
        elif stat is Stat.VARIANCE:
            v = var
        elif stat is Stat.STD:
            v = np.sqrt(var)
        elif stat is Stat.SKEWNESS:
            den = m2 ** 1.5
            v = 0.0 if constant or den == 0 else np.mean(centered ** 3) / den
        elif stat is Stat.KURTOSIS:
            den = m2 ** 2
            v = 0.0 if constant or den == 0 else np.mean(centered ** 4) / den
        elif stat is Stat.PEAK_TO_RMS:
            v = np.max(np.abs(x)) / rms if rms > 0 else 0.0
        elif stat is Stat.RMS:
            v = rms
        elif stat is Stat.IQR:
            q75, q25 = np.quantile(x, [0.75, 0.25])
            v = q75 - q25
        out[stat.value] = float(v)
    return out


def stats_vector(series, stats=VIDEO11):
    """Like :func:`descriptive_stats` but returns a plain float array."""
    return np.fromiter(descriptive_stats(series, stats).values(), dtype=float)
