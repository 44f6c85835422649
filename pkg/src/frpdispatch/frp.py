"""Flexible ramping requirements from net-load forecast-error samples."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .market_model import FrpRequirement

UPPER_QUANTILE = 0.975
LOWER_QUANTILE = 0.025


@dataclass(frozen=True, eq=False)
class SampleSet:
    samples: np.ndarray
    mode: str = ""

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float).reshape(-1)
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.samples.shape[0]


@dataclass(frozen=True, eq=False)
class Histogram:
    bin_width: float
    bin_edges: np.ndarray
    counts: np.ndarray

    def rows(self):
        """(bin_start, bin_end, count) triples."""
        return [(float(self.bin_edges[i]), float(self.bin_edges[i + 1]), int(c))
                for i, c in enumerate(self.counts)]


def _values(samples) -> np.ndarray:
    return samples.samples if isinstance(samples, SampleSet) else np.asarray(samples, dtype=float).reshape(-1)


def empirical_quantile(samples, p: float) -> float:
    """Order-statistic quantile, linear between ranks ``floor(h)`` and ``ceil(h)``, ``h = (n-1)p``."""
    x = _values(samples)
    if x.size == 0:
        raise ValueError("empirical_quantile of an empty sample set")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return float(np.quantile(x, p, method="linear"))


def build_histogram(samples, bin_width: float) -> Histogram:
    """Counts in half-open bins ``[k*w, (k+1)*w)`` anchored at zero."""
    if not bin_width > 0:
        raise ValueError("bin_width must be > 0")
    x = _values(samples)
    if x.size == 0:
        return Histogram(bin_width, np.zeros(0), np.zeros(0, dtype=int))
    idx = np.floor(x / bin_width).astype(np.int64)
    lo, hi = int(idx.min()), int(idx.max())
    counts = np.bincount(idx - lo, minlength=hi - lo + 1)
    edges = np.arange(lo, hi + 2) * bin_width
    return Histogram(bin_width, edges, counts)


def requirements_from_samples(samples) -> FrpRequirement:
    """Upward need from the 97.5% quantile, downward from the 2.5% quantile."""
    fru = max(0.0, empirical_quantile(samples, UPPER_QUANTILE))
    frd = max(0.0, -empirical_quantile(samples, LOWER_QUANTILE))
    # -0.0 would leak into CSV output
    return FrpRequirement(fru + 0.0, frd + 0.0)


def gaussian_quantile(mean: float, sd: float, p: float) -> float:
    """Analytic normal quantile, used as a reference for sampled requirements."""
    from statistics import NormalDist
    if sd == 0:
        return mean
    return NormalDist(mean, sd).inv_cdf(p) if 0 < p < 1 else math.copysign(math.inf, p - 0.5)
