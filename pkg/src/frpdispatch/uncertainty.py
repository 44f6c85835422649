"""VER forecasts, realizations, curtailment caps and net-load forecast errors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True, eq=False)
class WindowForecast:
    """Forecasts issued for one window, columns ordered from its origin.

    ``load`` is (n_loads, n_cols) and ``ver`` is (n_units, n_cols) in MW.  The
    first column is the binding interval; its VER values are the realized
    output unless a sampled :class:`Realization` overrides them.
    """

    origin: int
    load: np.ndarray
    ver: np.ndarray

    def __post_init__(self):
        load = np.atleast_2d(np.asarray(self.load, dtype=float))
        ver = np.atleast_2d(np.asarray(self.ver, dtype=float))
        if load.shape[1] != ver.shape[1]:
            raise ValueError("load and ver forecasts must cover the same intervals")
        if np.any(load < 0) or np.any(ver < 0):
            raise ValueError("forecasts must be >= 0")
        object.__setattr__(self, "load", load)
        object.__setattr__(self, "ver", ver)

    @property
    def intervals(self) -> range:
        return range(self.origin, self.origin + self.ver.shape[1])

    def column(self, tau: int) -> int:
        k = tau - self.origin
        if not 0 <= k < self.ver.shape[1]:
            raise KeyError(f"interval {tau} not covered by window {self.origin}")
        return k


@dataclass(frozen=True, eq=False)
class ForecastSeries:
    windows: tuple[WindowForecast, ...]

    def __post_init__(self):
        windows = tuple(sorted(self.windows, key=lambda w: w.origin))
        origins = [w.origin for w in windows]
        if len(set(origins)) != len(origins):
            raise ValueError("duplicate window origins")
        object.__setattr__(self, "windows", windows)

    @property
    def origins(self) -> list[int]:
        return [w.origin for w in self.windows]

    @property
    def horizon_end(self) -> int:
        """One past the last interval any window forecasts."""
        return max(w.origin + w.ver.shape[1] for w in self.windows)

    def window(self, origin: int) -> WindowForecast:
        for w in self.windows:
            if w.origin == origin:
                return w
        raise KeyError(origin)

    def previous(self, origin: int) -> Optional[WindowForecast]:
        """The window that scheduled ``origin`` as an advisory interval, if any."""
        best = None
        for w in self.windows:
            if w.origin < origin and origin in w.intervals:
                best = w
        return best


@dataclass(frozen=True, eq=False)
class CapProfile:
    """Curtailment amounts per VER unit, uniform in time or per interval.

    ``amounts`` is (n_units,) or (n_units, n_intervals) indexed by absolute
    interval.
    """

    amounts: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amounts, dtype=float)
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise ValueError("cap amounts must be finite and >= 0")
        object.__setattr__(self, "amounts", a)

    @classmethod
    def uniform(cls, n_units: int, value: float) -> "CapProfile":
        return cls(np.full(n_units, float(value)))

    def at(self, tau: int) -> np.ndarray:
        return self.amounts if self.amounts.ndim == 1 else self.amounts[:, tau]

    def total_at(self, tau: int) -> float:
        return float(self.at(tau).sum())


@dataclass(frozen=True)
class Realization:
    """Realized binding-interval VER output per window origin (MW per unit).

    Origins missing from ``ver`` fall back to the window's own binding
    forecast.  Loads are forecast perfectly unless ``load`` supplies
    realized (n_loads,) vectors for an origin.
    """

    ver: dict = field(default_factory=dict)
    load: dict = field(default_factory=dict)


def apply_cap(forecast: Sequence[float], caps: CapProfile, tau: int) -> np.ndarray:
    return np.maximum(0.0, np.asarray(forecast, dtype=float) - caps.at(tau))


def advisory_ver_total(capped: Sequence[float]) -> float:
    return float(np.sum(capped))


def binding_ver_total(realized: Sequence[float], prior_caps: Optional[Sequence[float]]) -> float:
    """Aggregate VER injection admitted in a binding interval.

    The cap applies to the fleet total, so one unit's surplus over its own
    cap may cover another unit's shortfall.
    """
    total = float(np.sum(realized))
    if prior_caps is None:
        return total
    return min(total, float(np.sum(prior_caps)))


def sample_realization(forecast: Sequence[float], error_fraction: float,
                       rng: np.random.Generator) -> np.ndarray:
    """Draw realized output per unit from N(f, (error_fraction * f)^2), clamped at 0."""
    f = np.asarray(forecast, dtype=float)
    if error_fraction < 0:
        raise ValueError("error_fraction must be >= 0")
    if error_fraction == 0:
        return f.copy()
    return np.maximum(0.0, rng.normal(f, error_fraction * f))


def net_load_delta_fbd(realized_total, advisory_total, load_delta=0.0):
    """Net-load revision when the advisory interval becomes binding.

    Positive values mean net load turned out higher than scheduled.  Works
    elementwise on arrays.
    """
    return np.asarray(advisory_total, dtype=float) - np.asarray(realized_total, dtype=float) + load_delta


def net_load_delta_rfbd(realized_total, capped_advisory_total):
    """Net-load revision under capped scheduling; never negative."""
    capped = np.asarray(capped_advisory_total, dtype=float)
    return capped - np.minimum(np.asarray(realized_total, dtype=float), capped)
