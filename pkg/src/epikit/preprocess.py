"""Gap filling, smoothing and trend decomposition of daily series."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .errors import InsufficientHistory, SeriesTooShort
from .timeseries import TimeSeries

DEFAULT_HP_LAMBDA = 1e4  # strong enough to push weekly oscillation into the residual


@dataclass(frozen=True)
class Decomposition:
    """Additive split of a series into a smooth trend and the rest."""

    trend: np.ndarray
    residual: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.trend + self.residual


@dataclass(frozen=True)
class ExtrapolationConfig:
    """Settings for backward extrapolation over a leading gap of L days."""

    window: int = 7
    growth: float = 1.03
    gap_count: int = 0
    noise_divisor: float = 3.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.growth <= 0:
            raise ValueError("growth must be positive")
        if self.noise_divisor <= 0:
            raise ValueError("noise divisor must be positive")
        if self.gap_count < 0:
            raise ValueError("gap_count must be non-negative")


def extrapolate_backward(series: TimeSeries, cfg: ExtrapolationConfig) -> TimeSeries:
    """Extend a series backward over ``cfg.gap_count`` missing days.

    Each filled day is the mean of the ``window`` following days (previously
    filled days included), scaled by ``growth ** n`` where ``n`` counts
    backward steps from the first known day starting at 1, plus zero-mean
    normal noise with standard deviation value / noise_divisor.  Negative
    draws are clamped to zero.
    """
    m, L = cfg.window, cfg.gap_count
    if len(series) < m:
        raise InsufficientHistory(
            f"need at least {m} known values, series has {len(series)}"
        )
    if L == 0:
        return series
    rng = np.random.default_rng(cfg.rng_seed)
    vals = list(series.values)
    for n in range(1, L + 1):
        base = float(np.mean(vals[:m])) * cfg.growth**n
        if np.isfinite(cfg.noise_divisor):
            base += rng.normal(0.0, abs(base) / cfg.noise_divisor)
        vals.insert(0, max(base, 0.0))
    return TimeSeries(
        start_date=series.start_date - dt.timedelta(days=L),
        values=np.asarray(vals),
        indicator=series.indicator,
        gap_indices=tuple(range(L)) + tuple(g + L for g in series.gap_indices),
    )


def hp_filter(series: TimeSeries | np.ndarray, lam: float = DEFAULT_HP_LAMBDA) -> Decomposition:
    """Hodrick-Prescott trend extraction.

    Minimizes sum((x - T)^2) + lam * sum((d2 T)^2), solved exactly through
    the sparse pentadiagonal normal equations (I + lam * K'K) T = x.
    """
    x = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=float)
    n = len(x)
    if n < 3:
        raise SeriesTooShort(f"hp_filter needs length >= 3, got {n}")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    data = np.repeat([[1.0], [-2.0], [1.0]], n, axis=1)
    K = sparse.dia_matrix((data, [0, 1, 2]), shape=(n - 2, n))
    trend = spsolve((sparse.eye(n) + lam * (K.T @ K)).tocsc(), x)
    return Decomposition(trend=trend, residual=x - trend)


def smooth(series: TimeSeries, window: int = 7) -> TimeSeries:
    """Centered moving average; windows shrink symmetrically near the edges."""
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd and >= 1")
    x = series.values
    n = len(x)
    half = window // 2
    out = np.empty(n)
    csum = np.concatenate([[0.0], np.cumsum(x)])
    for i in range(n):
        k = min(half, i, n - 1 - i)
        out[i] = (csum[i + k + 1] - csum[i - k]) / (2 * k + 1)
    return series.with_values(out)
