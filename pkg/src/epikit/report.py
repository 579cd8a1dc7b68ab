"""Derived outputs: effective reproduction number, ensemble quantile bands,
and forward projection with forecast test volumes."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .abm import DiseaseParams, Population, SimResult, mean_infectious_period, run_ensemble
from .errors import EnsembleTooSmall, NonPositiveValue
from .timeseries import TimeSeries


@dataclass(frozen=True)
class ReproSeries:
    """Daily effective reproduction number; NaN where undefined (no active
    infectious agents that day)."""

    values: np.ndarray
    smooth_window: int

    def defined(self) -> np.ndarray:
        return ~np.isnan(self.values)


@dataclass(frozen=True)
class QuantileBand:
    """Per-day 10/50/90 percent empirical quantiles of one statistic."""

    statistic: str
    q10: np.ndarray
    q50: np.ndarray
    q90: np.ndarray


def reproduction_number(
    result: SimResult, f: float, smooth_window: int = 7
) -> ReproSeries:
    """R(t) as new infections per currently infectious agent, scaled by the
    mean infectious period f, then smoothed with a centered moving average.

    Days with no infectious agents are undefined and stay NaN; the smoothing
    average ignores them.
    """
    if f <= 0:
        raise NonPositiveValue("mean infectious period f must be positive")
    i_n = result.new_infections
    i_c = result.infectious_count
    raw = np.full(len(i_n), np.nan)
    ok = i_c > 0
    raw[ok] = i_n[ok] * f / i_c[ok]
    if smooth_window <= 1:
        return ReproSeries(values=raw, smooth_window=smooth_window)
    half = smooth_window // 2
    out = np.full(len(raw), np.nan)
    for i in range(len(raw)):
        k = min(half, i, len(raw) - 1 - i)
        window = raw[i - k : i + k + 1]
        if np.isnan(raw[i]):
            continue
        out[i] = np.nanmean(window)
    return ReproSeries(values=out, smooth_window=smooth_window)


def quantile_bands(ensemble: list[SimResult], statistic: str) -> QuantileBand:
    """Linear-interpolated empirical quantiles across the ensemble, per day."""
    if len(ensemble) < 2:
        raise EnsembleTooSmall(f"need >= 2 runs, have {len(ensemble)}")
    data = np.stack([r.series(statistic) for r in ensemble])
    q10, q50, q90 = np.quantile(data, [0.10, 0.50, 0.90], axis=0)
    return QuantileBand(statistic=statistic, q10=q10, q50=q50, q90=q90)


def _hold_last_week(values: np.ndarray, horizon: int) -> np.ndarray:
    week = values[-7:]
    reps = int(np.ceil(horizon / len(week)))
    return np.tile(week, reps)[:horizon]


def extend_tests(observed_tests: TimeSeries, horizon: int, seed: int = 0) -> np.ndarray:
    """History plus horizon days of forecast test volumes.

    Uses the forecast module's model selection; falls back to repeating the
    last observed week when the fit degenerates or errors out.
    """
    hist = observed_tests.values
    if horizon == 0:
        return hist.copy()
    try:
        from .forecast import forecast_sarima, select_sarima

        model = select_sarima(hist, seed=seed)
        future = forecast_sarima(model, horizon)
        if not np.all(np.isfinite(future)):
            raise ValueError("non-finite forecast")
    except Exception:
        future = _hold_last_week(hist, horizon)
    return np.concatenate([hist, np.maximum(future, 0.0)])


@dataclass(frozen=True)
class Projection:
    bands: dict[str, QuantileBand]
    repro: ReproSeries
    tests: np.ndarray
    history_days: int  # days [0, history_days) are history, the rest forecast
    ensemble: tuple[SimResult, ...]


PROJECTED_STATISTICS = ("new_diagnoses", "new_deaths", "num_critical", "new_infections")


def project(
    params: DiseaseParams,
    population: Population,
    observed_tests: TimeSeries,
    horizon: int = 30,
    n_runs: int = 10,
    seed: int = 0,
    f: float | None = None,
) -> Projection:
    """Simulate the calibrated model over history plus horizon, with the test
    series extended by the forecast model; emit bands and R(t)."""
    history_days = len(observed_tests.values)
    tests = extend_tests(observed_tests, horizon, seed=seed)
    n_days = history_days + horizon
    ensemble = run_ensemble(population, params, n_days, tests, n_runs, seed)
    bands = {s: quantile_bands(ensemble, s) for s in PROJECTED_STATISTICS}
    if f is None:
        f = mean_infectious_period(params, population.age_bin_counts())
    mean_result = replace(
        ensemble[0],
        new_infections=np.mean([r.new_infections for r in ensemble], axis=0),
        infectious_count=np.mean([r.infectious_count for r in ensemble], axis=0),
    )
    repro = reproduction_number(mean_result, f)
    return Projection(
        bands=bands,
        repro=repro,
        tests=tests,
        history_days=history_days,
        ensemble=tuple(ensemble),
    )
