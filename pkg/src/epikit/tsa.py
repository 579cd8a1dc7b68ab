"""Seasonality, stationarity and cross-indicator diagnostics."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .errors import (
    NumericalBreakdown,
    SeriesTooShort,
    TooFewWeeks,
    ZeroDenominator,
    ZeroVariance,
    ZeroWeekSum,
)
from .timeseries import TimeSeries

# MacKinnon-style critical values for the constant-only Dickey-Fuller
# regression (large-sample).
ADF_CRITICAL = {0.01: -3.43, 0.05: -2.86, 0.10: -2.57}

WEEKDAYS = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday")


@dataclass(frozen=True)
class AcfResult:
    lags: np.ndarray
    coefficients: np.ndarray
    confidence_band: float


@dataclass(frozen=True)
class SeasonProfile:
    """Average fraction of a week's volume falling on each day, Monday first."""

    day_fractions: np.ndarray

    def as_dict(self) -> dict[str, float]:
        return dict(zip(WEEKDAYS, map(float, self.day_fractions)))


@dataclass(frozen=True)
class AdfReport:
    statistic: float
    lag_order: int
    reject_at_5pct: bool


def acf(series: TimeSeries | np.ndarray, max_lag: int) -> AcfResult:
    """Autocorrelation R(n) = sum((x_t - mu)(x_{t+n} - mu)) / ((M - n) sigma^2)."""
    x = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=float)
    M = len(x)
    if M <= max_lag:
        raise SeriesTooShort(f"series length {M} must exceed max_lag {max_lag}")
    mu = x.mean()
    var = np.mean((x - mu) ** 2)
    if var <= 0:
        raise ZeroVariance("constant series has no autocorrelation")
    d = x - mu
    coeffs = np.empty(max_lag + 1)
    for n in range(max_lag + 1):
        coeffs[n] = np.dot(d[: M - n], d[n:]) / ((M - n) * var)
    return AcfResult(
        lags=np.arange(max_lag + 1),
        coefficients=coeffs,
        confidence_band=1.96 / np.sqrt(M),
    )


def pacf(series: TimeSeries | np.ndarray, max_lag: int) -> AcfResult:
    """Partial autocorrelations via the Durbin-Levinson recursion."""
    r = acf(series, max_lag)
    rho = r.coefficients
    pac = np.empty(max_lag + 1)
    pac[0] = 1.0
    phi = np.zeros((max_lag + 1, max_lag + 1))
    variance = 1.0
    for k in range(1, max_lag + 1):
        if variance <= 0:
            raise NumericalBreakdown(f"innovation variance <= 0 at lag {k}")
        num = rho[k] - np.dot(phi[k - 1, 1:k], rho[1:k][::-1])
        phi[k, k] = num / variance
        phi[k, 1:k] = phi[k - 1, 1:k] - phi[k, k] * phi[k - 1, 1:k][::-1]
        variance *= 1.0 - phi[k, k] ** 2
        pac[k] = phi[k, k]
    return AcfResult(lags=r.lags, coefficients=pac, confidence_band=r.confidence_band)


def weekly_fractions(series: TimeSeries) -> SeasonProfile:
    """Per-weekday average fraction of weekly volume over complete weeks.

    Weeks are Monday-aligned: the first Monday on or after the series start
    begins the first counted week; partial leading/trailing weeks are dropped.
    """
    offset = (7 - series.start_date.weekday()) % 7
    usable = len(series) - offset
    n_weeks = usable // 7
    if n_weeks < 2:
        raise TooFewWeeks(f"need >= 2 full Monday-aligned weeks, have {max(n_weeks, 0)}")
    weeks = series.values[offset : offset + 7 * n_weeks].reshape(n_weeks, 7)
    sums = weeks.sum(axis=1)
    if np.any(sums <= 0):
        bad = int(np.flatnonzero(sums <= 0)[0])
        raise ZeroWeekSum(f"week {bad} has non-positive total volume")
    return SeasonProfile(day_fractions=(weeks / sums[:, None]).mean(axis=0))


def percent_change(series: TimeSeries, lag: int = 7) -> TimeSeries:
    """pc(n) = x(n) / x(n - lag) - 1; expects an already-smoothed input."""
    x = series.values
    if len(x) <= lag:
        raise SeriesTooShort(f"need length > {lag}")
    denom = x[:-lag]
    zero = np.flatnonzero(denom == 0)
    if len(zero):
        raise ZeroDenominator(f"zero denominator at index {int(zero[0])}")
    return TimeSeries(
        start_date=series.start_date + dt.timedelta(days=lag),
        values=x[lag:] / denom - 1.0,
        indicator=series.indicator,
    )


def rolling_correlation(
    a: TimeSeries, b: TimeSeries, window: int = 28
) -> tuple[TimeSeries, list[int]]:
    """Pearson correlation of a and b over each trailing ``window``-day slice.

    Returns one value per complete window (the output's day t covers
    [t - window + 1, t]).  Windows in which either slice is constant yield
    NaN and are reported in the returned flag list rather than aborting.
    """
    if len(a) != len(b):
        raise ValueError("series must have equal length")
    if window < 3:
        raise ValueError("window must be >= 3")
    n = len(a)
    if n < window:
        raise SeriesTooShort(f"need length >= {window}")
    xa, xb = a.values, b.values
    out = np.empty(n - window + 1)
    degenerate: list[int] = []
    for t in range(n - window + 1):
        sa = xa[t : t + window]
        sb = xb[t : t + window]
        va, vb = sa.std(), sb.std()
        if va == 0 or vb == 0:
            out[t] = np.nan
            degenerate.append(t)
            continue
        out[t] = np.mean((sa - sa.mean()) * (sb - sb.mean())) / (va * vb)
    ts = TimeSeries(
        start_date=a.start_date + dt.timedelta(days=window - 1),
        values=out,
        indicator=None,
    )
    return ts, degenerate


def _ema(x: np.ndarray, span: int) -> np.ndarray:
    alpha = 2.0 / (span + 1.0)
    out = np.empty_like(x)
    out[0] = x[0]
    for i in range(1, len(x)):
        out[i] = alpha * x[i] + (1.0 - alpha) * out[i - 1]
    return out


def macd(
    series: TimeSeries, fast: int = 12, slow: int = 26, signal: int = 9
) -> tuple[TimeSeries, TimeSeries, TimeSeries]:
    """MACD line, signal line and histogram with standard 12/26/9 spans."""
    if len(series) <= slow + signal:
        raise SeriesTooShort(f"need length > {slow + signal}")
    x = series.values
    line = _ema(x, fast) - _ema(x, slow)
    sig = _ema(line, signal)
    hist = line - sig
    mk = series.with_values
    return mk(line), mk(sig), mk(hist)


def adf_test(series: TimeSeries | np.ndarray) -> AdfReport:
    """Augmented Dickey-Fuller unit-root test, constant-only specification.

    Lag order k = floor(12 * (n/100)^0.25); the t-statistic of the level
    coefficient is compared against embedded 5% critical value.
    """
    x = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=float)
    n = len(x)
    if n < 20:
        raise SeriesTooShort(f"adf_test needs length >= 20, got {n}")
    k = int(np.floor(12.0 * (n / 100.0) ** 0.25))
    dx = np.diff(x)
    # rows: t = k .. len(dx)-1 ; regress dx_t on [1, x_{t-1}, dx_{t-1..t-k}]
    nrows = len(dx) - k
    while nrows < k + 4 and k > 0:  # keep the regression overdetermined
        k -= 1
        nrows = len(dx) - k
    y = dx[k:]
    cols = [np.ones(nrows), x[k:-1]]
    for i in range(1, k + 1):
        cols.append(dx[k - i : len(dx) - i])
    X = np.column_stack(cols)
    beta, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    dof = nrows - X.shape[1]
    if dof <= 0:
        raise SeriesTooShort("not enough observations for the ADF regression")
    sigma2 = resid @ resid / dof
    cov = sigma2 * np.linalg.inv(X.T @ X)
    se = np.sqrt(cov[1, 1])
    stat = float(beta[1] / se)
    return AdfReport(statistic=stat, lag_order=k, reject_at_5pct=stat < ADF_CRITICAL[0.05])
