"""Forecasting the testing-volume driver series.

Three models are supported: a multiplicative SARIMA fitted by conditional
sum of squares with a derivative-free simplex search, additive Holt-Winters
triple smoothing tuned by seeded random search, and ordinary least squares
on the day index.  Models are compared by mean absolute error over shared
rolling-origin cross-validation folds.
"""

from __future__ import annotations

import datetime as dt
import enum
import itertools
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.optimize import minimize

from .errors import AllFitsFailed, NonPositiveValue, SeriesTooShort
from .timeseries import TimeSeries
from .tsa import adf_test

SEASON = 7
BOXCOX_GRID = (-1.0, -0.5, 0.0, 0.5, 1.0)
CV_FOLDS = 5
CV_HORIZON = 14


class ModelTag(enum.Enum):
    SARIMA = "sarima"
    HOLT_WINTERS = "hw"
    LINEAR_REGRESSION = "linreg"


@dataclass(frozen=True)
class ForecastResult:
    point_forecast: TimeSeries
    model_tag: ModelTag
    cv_mae: float


# -- transforms --------------------------------------------------------------

def boxcox(values: np.ndarray, lam: float) -> np.ndarray:
    """Variance-stabilizing power transform; lam=0 is the natural log."""
    x = np.asarray(values, dtype=float)
    if np.any(x <= 0):
        raise NonPositiveValue("box-cox requires strictly positive values")
    if lam == 0.0:
        return np.log(x)
    return (x**lam - 1.0) / lam


def inverse_boxcox(values: np.ndarray, lam: float) -> np.ndarray:
    y = np.asarray(values, dtype=float)
    if lam == 0.0:
        return np.exp(y)
    return np.maximum(lam * y + 1.0, 0.0) ** (1.0 / lam)


def select_boxcox_lambda(values: np.ndarray, grid=BOXCOX_GRID) -> float:
    """Profile log-likelihood maximization over a fixed lambda grid."""
    x = np.asarray(values, dtype=float)
    n = len(x)
    logsum = np.log(x).sum()
    best_lam, best_llf = 1.0, -np.inf
    for lam in grid:
        y = boxcox(x, lam)
        var = y.var()
        if var <= 0:
            continue
        llf = -0.5 * n * np.log(var) + (lam - 1.0) * logsum
        if llf > best_llf:
            best_lam, best_llf = lam, llf
    return best_lam


def difference(values: np.ndarray, lag: int = 1, order: int = 1) -> np.ndarray:
    """Apply ``order`` rounds of lag-``lag`` differencing."""
    x = np.asarray(values, dtype=float)
    if len(x) <= lag * order:
        raise SeriesTooShort(f"length {len(x)} too short for lag={lag}, order={order}")
    for _ in range(order):
        x = x[lag:] - x[:-lag]
    return x


def undifference(diffed: np.ndarray, heads: list[np.ndarray], lag: int = 1) -> np.ndarray:
    """Invert ``difference``; ``heads[k]`` is the first ``lag`` values of the
    series at differencing level k (outermost first)."""
    x = np.asarray(diffed, dtype=float)
    for head in reversed(heads):
        out = np.concatenate([head, np.empty_like(x)])
        for t in range(len(x)):
            out[lag + t] = x[t] + out[t]
        x = out
    return x


def difference_heads(values: np.ndarray, lag: int, order: int) -> list[np.ndarray]:
    x = np.asarray(values, dtype=float)
    heads = []
    for _ in range(order):
        heads.append(x[:lag].copy())
        x = x[lag:] - x[:-lag]
    return heads


# -- SARIMA ------------------------------------------------------------------

@dataclass(frozen=True)
class SarimaOrder:
    p: int = 0
    d: int = 0
    q: int = 0
    P: int = 0
    D: int = 0
    Q: int = 0
    s: int = SEASON

    def __post_init__(self):
        if self.d > 2 or self.D > 1:
            raise ValueError("d <= 2 and D <= 1 required")
        if max(self.p, self.q, self.P, self.Q) > 2 or min(
            self.p, self.d, self.q, self.P, self.D, self.Q
        ) < 0:
            raise ValueError("p, q, P, Q must be in 0..2 and non-negative")
        if self.s < 2:
            raise ValueError("season length must be >= 2")

    @property
    def n_coeffs(self) -> int:
        return 1 + self.p + self.q + self.P + self.Q  # intercept included

    @property
    def total(self) -> int:
        return self.p + self.q + self.P + self.Q


@dataclass
class SarimaModel:
    order: SarimaOrder
    intercept: float
    ar: np.ndarray
    ma: np.ndarray
    seasonal_ar: np.ndarray
    seasonal_ma: np.ndarray
    boxcox_lambda: float | None
    residual_variance: float
    aic: float
    degenerate: bool = False
    converged: bool = True
    # fitting context needed to forecast
    _train: np.ndarray = field(default=None, repr=False)

    def ar_poly_lags(self) -> tuple[np.ndarray, np.ndarray]:
        return _expand_poly(self.ar, self.seasonal_ar, self.order.s)

    def ma_poly_lags(self) -> tuple[np.ndarray, np.ndarray]:
        return _expand_poly(self.ma, self.seasonal_ma, self.order.s)


def _expand_poly(nonseas: np.ndarray, seas: np.ndarray, s: int):
    """Multiply (1 - sum a_i B^i)(1 - sum A_I B^(s I)); returns (lags, coeffs)
    of the combined polynomial written as 1 - sum c_l B^l."""
    base = {0: 1.0}
    for i, a in enumerate(nonseas, start=1):
        base[i] = -float(a)
    out: dict[int, float] = dict(base)
    for I, A in enumerate(seas, start=1):
        for l, c in base.items():
            out[l + s * I] = out.get(l + s * I, 0.0) + (-float(A)) * c
    lags = sorted(l for l in out if l > 0)
    return np.array(lags, dtype=int), np.array([-out[l] for l in lags])


def _factor_stationary(coeffs: np.ndarray) -> bool:
    """True when 1 - sum c_i z^i has all roots strictly outside the unit circle."""
    c = np.asarray(coeffs, dtype=float)
    if len(c) == 0:
        return True
    if len(c) == 1:
        return abs(c[0]) < 1.0
    if len(c) == 2:  # stationarity triangle for 1 - c1 z - c2 z^2
        c1, c2 = c
        return (c2 + c1 < 1.0) and (c2 - c1 < 1.0) and (abs(c2) < 1.0)
    roots = np.roots(np.concatenate([-c[::-1], [1.0]]))
    return bool(np.all(np.abs(roots) > 1.0))


def _spectral_radius(lags: np.ndarray, coeffs: np.ndarray) -> float:
    """Largest root modulus of the companion matrix of 1 - sum c_l B^l."""
    if len(lags) == 0:
        return 0.0
    m = int(lags.max())
    full = np.zeros(m)
    full[lags - 1] = coeffs
    comp = np.zeros((m, m))
    comp[0, :] = full
    if m > 1:
        comp[1:, :-1] = np.eye(m - 1)
    return float(np.max(np.abs(np.linalg.eigvals(comp)))) if m else 0.0


@numba.njit(cache=True)
def _css_kernel(w, c, ar_lags, ar_coeffs, ma_lags, ma_coeffs, start):  # pragma: no cover
    T = len(w)
    e = np.zeros(T)
    for t in range(start, T):
        pred = c
        for i in range(len(ar_lags)):
            pred += ar_coeffs[i] * w[t - ar_lags[i]]
        for j in range(len(ma_lags)):
            l = ma_lags[j]
            if t - l >= start:
                pred += ma_coeffs[j] * e[t - l]
        e[t] = w[t] - pred
    return e


def _css_residuals(w: np.ndarray, c: float, ar_lags, ar_coeffs, ma_lags, ma_coeffs):
    start = int(ar_lags.max()) if len(ar_lags) else 0
    e = _css_kernel(
        np.ascontiguousarray(w, dtype=np.float64),
        float(c),
        np.asarray(ar_lags, dtype=np.int64),
        np.asarray(ar_coeffs, dtype=np.float64),
        np.asarray(ma_lags, dtype=np.int64),
        np.asarray(ma_coeffs, dtype=np.float64),
        start,
    )
    return e, start


def _unpack(theta: np.ndarray, order: SarimaOrder):
    c = theta[0]
    i = 1
    ar = theta[i : i + order.p]
    i += order.p
    ma = theta[i : i + order.q]
    i += order.q
    sar = theta[i : i + order.P]
    i += order.P
    sma = theta[i : i + order.Q]
    return c, ar, ma, sar, sma


def fit_sarima(
    series: TimeSeries | np.ndarray,
    order: SarimaOrder,
    boxcox_lambda: float | None = None,
    n_starts: int = 5,
    seed: int = 0,
) -> SarimaModel:
    """Conditional-sum-of-squares fit with multi-start Nelder-Mead search.

    AIC = n ln(SSR/n) + 2k with k the number of estimated coefficients.
    """
    x = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=float)
    z = boxcox(x, boxcox_lambda) if boxcox_lambda is not None else x.astype(float)
    w = z
    if order.D:
        w = difference(w, order.s, order.D)
    if order.d:
        w = difference(w, 1, order.d)
    if len(w) < 10 + order.total:
        raise SeriesTooShort(
            f"differenced length {len(w)} < {10 + order.total} for order {order}"
        )

    rng = np.random.default_rng(seed)
    k = order.n_coeffs
    big = 1e12 * (1.0 + w @ w)

    def objective(theta):
        c, ar, ma, sar, sma = _unpack(theta, order)
        # the combined polynomial factors, so each factor can be checked alone
        if not (_factor_stationary(ar) and _factor_stationary(sar)):
            return big
        ar_lags, ar_coeffs = _expand_poly(ar, sar, order.s)
        ma_lags, ma_coeffs = _expand_poly(ma, sma, order.s)
        ma_coeffs = -ma_coeffs  # MA polynomial is 1 + sum b_j B^j
        e, start = _css_residuals(w, c, ar_lags, ar_coeffs, ma_lags, ma_coeffs)
        return float(e[start:] @ e[start:])

    x0 = np.zeros(k)
    x0[0] = w.mean()
    best_theta, best_ssr, converged = x0, objective(x0), True
    if order.total > 0:
        best_ssr, converged = np.inf, False
        for _ in range(n_starts):
            guess = x0 + np.concatenate([[0.0], rng.uniform(-0.3, 0.3, k - 1)])
            res = minimize(
                objective,
                guess,
                method="Nelder-Mead",
                options={"maxiter": 150 * k, "xatol": 1e-5, "fatol": 1e-9},
            )
            if res.fun < best_ssr:
                best_ssr, best_theta = float(res.fun), res.x
                converged = converged or res.success
        if not np.isfinite(best_ssr) or best_ssr >= big:
            raise AllFitsFailed(f"no stationary fit found for order {order}")
    else:
        # intercept-only model: closed form
        start = 0
        best_theta = np.array([w.mean()])
        best_ssr = float(np.sum((w - w.mean()) ** 2))

    c, ar, ma, sar, sma = _unpack(best_theta, order)
    ar_lags, ar_coeffs = _expand_poly(ar, sar, order.s)
    start = int(ar_lags.max()) if len(ar_lags) else 0
    n_eff = len(w) - start
    var = best_ssr / n_eff
    aic = n_eff * np.log(max(var, 1e-300)) + 2 * k
    return SarimaModel(
        order=order,
        intercept=float(c),
        ar=np.array(ar, dtype=float),
        ma=np.array(ma, dtype=float),
        seasonal_ar=np.array(sar, dtype=float),
        seasonal_ma=np.array(sma, dtype=float),
        boxcox_lambda=boxcox_lambda,
        residual_variance=float(var),
        aic=float(aic),
        degenerate=var < 1e-8,
        converged=converged,
        _train=x.astype(float),
    )


def forecast_sarima(model: SarimaModel, horizon: int) -> np.ndarray:
    """Recursive point forecast; future shocks are set to zero."""
    order = model.order
    x = model._train
    z = boxcox(x, model.boxcox_lambda) if model.boxcox_lambda is not None else x.astype(float)

    heads_seas = difference_heads(z, order.s, order.D)
    w_seas = difference(z, order.s, order.D) if order.D else z
    heads_first = difference_heads(w_seas, 1, order.d)
    w = difference(w_seas, 1, order.d) if order.d else w_seas

    ar_lags, ar_coeffs = model.ar_poly_lags()
    ma_lags, ma_coeffs = model.ma_poly_lags()
    ma_coeffs = -ma_coeffs
    e, _ = _css_residuals(w, model.intercept, ar_lags, ar_coeffs, ma_lags, ma_coeffs)

    wf = list(w)
    ef = list(e)
    T = len(w)
    for h in range(horizon):
        t = T + h
        pred = model.intercept
        for l, a in zip(ar_lags, ar_coeffs):
            pred += a * wf[t - l]
        for l, b in zip(ma_lags, ma_coeffs):
            if t - l < T:
                pred += b * ef[t - l]
        wf.append(pred)
        ef.append(0.0)

    w_full = np.asarray(wf)
    w_full = undifference(w_full, heads_first, 1) if order.d else w_full
    z_full = undifference(w_full, heads_seas, order.s) if order.D else w_full
    out = (
        inverse_boxcox(z_full, model.boxcox_lambda)
        if model.boxcox_lambda is not None
        else z_full
    )
    return np.maximum(out[len(x) :], 0.0)


def select_sarima(
    series: TimeSeries, grid=range(3), seed: int = 0, use_boxcox: bool = True
) -> SarimaModel:
    """Order selection following the forecasting pipeline.

    Seasonal differencing D=1 at lag 7 is fixed; d is 1 when the ADF test on
    the seasonally differenced series fails to reject a unit root, else 0.
    p, q, P, Q are chosen over {0, 1, 2} by minimum AIC; ties go to the
    smallest total order, then lexicographic (p, q, P, Q).
    """
    x = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=float)
    if len(x) < 60:
        raise SeriesTooShort(f"select_sarima needs length >= 60, got {len(x)}")
    lam = select_boxcox_lambda(x) if (use_boxcox and np.all(x > 0)) else None
    z = boxcox(x, lam) if lam is not None else x.astype(float)
    D = 1
    w_seas = difference(z, SEASON, D)
    d = 0 if adf_test(w_seas).reject_at_5pct else 1

    best = None
    best_key = None
    # grid scan with cheap two-start fits; the winner is refit with the full
    # multistart budget below
    for p, q, P, Q in itertools.product(grid, grid, grid, grid):
        order = SarimaOrder(p=p, d=d, q=q, P=P, D=D, Q=Q)
        try:
            model = fit_sarima(series, order, boxcox_lambda=lam, n_starts=2, seed=seed)
        except (SeriesTooShort, AllFitsFailed):
            continue
        key = (round(model.aic, 6), order.total, (p, q, P, Q))
        if best_key is None or key < best_key:
            best, best_key = model, key
    if best is None:
        raise AllFitsFailed("every candidate order failed to fit")
    return fit_sarima(series, best.order, boxcox_lambda=lam, seed=seed)


# -- Holt-Winters ------------------------------------------------------------

@dataclass(frozen=True)
class HoltWintersParams:
    alpha: float
    beta: float
    gamma: float
    season: int = SEASON

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must be strictly inside (0, 1)")


def _hw_init(x: np.ndarray, s: int):
    """Initial level/trend/seasonals from the first two seasons."""
    m1, m2 = x[:s].mean(), x[s : 2 * s].mean()
    trend = (m2 - m1) / s
    detr = x[: 2 * s] - trend * np.arange(2 * s)
    seas = (detr[:s] + detr[s:]) / 2.0
    seas = seas - seas.mean()  # additive normalization: components sum to 0
    level = detr.mean() - trend  # level one step before the first observation
    return level, trend, seas


def _hw_run(x: np.ndarray, params: HoltWintersParams, horizon: int):
    """One smoothing pass; returns (one-step fitted values, forecast)."""
    s = params.season
    a, b, g = params.alpha, params.beta, params.gamma
    level, trend, seas0 = _hw_init(x, s)
    seas = list(seas0)  # seasonal value for day (t mod s), updated in place
    fitted = np.empty(len(x))
    for t in range(len(x)):
        si = t % s
        fitted[t] = level + trend + seas[si]
        prev_level = level
        level = a * (x[t] - seas[si]) + (1 - a) * (level + trend)
        trend = b * (level - prev_level) + (1 - b) * trend
        seas[si] = g * (x[t] - level) + (1 - g) * seas[si]
    fc = np.array(
        [level + (h + 1) * trend + seas[(len(x) + h) % s] for h in range(horizon)]
    )
    return fitted, np.maximum(fc, 0.0), np.asarray(seas)


def fit_holt_winters(
    series: TimeSeries,
    cv_folds: int = CV_FOLDS,
    horizon: int = CV_HORIZON,
    n_samples: int = 500,
    seed: int = 0,
) -> tuple[HoltWintersParams, ForecastResult]:
    """Random search over (alpha, beta, gamma) minimizing rolling-origin CV MAE."""
    x = series.values
    if len(x) < 3 * SEASON:
        raise SeriesTooShort(f"holt-winters needs >= {3 * SEASON} points")
    # shrink the CV horizon on short series so at least one fold trains on
    # three full seasons
    hcv = max(1, min(horizon, (len(x) - 3 * SEASON) // cv_folds))
    folds = rolling_origin_folds(len(x), cv_folds, hcv)
    rng = np.random.default_rng(seed)
    best_params, best_mae = None, np.inf
    for _ in range(n_samples):
        cand = HoltWintersParams(*rng.uniform(1e-4, 1.0 - 1e-4, 3))
        maes = []
        for train_end, test_end in folds:
            if train_end < 3 * SEASON:
                continue
            _, fc, _ = _hw_run(x[:train_end], cand, test_end - train_end)
            maes.append(np.mean(np.abs(fc - x[train_end:test_end])))
        if not maes:
            raise SeriesTooShort("no usable cross-validation fold")
        mae = float(np.mean(maes))
        if mae < best_mae:
            best_params, best_mae = cand, mae
    _, fc, _ = _hw_run(x, best_params, horizon)
    result = ForecastResult(
        point_forecast=TimeSeries(
            start_date=series.end_date + dt.timedelta(days=1),
            values=fc,
            indicator=series.indicator,
        ),
        model_tag=ModelTag.HOLT_WINTERS,
        cv_mae=best_mae,
    )
    return best_params, result


# -- linear regression -------------------------------------------------------

def fit_linear_regression(series: TimeSeries, horizon: int = CV_HORIZON) -> ForecastResult:
    """OLS on the day index; the forecast extends the line, clamped at 0."""
    x = series.values
    if len(x) < 2:
        raise SeriesTooShort("linear regression needs length >= 2")
    t = np.arange(len(x), dtype=float)
    slope, intercept = np.polyfit(t, x, 1)
    future = np.arange(len(x), len(x) + horizon, dtype=float)
    fc = np.maximum(slope * future + intercept, 0.0)
    resid = x - (slope * t + intercept)
    return ForecastResult(
        point_forecast=TimeSeries(
            start_date=series.end_date + dt.timedelta(days=1),
            values=fc,
            indicator=series.indicator,
        ),
        model_tag=ModelTag.LINEAR_REGRESSION,
        cv_mae=float(np.mean(np.abs(resid))),
    )


# -- model comparison --------------------------------------------------------

def rolling_origin_folds(n: int, n_folds: int = CV_FOLDS, horizon: int = CV_HORIZON):
    """Shared fold layout: the last n_folds*horizon days split into blocks;
    fold i trains on everything before its block and forecasts the block."""
    folds = []
    first_test = n - n_folds * horizon
    if first_test < 1:
        raise SeriesTooShort(f"length {n} too short for {n_folds}x{horizon} folds")
    for i in range(n_folds):
        train_end = first_test + i * horizon
        folds.append((train_end, train_end + horizon))
    return folds


def naive_seasonal_forecast(values: np.ndarray, horizon: int, s: int = SEASON) -> np.ndarray:
    last = values[-s:]
    return np.array([last[h % s] for h in range(horizon)])


def compare_models(
    series: TimeSeries, horizon: int = CV_HORIZON, n_folds: int = CV_FOLDS, seed: int = 0
) -> tuple[list[ForecastResult], list[tuple[int, int]]]:
    """Rank SARIMA, Holt-Winters and linear regression by CV MAE on shared folds."""
    x = series.values
    if len(x) < 90:
        raise SeriesTooShort("compare_models needs length >= 90")
    folds = rolling_origin_folds(len(x), n_folds, horizon)

    sarima_order = None
    sarima_lam = None
    maes = {tag: [] for tag in ModelTag}
    for train_end, test_end in folds:
        train = series.slice(0, train_end)
        actual = x[train_end:test_end]
        h = test_end - train_end

        if sarima_order is None:
            ref = select_sarima(train, seed=seed)
            sarima_order, sarima_lam = ref.order, ref.boxcox_lambda
            model = ref
        else:
            model = fit_sarima(train, sarima_order, boxcox_lambda=sarima_lam, seed=seed)
        maes[ModelTag.SARIMA].append(np.mean(np.abs(forecast_sarima(model, h) - actual)))

        _, hw_res = fit_holt_winters(train, horizon=h, seed=seed)
        maes[ModelTag.HOLT_WINTERS].append(
            np.mean(np.abs(hw_res.point_forecast.values - actual))
        )

        lr = fit_linear_regression(train, horizon=h)
        maes[ModelTag.LINEAR_REGRESSION].append(
            np.mean(np.abs(lr.point_forecast.values - actual))
        )

    results = []
    fc_start = series.end_date + dt.timedelta(days=1)
    final = {
        ModelTag.SARIMA: forecast_sarima(
            fit_sarima(series, sarima_order, boxcox_lambda=sarima_lam, seed=seed), horizon
        ),
        ModelTag.HOLT_WINTERS: fit_holt_winters(series, horizon=horizon, seed=seed)[1]
        .point_forecast.values,
        ModelTag.LINEAR_REGRESSION: fit_linear_regression(series, horizon=horizon)
        .point_forecast.values,
    }
    for tag in ModelTag:
        results.append(
            ForecastResult(
                point_forecast=TimeSeries(fc_start, final[tag], series.indicator),
                model_tag=tag,
                cv_mae=float(np.mean(maes[tag])),
            )
        )
    results.sort(key=lambda r: r.cv_mae)
    return results, folds
