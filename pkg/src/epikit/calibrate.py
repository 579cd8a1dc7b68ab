"""Parameter identification: misfit functional, a Tree-Parzen-Estimator
optimizer built from scratch, and sequential per-window calibration of the
agent-based simulator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import (
    EmptyPoints,
    StoreTooSmall,
    WindowMismatch,
    WindowWithoutData,
    ZeroDenominator,
)
from .abm import DiseaseParams, Population, SimResult, ensemble_mean, run_ensemble
from .timeseries import TimeSeries

STATISTICS = ("new_diagnoses", "new_deaths", "num_critical")


# ---------------------------------------------------------------- search space


@dataclass(frozen=True)
class Dimension:
    name: str
    kind: str  # "continuous" or "integer"
    lower: float
    upper: float

    def __post_init__(self):
        if self.kind not in ("continuous", "integer"):
            raise ValueError(f"unknown dimension kind {self.kind!r}")
        if not self.lower < self.upper:
            raise ValueError(f"{self.name}: lower must be < upper")


@dataclass(frozen=True)
class SearchSpace:
    dimensions: tuple[Dimension, ...]

    def __post_init__(self):
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise ValueError("dimension names must be unique")

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.dimensions]

    def sample_uniform(self, rng: np.random.Generator) -> np.ndarray:
        q = np.array([rng.uniform(d.lower, d.upper) for d in self.dimensions])
        return self.round_integers(q)

    def round_integers(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float).copy()
        for i, d in enumerate(self.dimensions):
            q[i] = min(max(q[i], d.lower), d.upper)
            if d.kind == "integer":
                q[i] = float(np.clip(np.rint(q[i]), math.ceil(d.lower), math.floor(d.upper)))
        return q

    def as_dict(self, q: np.ndarray) -> dict[str, float]:
        return {d.name: (int(v) if d.kind == "integer" else float(v))
                for d, v in zip(self.dimensions, q)}


# ----------------------------------------------------------------- trial store


@dataclass
class TrialStore:
    """Append-only record of evaluated points and their misfit values."""

    params: list[np.ndarray] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)

    def append(self, q: np.ndarray, loss: float) -> None:
        self.params.append(np.asarray(q, dtype=float))
        self.losses.append(float(loss))

    def __len__(self) -> int:
        return len(self.losses)

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.losses))

    @property
    def best_loss(self) -> float:
        return self.losses[self.best_index]

    @property
    def best_params(self) -> np.ndarray:
        return self.params[self.best_index]

    def best_so_far(self) -> np.ndarray:
        return np.minimum.accumulate(self.losses)


@dataclass(frozen=True)
class TpeConfig:
    gamma: float = 0.25
    n_init: int = 10
    n_samp: int = 24
    max_iter: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must be in (0, 1)")
        if self.n_init < 2:
            raise ValueError("n_init must be >= 2")
        if self.n_samp < 1:
            raise ValueError("n_samp must be >= 1")


def tpe_split(store: TrialStore, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Indices of the low-loss set and its complement.

    |low| = max(1, ceil(gamma * K)); ties broken by insertion order via a
    stable sort.
    """
    k = len(store)
    if k < 2:
        raise StoreTooSmall(f"need >= 2 trials to split, have {k}")
    n_low = max(1, math.ceil(gamma * k))
    order = np.argsort(store.losses, kind="stable")
    return order[:n_low], order[n_low:]


# -------------------------------------------------------------- Parzen density


class ParzenDensity:
    """Mixture of per-point truncated Gaussian kernels plus one uniform prior
    kernel over the bounds, all with weight 1/(n+1).

    The per-point bandwidth is the distance to the nearest adjacent distinct
    value (bounds included as neighbors), floored at
    (upper-lower)/min(100, 10n).  Repeated points share one bandwidth --
    duplicates are the same location, not neighbors -- so a pile-up on a
    single value (common on integer dimensions) keeps a kernel wide enough
    to go on exploring instead of collapsing to a point mass.
    """

    def __init__(self, points, lower: float, upper: float):
        pts = np.sort(np.clip(np.asarray(points, dtype=float), lower, upper))
        if len(pts) == 0:
            raise EmptyPoints("Parzen density needs at least one point")
        self.lower = float(lower)
        self.upper = float(upper)
        self.mu = pts
        n = len(pts)
        uniq, inverse = np.unique(pts, return_inverse=True)
        padded = np.concatenate([[lower], uniq, [upper]])
        gaps = np.minimum(padded[1:-1] - padded[:-2], padded[2:] - padded[1:-1])
        floor = (upper - lower) / min(100, 10 * n)
        self.sigma = np.maximum(gaps, floor)[inverse]
        # per-kernel truncated-normal mass inside the bounds
        self._lo_cdf = ndtr((lower - self.mu) / self.sigma)
        self._mass = ndtr((upper - self.mu) / self.sigma) - self._lo_cdf
        self.weight = 1.0 / (n + 1)

    def pdf(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        z = (x[:, None] - self.mu[None, :]) / self.sigma[None, :]
        gauss = np.exp(-0.5 * z * z) / (self.sigma[None, :] * np.sqrt(2 * np.pi))
        dens = (gauss / self._mass[None, :]).sum(axis=1)
        dens += 1.0 / (self.upper - self.lower)  # uniform prior kernel
        dens *= self.weight
        dens[(x < self.lower) | (x > self.upper)] = 0.0
        return dens

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        which = rng.integers(0, len(self.mu) + 1, n)
        u = rng.random(n)
        out = self.lower + u * (self.upper - self.lower)
        kernel = which < len(self.mu)
        if np.any(kernel):
            i = which[kernel]
            # inverse-CDF truncated normal draw
            p = self._lo_cdf[i] + u[kernel] * self._mass[i]
            out[kernel] = self.mu[i] + self.sigma[i] * ndtri(p)
        return np.clip(out, self.lower, self.upper)


def expected_improvement(l_pdf, g_pdf, gamma: float):
    """Score (gamma + (g/l)(1-gamma))^-1; monotone in the ratio l/g."""
    l_pdf = np.asarray(l_pdf, dtype=float)
    g_pdf = np.asarray(g_pdf, dtype=float)
    return 1.0 / (gamma + (g_pdf / l_pdf) * (1.0 - gamma))


def tpe_suggest(
    store: TrialStore, space: SearchSpace, config: TpeConfig, rng: np.random.Generator
) -> np.ndarray:
    """Next point to evaluate: uniform during startup, then the EI argmax over
    n_samp candidates drawn from the low-loss density."""
    if len(store) < config.n_init:
        return space.sample_uniform(rng)
    low, high = tpe_split(store, config.gamma)
    params = np.asarray(store.params)
    cand = np.empty((config.n_samp, len(space.dimensions)))
    log_l = np.zeros(config.n_samp)
    log_g = np.zeros(config.n_samp)
    for j, dim in enumerate(space.dimensions):
        l_dens = ParzenDensity(params[low, j], dim.lower, dim.upper)
        g_dens = ParzenDensity(params[high, j], dim.lower, dim.upper)
        x = l_dens.sample(rng, config.n_samp)
        if dim.kind == "integer":
            x = np.clip(np.rint(x), math.ceil(dim.lower), math.floor(dim.upper))
        cand[:, j] = x
        log_l += np.log(l_dens.pdf(x))
        log_g += np.log(g_dens.pdf(x))
    ei = expected_improvement(np.exp(log_l), np.exp(log_g), config.gamma)
    return space.round_integers(cand[int(np.argmax(ei))])


def optimize(
    objective,
    space: SearchSpace,
    config: TpeConfig,
    store: TrialStore | None = None,
) -> TrialStore:
    """Run n_init uniform trials then max_iter guided trials.

    Objective failures are recorded as +inf instead of aborting.
    """
    rng = np.random.default_rng(config.seed)
    store = store if store is not None else TrialStore()
    n_total = config.n_init + config.max_iter
    while len(store) < n_total:
        q = tpe_suggest(store, space, config, rng)
        try:
            loss = float(objective(q))
        except Exception:
            loss = np.inf
        if not np.isfinite(loss):
            loss = np.inf
        store.append(q, loss)
    return store


# --------------------------------------------------------------------- misfit


@dataclass(frozen=True)
class MisfitSpec:
    """Which statistics enter the misfit, over which day window (inclusive),
    with what per-statistic weights."""

    statistics: tuple[str, ...] = ("new_diagnoses",)
    window: tuple[int, int] = (0, 0)
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        for s in self.statistics:
            if s not in STATISTICS:
                raise ValueError(f"unknown statistic {s!r}")
        if self.window[1] < self.window[0]:
            raise ValueError("window must be non-empty")
        if self.weights is not None and len(self.weights) != len(self.statistics):
            raise ValueError("one weight per statistic")


def _values(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return series.values
    return np.asarray(series, dtype=float)


def misfit(observed: dict, simulated, spec: MisfitSpec) -> float:
    """Sum over statistics of the absolute daily deviation scaled by the
    observed maximum inside the window."""
    t0, t1 = spec.window
    weights = spec.weights or (1.0,) * len(spec.statistics)
    total = 0.0
    for name, w in zip(spec.statistics, weights):
        if name not in observed:
            raise WindowMismatch(f"observed data lacks statistic {name!r}")
        obs = _values(observed[name])
        sim = simulated.series(name) if isinstance(simulated, SimResult) else _values(simulated[name])
        if len(obs) <= t1 or len(sim) <= t1:
            raise WindowMismatch(
                f"{name}: window ends at day {t1} but series have "
                f"{len(obs)} observed / {len(sim)} simulated days"
            )
        obs_w = obs[t0 : t1 + 1]
        sim_w = sim[t0 : t1 + 1]
        m = float(obs_w.max())
        if m <= 0:
            raise ZeroDenominator(f"{name}: observed maximum in window is not positive")
        total += w * float(np.abs(obs_w - sim_w).sum()) / m
    return total


# -------------------------------------------------------- windowed calibration


@dataclass(frozen=True)
class WindowResult:
    index: int
    start: int
    end: int  # exclusive
    best: dict[str, float]
    best_loss: float
    store: TrialStore


@dataclass(frozen=True)
class CalibrationResult:
    windows: tuple[WindowResult, ...]
    params: DiseaseParams  # base params with the full recovered schedule

    @property
    def beta_schedule(self) -> tuple[tuple[int, float], ...]:
        return self.params.beta_schedule


def default_window1_space(window_length: int, population_size: int) -> SearchSpace:
    """First-window unknowns.

    A schedule change inside window 1 is deliberately absent: a multiplier
    taking effect before the first transmission event rescales beta exactly,
    so searching (change_day, change_mult) there makes beta unidentifiable.
    Pass window1_space explicitly to calibrate_windows to search one anyway.
    """
    return SearchSpace(
        (
            Dimension("initial_exposed", "integer", 1, max(10, population_size // 200)),
            Dimension("beta", "continuous", 0.001, 0.08),
            Dimension("test_odds", "continuous", 1.0, 100.0),
        )
    )


def default_later_space(start: int, end: int) -> SearchSpace:
    return SearchSpace(
        (
            Dimension("change_day", "integer", start, end - 1),
            Dimension("change_mult", "continuous", 0.2, 2.0),
        )
    )


def calibrate_windows(
    observed: dict,
    population: Population,
    base_params: DiseaseParams,
    tests_series,
    *,
    n_windows: int | None = None,
    window_length: int = 30,
    trials_per_window: int = 300,
    ensemble_size: int = 3,
    statistics: tuple[str, ...] = ("new_diagnoses",),
    weights: tuple[float, ...] | None = None,
    tpe_config: TpeConfig | None = None,
    seed: int = 0,
    window1_space: SearchSpace | None = None,
) -> CalibrationResult:
    """Sequential per-window recovery of the transmission history.

    Window 1 searches (initial exposed count, base transmission rate, one
    schedule change day and multiplier inside the window, symptomatic test
    odds).  Every later window freezes all earlier parameters and searches
    only its own (change day, multiplier).  Each trial simulates from day 0
    and scores the misfit of the ensemble-mean curves over the current window
    only; the ensemble seed is fixed per window so trials are comparable.
    """
    obs_len = min(len(_values(observed[s])) for s in statistics)
    if n_windows is None:
        n_windows = obs_len // window_length
    if n_windows < 1 or obs_len < n_windows * window_length:
        raise WindowWithoutData(
            f"observed data covers {obs_len} days, need {n_windows * window_length}"
        )
    base_cfg = tpe_config or TpeConfig()

    windows: list[WindowResult] = []
    frozen_schedule: list[tuple[int, float]] = []
    frozen = replace(base_params, beta_schedule=())

    for i in range(n_windows):
        start, end = i * window_length, (i + 1) * window_length
        spec = MisfitSpec(statistics=statistics, window=(start, end - 1), weights=weights)
        if i == 0:
            space = window1_space or default_window1_space(window_length, population.size)
        else:
            space = default_later_space(start, end)
        cfg = replace(
            base_cfg,
            max_iter=max(0, trials_per_window - base_cfg.n_init),
            seed=seed + i,
        )
        ensemble_seed = (seed + i) * 10_000  # shared across trials within a window

        def objective(q, i=i, start=start, end=end, spec=spec, space=space):
            d = space.as_dict(q)
            schedule = list(frozen_schedule)
            if "change_day" in d:
                schedule.append((int(d["change_day"]), d["change_mult"]))
            if i == 0:
                trial = replace(
                    frozen,
                    beta=d.get("beta", frozen.beta),
                    initial_exposed=int(d.get("initial_exposed", frozen.initial_exposed)),
                    test_odds=d.get("test_odds", frozen.test_odds),
                    beta_schedule=tuple(sorted(schedule)),
                )
            else:
                trial = replace(frozen, beta_schedule=tuple(sorted(schedule)))
            ens = run_ensemble(population, trial, end, tests_series, ensemble_size, ensemble_seed)
            mean_sim = {s: ensemble_mean(ens, s) for s in spec.statistics}
            return misfit(observed, mean_sim, spec)

        store = optimize(objective, space, cfg)
        best = space.as_dict(store.best_params)
        if i == 0:
            frozen = replace(
                frozen,
                beta=best.get("beta", frozen.beta),
                initial_exposed=int(best.get("initial_exposed", frozen.initial_exposed)),
                test_odds=best.get("test_odds", frozen.test_odds),
            )
        if "change_day" in best:
            frozen_schedule.append((int(best["change_day"]), best["change_mult"]))
            frozen_schedule.sort()
        windows.append(
            WindowResult(
                index=i, start=start, end=end, best=best,
                best_loss=store.best_loss, store=store,
            )
        )

    final = replace(frozen, beta_schedule=tuple(frozen_schedule))
    return CalibrationResult(windows=tuple(windows), params=final)
