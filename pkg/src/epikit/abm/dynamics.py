"""The daily integration loop: transmission, progression, testing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import TestsSeriesTooShort
from ..timeseries import TimeSeries
from .disease import (
    N_STATES,
    POSITIVE_CAPABLE,
    SYMPTOMATIC,
    TRANSMITTING,
    AgentState,
    DiseaseParams,
    apply_beta_schedule,
)
from .population import Csr, Population

_TRANSMIT = np.zeros(N_STATES, dtype=bool)
_TRANSMIT[[s.value for s in TRANSMITTING]] = True
_POSITIVE = np.zeros(N_STATES, dtype=bool)
_POSITIVE[[s.value for s in POSITIVE_CAPABLE]] = True
_SYMPTOM = np.zeros(N_STATES, dtype=bool)
_SYMPTOM[[s.value for s in SYMPTOMATIC]] = True

_EMPTY = np.empty(0, dtype=np.int64)


@dataclass
class SimResult:
    """Per-day outputs of one stochastic realization."""

    seed: int
    new_diagnoses: np.ndarray
    new_deaths: np.ndarray
    num_critical: np.ndarray
    new_infections: np.ndarray  # I_N(t)
    infectious_count: np.ndarray  # I_C(t)
    state_counts: np.ndarray  # (n_days, N_STATES)

    @property
    def n_days(self) -> int:
        return len(self.new_infections)

    def series(self, name: str) -> np.ndarray:
        return getattr(self, name)


@dataclass
class SimState:
    """Mutable per-run state; one run owns one SimState (single-threaded)."""

    population: Population
    params: DiseaseParams
    rng: np.random.Generator
    state: np.ndarray
    sched_day: np.ndarray
    sched_next: np.ndarray
    diagnosed: np.ndarray
    quarantined_until: np.ndarray

    @classmethod
    def fresh(cls, population: Population, params: DiseaseParams, rng) -> "SimState":
        n = population.size
        return cls(
            population=population,
            params=params,
            rng=rng,
            state=np.zeros(n, dtype=np.int8),
            sched_day=np.full(n, -1, dtype=np.int32),
            sched_next=np.full(n, -1, dtype=np.int8),
            diagnosed=np.zeros(n, dtype=bool),
            quarantined_until=np.full(n, -1, dtype=np.int32),
        )


def _schedule_entries(sim: SimState, idx: np.ndarray, state: AgentState, day: int):
    """Draw the next branch and its duration for agents entering ``state``."""
    if len(idx) == 0:
        return
    p = sim.params
    d = p.durations
    pr = p.progression
    rng = sim.rng
    bins = sim.population.age_bins[idx]

    def set_next(sub, nxt, dur):
        if len(sub):
            sim.sched_day[sub] = day + dur.sample(rng, len(sub))
            sim.sched_next[sub] = nxt

    if state == AgentState.E:
        sym = rng.random(len(idx)) < pr.p_sym[bins]
        set_next(idx[sym], AgentState.I, d.latent)
        set_next(idx[~sym], AgentState.A, d.latent)
    elif state == AgentState.I:
        set_next(idx, AgentState.Y, d.presymptomatic)
    elif state == AgentState.A:
        set_next(idx, AgentState.R, d.mild_recovery)
    elif state == AgentState.Y:
        sev = rng.random(len(idx)) < pr.p_sev[bins]
        set_next(idx[sev], AgentState.H, d.symptom_to_resolution)
        set_next(idx[~sev], AgentState.M, d.symptom_to_resolution)
    elif state == AgentState.M:
        set_next(idx, AgentState.R, d.mild_recovery)
    elif state == AgentState.H:
        crit = rng.random(len(idx)) < pr.p_crit[bins]
        set_next(idx[crit], AgentState.C, d.severe_to_critical)
        set_next(idx[~crit], AgentState.R, d.severe_recovery)
    elif state == AgentState.C:
        die = rng.random(len(idx)) < pr.p_death[bins]
        set_next(idx[die], AgentState.D, d.critical_to_death)
        set_next(idx[~die], AgentState.R, d.severe_recovery)
    else:  # R, D absorbing
        sim.sched_day[idx] = -1
        sim.sched_next[idx] = -1


def _infect(sim: SimState, idx: np.ndarray, day: int):
    sim.state[idx] = AgentState.E
    _schedule_entries(sim, idx, AgentState.E, day)


def _gather_rows(csr: Csr, srcs: np.ndarray):
    counts = csr.indptr[srcs + 1] - csr.indptr[srcs]
    total = int(counts.sum())
    if total == 0:
        return _EMPTY, _EMPTY
    starts = csr.indptr[srcs]
    cum = np.cumsum(counts)
    pos = np.arange(total) - np.repeat(cum - counts, counts) + np.repeat(starts, counts)
    return np.repeat(srcs, counts), csr.indices[pos].astype(np.int64)


def _sample_tests(rng, class1: np.ndarray, class0: np.ndarray, k: int, odds: float):
    """Weighted sampling without replacement with two weight classes.

    Exact via the exponential race: an item with weight w is selected in the
    order of Exp(1)/w draws.  Only class-1 draws and the order statistics of
    the class-0 exponentials are generated explicitly.
    """
    n1, n0 = len(class1), len(class0)
    k = min(k, n1 + n0)
    if k <= 0:
        return _EMPTY
    if k == n1 + n0:
        return np.concatenate([class1, class0])
    if odds == 1.0 or n1 == 0:
        pool = class1 if n0 == 0 else (class0 if n1 == 0 else np.concatenate([class1, class0]))
        return pool[rng.permutation(len(pool))[:k]]
    e1 = rng.exponential(1.0 / odds, n1)
    m0 = min(k, n0)
    order_stats = np.cumsum(rng.exponential(1.0, m0) / (n0 - np.arange(m0)))
    merged = np.concatenate([e1, order_stats])
    take = np.argpartition(merged, k - 1)[:k]
    c1 = int(np.sum(take < n1))
    sel1 = class1[np.argpartition(e1, c1 - 1)[:c1]] if c1 > 0 else _EMPTY
    c0 = k - c1
    sel0 = class0[rng.permutation(n0)[:c0]] if c0 > 0 else _EMPTY
    return np.concatenate([sel1, sel0])


@dataclass
class DaySummary:
    new_infections: int
    new_diagnoses: int
    new_deaths: int
    state_counts: np.ndarray

    @property
    def infectious_count(self) -> int:
        return int(self.state_counts[list(map(int, TRANSMITTING))].sum())

    @property
    def num_critical(self) -> int:
        return int(self.state_counts[AgentState.C])


def step(sim: SimState, day: int, tests_today: int) -> DaySummary:
    """Advance one day: transmission, then progression, then testing."""
    pop = sim.population
    params = sim.params
    rng = sim.rng
    layers = pop.layers
    beta_eff = params.beta * apply_beta_schedule(params, day)

    # 1) transmission
    transmitting = _TRANSMIT[sim.state]
    quarantined = sim.quarantined_until >= day
    infected_targets = []
    for csr, weight, household in (
        (pop.household, layers.household_weight, True),
        (pop.school, layers.school_weight, False),
        (pop.work, layers.work_weight, False),
    ):
        src_mask = transmitting if household else (transmitting & ~quarantined)
        srcs = np.flatnonzero(src_mask)
        if len(srcs) == 0:
            continue
        _, targets = _gather_rows(csr, srcs)
        if len(targets) == 0:
            continue
        ok = sim.state[targets] == AgentState.S
        if not household:
            ok &= ~quarantined[targets]
        targets = targets[ok]
        p = min(beta_eff * weight, 1.0)
        hits = targets[rng.random(len(targets)) < p]
        if len(hits):
            infected_targets.append(hits)
    # community: transient encounters resampled daily
    srcs = np.flatnonzero(transmitting & ~quarantined)
    if len(srcs) and layers.community_contacts > 0:
        n_contacts = rng.poisson(layers.community_contacts, len(srcs))
        partners = rng.integers(0, pop.size, int(n_contacts.sum()))
        ok = (sim.state[partners] == AgentState.S) & ~quarantined[partners]
        partners = partners[ok]
        p = min(beta_eff * layers.community_weight, 1.0)
        hits = partners[rng.random(len(partners)) < p]
        if len(hits):
            infected_targets.append(hits)
    if infected_targets:
        new_inf = np.unique(np.concatenate(infected_targets))
        _infect(sim, new_inf, day)
        n_new_inf = len(new_inf)
    else:
        n_new_inf = 0

    # 2) scheduled progression, in fixed state order; snapshot the queue so
    # agents rescheduled during the loop are not advanced twice in one day
    due = sim.sched_day == day
    next_snapshot = sim.sched_next.copy()
    n_deaths = 0
    if np.any(due):
        for code in (AgentState.I, AgentState.A, AgentState.Y, AgentState.M,
                     AgentState.H, AgentState.C, AgentState.R, AgentState.D):
            idx = np.flatnonzero(due & (next_snapshot == code))
            if len(idx) == 0:
                continue
            sim.state[idx] = code
            _schedule_entries(sim, idx, code, day)
            if code == AgentState.D:
                n_deaths = len(idx)

    # 3) testing: weighted allocation of today's tests
    n_diag = 0
    if tests_today > 0:
        eligible = (~sim.diagnosed) & (sim.state != AgentState.D)
        sym = eligible & _SYMPTOM[sim.state]
        class1 = np.flatnonzero(sym)
        class0 = np.flatnonzero(eligible & ~sym)
        chosen = _sample_tests(rng, class1, class0, int(tests_today), params.test_odds)
        positives = chosen[_POSITIVE[sim.state[chosen]]] if len(chosen) else _EMPTY
        if len(positives):
            sim.diagnosed[positives] = True
            n_diag = len(positives)
            not_hosp = positives[
                (sim.state[positives] != AgentState.H)
                & (sim.state[positives] != AgentState.C)
            ]
            sim.quarantined_until[not_hosp] = day + params.quarantine_days

    counts = np.bincount(sim.state, minlength=N_STATES)
    return DaySummary(
        new_infections=n_new_inf,
        new_diagnoses=n_diag,
        new_deaths=n_deaths,
        state_counts=counts,
    )


def run(
    population: Population,
    params: DiseaseParams,
    n_days: int,
    tests_series: TimeSeries | np.ndarray | None,
    seed: int = 0,
    seed_ids: np.ndarray | None = None,
) -> SimResult:
    """Simulate ``n_days`` sequential steps; deterministic given the seed."""
    if tests_series is None:
        tests = np.zeros(n_days)
    else:
        tests = (
            tests_series.values if isinstance(tests_series, TimeSeries) else np.asarray(tests_series)
        )
        if len(tests) < n_days:
            raise TestsSeriesTooShort(f"tests series has {len(tests)} days, need {n_days}")
    rng = np.random.default_rng(seed)
    sim = SimState.fresh(population, params, rng)

    if seed_ids is not None:
        seeds = np.asarray(seed_ids, dtype=np.int64)
    elif params.initial_exposed > 0:
        seeds = rng.choice(population.size, min(params.initial_exposed, population.size), replace=False)
    else:
        seeds = _EMPTY
    _infect(sim, seeds, 0)

    res = SimResult(
        seed=seed,
        new_diagnoses=np.zeros(n_days),
        new_deaths=np.zeros(n_days),
        num_critical=np.zeros(n_days),
        new_infections=np.zeros(n_days),
        infectious_count=np.zeros(n_days),
        state_counts=np.zeros((n_days, N_STATES), dtype=np.int64),
    )
    for day in range(n_days):
        s = step(sim, day, int(round(float(tests[day]))))
        res.new_diagnoses[day] = s.new_diagnoses
        res.new_deaths[day] = s.new_deaths
        res.num_critical[day] = s.num_critical
        res.new_infections[day] = s.new_infections + (len(seeds) if day == 0 else 0)
        res.infectious_count[day] = s.infectious_count
        res.state_counts[day] = s.state_counts
    return res


def run_ensemble(
    population: Population,
    params: DiseaseParams,
    n_days: int,
    tests_series,
    n_runs: int,
    base_seed: int = 0,
) -> list[SimResult]:
    """Independent seeded runs with seeds base_seed .. base_seed + n_runs - 1."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    return [
        run(population, params, n_days, tests_series, seed=base_seed + i)
        for i in range(n_runs)
    ]


def ensemble_mean(ensemble: list[SimResult], name: str) -> np.ndarray:
    return np.mean([r.series(name) for r in ensemble], axis=0)
