"""Disease states, age-stratified progression and transmission parameters."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidDistribution
from .population import N_AGE_BINS


class AgentState(enum.IntEnum):
    S = 0  # susceptible
    E = 1  # exposed, latent
    I = 2  # infectious presymptomatic
    A = 3  # asymptomatic infectious
    Y = 4  # symptomatic, severity not yet resolved
    M = 5  # mild
    H = 6  # severe / hospitalized
    C = 7  # critical / ICU
    R = 8  # recovered (absorbing within a run)
    D = 9  # dead (absorbing)


N_STATES = len(AgentState)

# states that can return a positive test
POSITIVE_CAPABLE = frozenset(
    {AgentState.E, AgentState.I, AgentState.A, AgentState.Y, AgentState.M,
     AgentState.H, AgentState.C}
)
# symptomatic states tested with elevated odds
SYMPTOMATIC = frozenset({AgentState.Y, AgentState.M, AgentState.H, AgentState.C})
# states that transmit; hospitalized and critical agents are isolated
TRANSMITTING = frozenset({AgentState.I, AgentState.A, AgentState.Y, AgentState.M})


@dataclass(frozen=True)
class AgeProgression:
    """Per-age-bin branch probabilities, each conditional on reaching the
    previous stage (symptoms | infected, severe | symptomatic, ...)."""

    p_sym: np.ndarray
    p_sev: np.ndarray
    p_crit: np.ndarray
    p_death: np.ndarray

    def __post_init__(self):
        for name in ("p_sym", "p_sev", "p_crit", "p_death"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (N_AGE_BINS,) or np.any(v < 0) or np.any(v > 1):
                raise InvalidDistribution(f"{name} must be 10 probabilities in [0, 1]")
            object.__setattr__(self, name, v)

    def validate_monotone(self) -> None:
        for name in ("p_sev", "p_crit", "p_death"):
            v = getattr(self, name)
            if np.any(np.diff(v) < 0):
                raise InvalidDistribution(f"{name} must be non-decreasing in age")


def default_age_progression() -> AgeProgression:
    """COVID-like age gradients; steeply rising severity with age."""
    return AgeProgression(
        p_sym=np.array([0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.90]),
        p_sev=np.array([0.001, 0.003, 0.012, 0.032, 0.049, 0.102, 0.166, 0.243, 0.273, 0.273]),
        p_crit=np.array([0.05, 0.05, 0.05, 0.05, 0.063, 0.122, 0.274, 0.432, 0.709, 0.709]),
        p_death=np.array([0.33, 0.33, 0.33, 0.33, 0.33, 0.33, 0.40, 0.50, 0.60, 0.60]),
    )


@dataclass(frozen=True)
class Duration:
    """Lognormal stage duration in days; sigma 0 collapses to the mean."""

    mean: float
    sigma: float = 0.0

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.sigma <= 0:
            days = np.full(n, np.floor(self.mean + 0.5))
        else:
            m2 = self.mean**2
            mu = np.log(m2 / np.sqrt(m2 + self.sigma**2))
            s = np.sqrt(np.log(1.0 + self.sigma**2 / m2))
            days = np.rint(rng.lognormal(mu, s, n))
        return np.maximum(days, 1).astype(np.int32)


@dataclass(frozen=True)
class StageDurations:
    latent: Duration = Duration(4.5, 1.5)           # E -> infectious
    presymptomatic: Duration = Duration(1.1, 0.9)   # I -> Y
    symptom_to_resolution: Duration = Duration(6.6, 4.9)  # Y -> M or H
    severe_to_critical: Duration = Duration(1.5, 2.0)     # H -> C
    critical_to_death: Duration = Duration(10.7, 4.8)     # C -> D
    mild_recovery: Duration = Duration(8.0, 2.0)          # A/M -> R
    severe_recovery: Duration = Duration(18.0, 6.3)       # H/C -> R

    def deterministic(self) -> "StageDurations":
        return StageDurations(
            **{k: Duration(getattr(self, k).mean, 0.0) for k in self.__dataclass_fields__}
        )


@dataclass(frozen=True)
class DiseaseParams:
    """Transmission and testing parameters for one simulation."""

    beta: float = 0.016
    beta_schedule: tuple[tuple[int, float], ...] = ()
    test_odds: float = 10.0  # relative chance a symptomatic agent gets a test
    initial_exposed: int = 0
    durations: StageDurations = field(default_factory=StageDurations)
    progression: AgeProgression = field(default_factory=default_age_progression)
    quarantine_days: int = 14

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.test_odds < 1:
            raise ValueError("test_odds must be >= 1")
        days = [d for d, _ in self.beta_schedule]
        if any(d2 <= d1 for d1, d2 in zip(days, days[1:])):
            raise ValueError("beta_schedule days must be strictly increasing")
        if any(m <= 0 for _, m in self.beta_schedule):
            raise ValueError("beta_schedule multipliers must be positive")

    def with_schedule(self, schedule) -> "DiseaseParams":
        from dataclasses import replace

        return replace(self, beta_schedule=tuple((int(d), float(m)) for d, m in schedule))


def apply_beta_schedule(params: DiseaseParams, day: int) -> float:
    """Multiplicative composition of all changes effective on or before ``day``."""
    mult = 1.0
    for d, m in params.beta_schedule:
        if d <= day:
            mult *= m
    return mult


def mean_infectious_period(params: DiseaseParams, age_bin_counts: np.ndarray) -> float:
    """Expected days spent in the transmitting states {I, A, Y, M}, averaged
    over the given age mix; used as the f of the reproduction-number ratio."""
    w = np.asarray(age_bin_counts, dtype=float)
    w = w / w.sum()
    d = params.durations
    pr = params.progression
    per_bin = pr.p_sym * (
        d.presymptomatic.mean
        + d.symptom_to_resolution.mean
        + (1.0 - pr.p_sev) * d.mild_recovery.mean
    ) + (1.0 - pr.p_sym) * d.mild_recovery.mean
    return float(per_bin @ w)
