"""Stochastic agent-based epidemic simulator."""

from .disease import (
    N_STATES,
    POSITIVE_CAPABLE,
    SYMPTOMATIC,
    TRANSMITTING,
    AgentState,
    AgeProgression,
    DiseaseParams,
    Duration,
    StageDurations,
    apply_beta_schedule,
    default_age_progression,
    mean_infectious_period,
)
from .dynamics import (
    DaySummary,
    SimResult,
    SimState,
    ensemble_mean,
    run,
    run_ensemble,
    step,
)
from .population import (
    N_AGE_BINS,
    SCHOOL_AGES,
    WORK_AGES,
    Csr,
    LayerConfig,
    LayerKind,
    Population,
    synthesize_population,
)

__all__ = [
    "AgentState",
    "AgeProgression",
    "Csr",
    "DaySummary",
    "DiseaseParams",
    "Duration",
    "LayerConfig",
    "LayerKind",
    "N_AGE_BINS",
    "N_STATES",
    "POSITIVE_CAPABLE",
    "Population",
    "SCHOOL_AGES",
    "SYMPTOMATIC",
    "SimResult",
    "SimState",
    "StageDurations",
    "TRANSMITTING",
    "WORK_AGES",
    "apply_beta_schedule",
    "default_age_progression",
    "ensemble_mean",
    "mean_infectious_period",
    "run",
    "run_ensemble",
    "step",
    "synthesize_population",
]
