import numpy as np
import pytest

from epikit.abm import (
    AgentState,
    AgeProgression,
    Csr,
    DiseaseParams,
    Duration,
    LayerConfig,
    N_STATES,
    Population,
    StageDurations,
    apply_beta_schedule,
    default_age_progression,
    mean_infectious_period,
    run,
    run_ensemble,
    synthesize_population,
)
from epikit import errors
from epikit.errors import InvalidDistribution

from abm_oracle import CODES, enumerate_distribution, moments

AGE = np.array([0.12, 0.13, 0.13, 0.13, 0.12, 0.12, 0.10, 0.08, 0.05, 0.02])


def small_pop(seed=0, size=2000, **kwargs):
    return synthesize_population(size, AGE, seed=seed, **kwargs)


def household_pop(n=3):
    """A single household clique with no other layers."""
    indices = np.concatenate(
        [[j for j in range(n) if j != i] for i in range(n)]
    ).astype(np.int32)
    empty = Csr(indptr=np.zeros(n + 1, dtype=np.int64), indices=np.empty(0, np.int32))
    return Population(
        size=n,
        ages=np.full(n, 35),
        age_bins=np.full(n, 3, dtype=np.int8),
        household_id=np.zeros(n, dtype=np.int32),
        household=Csr(indptr=np.arange(n + 1, dtype=np.int64) * (n - 1), indices=indices),
        school=empty,
        work=empty,
        layers=LayerConfig(community_contacts=0.0),
        seed=0,
    )


def oracle_params():
    flat = lambda p: np.full(10, p)
    return DiseaseParams(
        beta=0.2,  # household hit probability 0.2 * 3.0 = 0.6
        initial_exposed=0,
        durations=StageDurations(
            latent=Duration(1, 0),
            presymptomatic=Duration(1, 0),
            symptom_to_resolution=Duration(2, 0),
            severe_to_critical=Duration(1, 0),
            critical_to_death=Duration(2, 0),
            mild_recovery=Duration(2, 0),
            severe_recovery=Duration(3, 0),
        ),
        progression=AgeProgression(
            p_sym=flat(0.7), p_sev=flat(0.3), p_crit=flat(0.5), p_death=flat(0.5)
        ),
    )


class TestPopulation:
    def test_structure(self):
        pop = small_pop()
        assert pop.size == 2000
        assert pop.ages.min() >= 0 and pop.ages.max() <= 99
        assert np.all(pop.age_bins == np.minimum(pop.ages // 10, 9))
        assert abs(pop.mean_household_size() - 3.0) < 0.25

    def test_households_are_cliques(self):
        pop = small_pop()
        hid = pop.household_id
        for agent in [0, 17, 500, 1999]:
            nbrs = pop.household.indices[
                pop.household.indptr[agent] : pop.household.indptr[agent + 1]
            ]
            members = np.flatnonzero(hid == hid[agent])
            assert sorted(nbrs) == sorted(m for m in members if m != agent)

    def test_school_and_work_respect_age_ranges(self):
        pop = small_pop()
        for csr, lo, hi in ((pop.school, 6, 21), (pop.work, 22, 65)):
            touched = np.flatnonzero(np.diff(csr.indptr) > 0)
            assert np.all((pop.ages[touched] >= lo) & (pop.ages[touched] <= hi))

    def test_byte_identical_for_same_seed(self):
        a, b = small_pop(seed=3), small_pop(seed=3)
        np.testing.assert_array_equal(a.ages, b.ages)
        np.testing.assert_array_equal(a.household.indices, b.household.indices)
        np.testing.assert_array_equal(a.work.indices, b.work.indices)

    def test_age_distribution_validated(self):
        with pytest.raises(InvalidDistribution):
            synthesize_population(1000, np.full(10, 0.2))
        with pytest.raises(InvalidDistribution):
            synthesize_population(50, AGE)


class TestDiseaseParams:
    def test_beta_schedule_composes_multiplicatively(self):
        p = DiseaseParams(beta=0.02, beta_schedule=((10, 0.5), (20, 0.4)))
        assert apply_beta_schedule(p, 9) == 1.0
        assert apply_beta_schedule(p, 10) == 0.5  # boundary day inclusive
        assert apply_beta_schedule(p, 25) == pytest.approx(0.2)

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            DiseaseParams(beta_schedule=((5, 1.0), (5, 0.5)))
        with pytest.raises(ValueError):
            DiseaseParams(beta_schedule=((5, -1.0),))

    def test_deterministic_duration_rounds_half_up(self):
        rng = np.random.default_rng(0)
        assert Duration(4.5, 0.0).sample(rng, 3).tolist() == [5, 5, 5]
        assert Duration(0.2, 0.0).sample(rng, 1).tolist() == [1]

    def test_stochastic_duration_mean(self):
        rng = np.random.default_rng(1)
        days = Duration(8.0, 2.0).sample(rng, 20000)
        assert days.min() >= 1
        assert abs(days.mean() - 8.0) < 0.15

    def test_mean_infectious_period_hand_value(self):
        flat = lambda p: np.full(10, p)
        params = DiseaseParams(
            durations=StageDurations(
                presymptomatic=Duration(1, 0),
                symptom_to_resolution=Duration(2, 0),
                mild_recovery=Duration(4, 0),
            ),
            progression=AgeProgression(
                p_sym=flat(0.5), p_sev=flat(0.2), p_crit=flat(0.1), p_death=flat(0.1)
            ),
        )
        # 0.5*(1 + 2 + 0.8*4) + 0.5*4 = 5.1
        f = mean_infectious_period(params, np.full(10, 100))
        assert f == pytest.approx(5.1)


class TestRun:
    def test_conservation_every_day(self):
        pop = small_pop()
        res = run(pop, DiseaseParams(beta=0.02, initial_exposed=5), 60,
                  np.full(60, 50.0), seed=1)
        assert np.all(res.state_counts.sum(axis=1) == pop.size)

    def test_byte_identical_reruns(self):
        pop = small_pop()
        params = DiseaseParams(beta=0.02, initial_exposed=5)
        a = run(pop, params, 40, np.full(40, 50.0), seed=9)
        b = run(pop, params, 40, np.full(40, 50.0), seed=9)
        for name in ("new_diagnoses", "new_deaths", "num_critical",
                     "new_infections", "infectious_count"):
            np.testing.assert_array_equal(a.series(name), b.series(name))
        np.testing.assert_array_equal(a.state_counts, b.state_counts)

    def test_zero_beta_never_transmits(self):
        pop = small_pop()
        res = run(pop, DiseaseParams(beta=0.0, initial_exposed=10), 40, None, seed=2)
        assert res.new_infections[0] == 10
        assert res.new_infections[1:].sum() == 0

    def test_seed_cohort_counted_on_day_zero(self):
        pop = small_pop()
        res = run(pop, DiseaseParams(beta=0.01, initial_exposed=7), 5, None, seed=3)
        assert res.new_infections[0] == 7
        assert res.state_counts[0, AgentState.E] == 7

    def test_deaths_accumulate_into_final_count(self):
        pop = small_pop(size=5000)
        res = run(pop, DiseaseParams(beta=0.03, initial_exposed=20), 120,
                  np.full(120, 100.0), seed=4)
        assert res.new_deaths.sum() == res.state_counts[-1, AgentState.D]

    def test_tests_series_must_cover_run(self):
        pop = small_pop()
        with pytest.raises(errors.TestsSeriesTooShort):
            run(pop, DiseaseParams(beta=0.02), 50, np.full(30, 10.0), seed=0)

    def test_more_tests_diagnose_more(self):
        pop = small_pop(size=5000)
        params = DiseaseParams(beta=0.025, initial_exposed=20)
        few = run(pop, params, 60, np.full(60, 20.0), seed=5)
        many = run(pop, params, 60, np.full(60, 500.0), seed=5)
        assert many.new_diagnoses.sum() > few.new_diagnoses.sum()

    def test_ensemble_is_reproducible_and_distinct(self):
        pop = small_pop()
        params = DiseaseParams(beta=0.02, initial_exposed=10)
        ens = run_ensemble(pop, params, 30, None, 3, base_seed=7)
        again = run_ensemble(pop, params, 30, None, 3, base_seed=7)
        for a, b in zip(ens, again):
            np.testing.assert_array_equal(a.state_counts, b.state_counts)
        assert not np.array_equal(ens[0].state_counts, ens[1].state_counts)


class TestEnumerationOracle:
    def test_three_agent_distribution_matches(self):
        # scaled-down version of the acceptance check: 2000 runs, 5 sigma
        n_runs, n_days, sigmas = 2000, 5, 5.0
        pop = household_pop(3)
        params = oracle_params()
        exact_mean, exact_var = moments(
            enumerate_distribution(3, p_infect=0.6, n_days=n_days)
        )
        counts = np.zeros((n_days, N_STATES))
        for i in range(n_runs):
            res = run(pop, params, n_days, None, seed=i, seed_ids=np.array([0]))
            counts += res.state_counts
        observed = counts / n_runs
        for day in range(n_days):
            for s in range(N_STATES):
                tol = sigmas * np.sqrt(exact_var[day, s] / n_runs)
                assert abs(observed[day, s] - exact_mean[day, s]) <= tol + 1e-12, (
                    f"day {day} state {CODES[s]}: "
                    f"observed {observed[day, s]:.4f} expected {exact_mean[day, s]:.4f}"
                )

    def test_oracle_probabilities_sum_to_one(self):
        dists = enumerate_distribution(3, p_infect=0.6, n_days=5)
        for dist in dists:
            assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)
