import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from epikit.calibrate import (
    Dimension,
    MisfitSpec,
    ParzenDensity,
    SearchSpace,
    TpeConfig,
    TrialStore,
    expected_improvement,
    misfit,
    optimize,
    tpe_split,
    tpe_suggest,
)
from epikit.errors import EmptyPoints, StoreTooSmall, WindowMismatch, ZeroDenominator

SPACE_2D = SearchSpace(
    (Dimension("x", "continuous", -10, 10), Dimension("y", "continuous", -10, 10))
)


def filled_store(losses):
    store = TrialStore()
    for i, loss in enumerate(losses):
        store.append(np.array([float(i)]), loss)
    return store


class TestTrialStore:
    def test_best_tracking(self):
        store = filled_store([3.0, 1.0, 2.0])
        assert store.best_index == 1
        assert store.best_loss == 1.0
        np.testing.assert_array_equal(store.best_so_far(), [3.0, 1.0, 1.0])


class TestTpeSplit:
    def test_ten_trials_quarter(self):
        low, high = tpe_split(filled_store(list(range(10))), 0.25)
        assert len(low) == 3 and len(high) == 7
        assert sorted(low) == [0, 1, 2]

    def test_minimum_one_low_trial(self):
        low, high = tpe_split(filled_store([5.0, 1.0]), 0.1)
        assert len(low) == 1 and list(low) == [1]

    def test_ties_broken_by_insertion_order(self):
        low, _ = tpe_split(filled_store([7.0] * 8), 0.25)
        assert sorted(low) == [0, 1]

    def test_too_small(self):
        with pytest.raises(StoreTooSmall):
            tpe_split(filled_store([1.0]), 0.25)

    @settings(max_examples=80, deadline=None)
    @given(
        st.integers(min_value=2, max_value=400),
        st.floats(min_value=0.01, max_value=0.99),
    )
    def test_cardinality_rule(self, k, gamma):
        losses = list(np.random.default_rng(k).uniform(size=k))
        low, high = tpe_split(filled_store(losses), gamma)
        assert len(low) == max(1, math.ceil(gamma * k))
        assert len(low) + len(high) == k


class TestParzenDensity:
    def test_integral_is_one(self):
        for pts in ([5.0], [2.0, 2.1, 7.0], [0.0, 0.0, 0.0], list(np.linspace(1, 9, 12))):
            d = ParzenDensity(pts, 0.0, 10.0)
            val, err = quad(lambda x: float(d.pdf(x)[0]), 0.0, 10.0, limit=300)
            assert abs(val - 1.0) < 1e-6

    def test_single_midpoint_symmetric(self):
        d = ParzenDensity([5.0], 0.0, 10.0)
        assert d.pdf([4.0])[0] == pytest.approx(d.pdf([6.0])[0])

    def test_positive_floor_everywhere(self):
        d = ParzenDensity([0.0], 0.0, 10.0)
        xs = np.linspace(0, 10, 101)
        assert np.all(d.pdf(xs) >= 1.0 / (2 * 10.0 * 10.0))

    def test_samples_respect_bounds(self):
        d = ParzenDensity([0.0, 0.0, 0.01], 0.0, 10.0)
        s = d.sample(np.random.default_rng(0), 100_000)
        assert s.min() >= 0.0 and s.max() <= 10.0

    def test_zero_outside_bounds(self):
        d = ParzenDensity([5.0], 0.0, 10.0)
        assert d.pdf([-0.5])[0] == 0.0 and d.pdf([10.5])[0] == 0.0

    def test_empty_points_rejected(self):
        with pytest.raises(EmptyPoints):
            ParzenDensity([], 0.0, 1.0)


class TestExpectedImprovement:
    def test_fixed_points(self):
        assert expected_improvement(1.0, 1.0, 0.25) == pytest.approx(1.0)
        assert expected_improvement(1.0, 1e-12, 0.25) == pytest.approx(4.0, abs=1e-6)
        assert expected_improvement(1e-12, 1.0, 0.25) == pytest.approx(0.0, abs=1e-6)

    @settings(max_examples=80, deadline=None)
    @given(
        st.lists(
            st.tuples(
                st.floats(min_value=1e-6, max_value=1e3),
                st.floats(min_value=1e-6, max_value=1e3),
            ),
            min_size=2,
            max_size=30,
        ),
        st.floats(min_value=0.05, max_value=0.95),
    )
    def test_ordering_matches_density_ratio(self, pairs, gamma):
        l = np.array([a for a, _ in pairs])
        g = np.array([b for _, b in pairs])
        ei = expected_improvement(l, g, gamma)
        ratio = l / g
        assert np.array_equal(np.argsort(ei, kind="stable"), np.argsort(ratio, kind="stable"))


class TestTpeSuggest:
    def test_uniform_during_startup(self):
        cfg = TpeConfig(seed=0)
        rng = np.random.default_rng(0)
        q = tpe_suggest(TrialStore(), SPACE_2D, cfg, rng)
        rng2 = np.random.default_rng(0)
        np.testing.assert_array_equal(q, SPACE_2D.sample_uniform(rng2))

    def test_deterministic_on_frozen_store(self):
        store = filled_store(list(np.random.default_rng(1).uniform(size=20)))
        space = SearchSpace((Dimension("x", "continuous", 0, 19),))
        cfg = TpeConfig(seed=0)
        a = tpe_suggest(store, space, cfg, np.random.default_rng(42))
        b = tpe_suggest(store, space, cfg, np.random.default_rng(42))
        np.testing.assert_array_equal(a, b)

    def test_integer_dimension_rounded(self):
        space = SearchSpace((Dimension("n", "integer", 0, 30),))
        store = TrialStore()
        rng_fill = np.random.default_rng(2)
        for _ in range(25):
            q = space.sample_uniform(rng_fill)
            store.append(q, (q[0] - 11) ** 2)
        q = tpe_suggest(store, space, TpeConfig(seed=0), np.random.default_rng(3))
        assert q[0] == int(q[0])
        assert 0 <= q[0] <= 30

    def test_bounds_compliance_bulk(self):
        # module invariant, sampled more heavily in the acceptance suite
        store = filled_store(list(np.random.default_rng(4).uniform(size=40)))
        space = SearchSpace((Dimension("x", "continuous", 0, 39),))
        rng = np.random.default_rng(5)
        cfg = TpeConfig(seed=0)
        for _ in range(500):
            q = tpe_suggest(store, space, cfg, rng)
            assert 0.0 <= q[0] <= 39.0


class TestOptimize:
    def test_quadratic_recovery(self):
        space = SearchSpace((Dimension("x", "continuous", 0, 10),))
        bests = []
        for seed in range(20):
            store = optimize(lambda q: (q[0] - 3) ** 2, space, TpeConfig(seed=seed, max_iter=90))
            bests.append(abs(store.best_params[0] - 3.0))
        assert np.median(bests) < 0.2

    def test_best_so_far_non_increasing(self):
        store = optimize(
            lambda q: (q[0] - 3) ** 2 + (q[1] + 1) ** 2,
            SPACE_2D,
            TpeConfig(seed=1, max_iter=60),
        )
        assert np.all(np.diff(store.best_so_far()) <= 0)

    def test_constant_objective(self):
        store = optimize(lambda q: 7.5, SPACE_2D, TpeConfig(seed=2, max_iter=30))
        assert store.best_loss == 7.5

    def test_objective_failures_become_inf(self):
        def explosive(q):
            if q[0] > 0:
                raise RuntimeError("boom")
            return float(q[0])

        store = optimize(explosive, SPACE_2D, TpeConfig(seed=3, max_iter=30))
        assert np.isinf(np.max(store.losses))
        assert np.isfinite(store.best_loss)


class TestMisfit:
    def test_identity_is_zero(self):
        obs = {"new_diagnoses": np.array([5.0, 10.0, 20.0])}
        spec = MisfitSpec(statistics=("new_diagnoses",), window=(0, 2))
        assert misfit(obs, obs, spec) == 0.0

    def test_hand_arithmetic(self):
        obs = {"new_diagnoses": np.array([10.0, 20.0])}
        sim = {"new_diagnoses": np.array([12.0, 16.0])}
        spec = MisfitSpec(statistics=("new_diagnoses",), window=(0, 1))
        assert misfit(obs, sim, spec) == pytest.approx(0.3)

    def test_statistics_are_additive(self):
        obs = {
            "new_diagnoses": np.array([10.0, 20.0]),
            "new_deaths": np.array([10.0, 20.0]),
        }
        sim = {
            "new_diagnoses": np.array([12.0, 16.0]),  # J = 0.3
            "new_deaths": np.array([5.0, 15.0]),  # J = 0.5
        }
        spec = MisfitSpec(statistics=("new_diagnoses", "new_deaths"), window=(0, 1))
        assert misfit(obs, sim, spec) == pytest.approx(0.8)

    def test_weights_scale_terms(self):
        obs = {"new_diagnoses": np.array([10.0, 20.0])}
        sim = {"new_diagnoses": np.array([12.0, 16.0])}
        spec = MisfitSpec(statistics=("new_diagnoses",), window=(0, 1), weights=(2.0,))
        assert misfit(obs, sim, spec) == pytest.approx(0.6)

    def test_window_mismatch(self):
        obs = {"new_diagnoses": np.array([10.0])}
        spec = MisfitSpec(statistics=("new_diagnoses",), window=(0, 5))
        with pytest.raises(WindowMismatch):
            misfit(obs, obs, spec)

    def test_zero_normalizer_rejected(self):
        obs = {"new_diagnoses": np.zeros(3)}
        spec = MisfitSpec(statistics=("new_diagnoses",), window=(0, 2))
        with pytest.raises(ZeroDenominator):
            misfit(obs, obs, spec)
