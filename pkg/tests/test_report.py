import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epikit.abm import DiseaseParams, SimResult, run_ensemble, synthesize_population
from epikit.errors import EnsembleTooSmall, NonPositiveValue
from epikit.report import (
    extend_tests,
    project,
    quantile_bands,
    reproduction_number,
)
from epikit.timeseries import TimeSeries
import datetime as dt

AGE = np.array([0.12, 0.13, 0.13, 0.13, 0.12, 0.12, 0.10, 0.08, 0.05, 0.02])
START = dt.date(2020, 3, 2)


def fake_result(new_infections, infectious_count):
    n = len(new_infections)
    return SimResult(
        seed=0,
        new_diagnoses=np.zeros(n),
        new_deaths=np.zeros(n),
        num_critical=np.zeros(n),
        new_infections=np.asarray(new_infections, dtype=float),
        infectious_count=np.asarray(infectious_count, dtype=float),
        state_counts=np.zeros((n, 10), dtype=np.int64),
    )


class TestReproductionNumber:
    def test_constant_incidence_gives_one(self):
        # 10 new infections/day against 70 infectious with f=7: R = 10*7/70 = 1
        res = fake_result([10.0] * 30, [70.0] * 30)
        r = reproduction_number(res, f=7.0)
        np.testing.assert_allclose(r.values, 1.0)

    def test_hand_value_unsmoothed(self):
        res = fake_result([4.0, 6.0], [8.0, 24.0])
        r = reproduction_number(res, f=6.0, smooth_window=1)
        np.testing.assert_allclose(r.values, [3.0, 1.5])

    def test_undefined_when_no_infectious(self):
        res = fake_result([0.0, 5.0, 0.0], [0.0, 10.0, 0.0])
        r = reproduction_number(res, f=5.0, smooth_window=1)
        assert r.defined().tolist() == [False, True, False]

    def test_smoothing_skips_undefined_days(self):
        res = fake_result([2.0, 0.0, 2.0], [4.0, 0.0, 2.0])
        r = reproduction_number(res, f=2.0, smooth_window=3)
        # raw = [1.0, nan, 2.0]; centered window at edges shrinks to the point
        assert r.values[0] == pytest.approx(1.0)
        assert np.isnan(r.values[1])
        assert r.values[2] == pytest.approx(2.0)

    def test_zero_when_no_transmission(self):
        pop = synthesize_population(2000, AGE, seed=0)
        res = run_ensemble(pop, DiseaseParams(beta=0.0, initial_exposed=10),
                           40, None, 1, base_seed=0)[0]
        r = reproduction_number(res, f=7.0)
        defined = r.defined()
        assert defined[1:].any()
        assert np.all(r.values[1:][defined[1:]] == 0.0)

    def test_rejects_nonpositive_f(self):
        with pytest.raises(NonPositiveValue):
            reproduction_number(fake_result([1.0], [1.0]), f=0.0)


class TestQuantileBands:
    def test_hand_quantiles(self):
        ens = [fake_result([v], [1.0]) for v in (0.0, 10.0, 20.0, 30.0, 40.0)]
        band = quantile_bands(ens, "new_infections")
        assert band.q10[0] == pytest.approx(4.0)
        assert band.q50[0] == pytest.approx(20.0)
        assert band.q90[0] == pytest.approx(36.0)

    def test_needs_at_least_two_runs(self):
        with pytest.raises(EnsembleTooSmall):
            quantile_bands([fake_result([1.0], [1.0])], "new_infections")

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(
            st.lists(st.floats(min_value=0, max_value=1e4), min_size=4, max_size=4),
            min_size=2,
            max_size=12,
        )
    )
    def test_band_ordering(self, rows):
        ens = [fake_result(r, [1.0] * 4) for r in rows]
        band = quantile_bands(ens, "new_infections")
        assert np.all(band.q10 <= band.q50)
        assert np.all(band.q50 <= band.q90)


class TestExtendTests:
    def test_zero_horizon_returns_history(self):
        ts = TimeSeries(START, np.arange(20.0) + 1)
        np.testing.assert_array_equal(extend_tests(ts, 0), ts.values)

    def test_fallback_repeats_last_week(self):
        # far too short for model selection: falls back to weekly hold
        ts = TimeSeries(START, np.arange(14.0) + 1)
        out = extend_tests(ts, 10)
        assert len(out) == 24
        np.testing.assert_allclose(out[14:21], ts.values[7:14])
        np.testing.assert_allclose(out[21:24], ts.values[7:10])

    def test_forecast_is_non_negative(self):
        rng = np.random.default_rng(0)
        ts = TimeSeries(START, np.maximum(100 - 2 * np.arange(90.0), 0.0) + rng.uniform(0, 1, 90))
        out = extend_tests(ts, 30)
        assert np.all(out >= 0)


@pytest.fixture(scope="module")
def projection():
    pop = synthesize_population(2000, AGE, seed=1)
    params = DiseaseParams(beta=0.02, initial_exposed=10)
    tests = TimeSeries(START, np.full(40, 50.0))
    return project(params, pop, tests, horizon=7, n_runs=3, seed=4)


class TestProject:

    def test_shapes_cover_history_plus_horizon(self, projection):
        assert projection.history_days == 40
        assert len(projection.tests) == 47
        for band in projection.bands.values():
            assert len(band.q50) == 47
        assert len(projection.repro.values) == 47

    def test_projection_is_deterministic(self, projection):
        pop = synthesize_population(2000, AGE, seed=1)
        params = DiseaseParams(beta=0.02, initial_exposed=10)
        tests = TimeSeries(START, np.full(40, 50.0))
        again = project(params, pop, tests, horizon=7, n_runs=3, seed=4)
        for stat, band in projection.bands.items():
            np.testing.assert_array_equal(band.q50, again.bands[stat].q50)
        np.testing.assert_array_equal(
            np.nan_to_num(projection.repro.values), np.nan_to_num(again.repro.values)
        )

    def test_bands_cover_all_statistics(self, projection):
        assert set(projection.bands) == {
            "new_diagnoses", "new_deaths", "num_critical", "new_infections"
        }
