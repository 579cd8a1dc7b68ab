"""Regenerate the bundled regional dataset snapshots.

The CSVs are synthetic stand-ins for volatile web-portal data: each region
gets a daily testing series with that region's published day-of-week volume
fractions, plus diagnoses, deaths and ICU occupancy derived from it.  The
numbers are generated, not scraped, so the files are stable and small.

Run from the repository root:  python3 tools/make_fixtures.py
"""

from __future__ import annotations

import datetime as dt
import json
from pathlib import Path

import numpy as np
import pandas as pd

OUT = Path(__file__).resolve().parents[1] / "src" / "epikit" / "fixtures"

# Monday-first day-of-week fractions of weekly test volume
FRACTIONS = {
    "ny": [0.113654, 0.127697, 0.134512, 0.155779, 0.162017, 0.163702, 0.142640],
    "uk": [0.125222, 0.135905, 0.159167, 0.166208, 0.157837, 0.131992, 0.123668],
    "novosibirsk": [0.064055, 0.176845, 0.148333, 0.161924, 0.162173, 0.183951, 0.075146],
}

START = dt.date(2020, 3, 2)  # a Monday, so weeks align with the fraction rows
N_WEEKS = 26


def _weekly_trend(lo: float, hi: float, rng) -> np.ndarray:
    """Smooth ramp between volumes, constant within each week."""
    t = np.linspace(-3, 3, N_WEEKS)
    level = lo + (hi - lo) / (1.0 + np.exp(-t))
    return level * (1.0 + rng.normal(0, 0.01, N_WEEKS))


def _tests(region: str, lo: float, hi: float, rng) -> np.ndarray:
    frac = np.array(FRACTIONS[region])
    weekly = _weekly_trend(lo, hi, rng)
    days = weekly[:, None] * 7.0 * frac[None, :]
    days = days * (1.0 + rng.normal(0, 0.004, days.shape))
    return np.round(days.ravel())


def _epidemic_wave(n: int, peak_day: int, width: float, peak: float, rng) -> np.ndarray:
    t = np.arange(n)
    base = peak * np.exp(-0.5 * ((t - peak_day) / width) ** 2)
    return base


def _sarima_like_diagnoses(n: int, rng) -> np.ndarray:
    """Seasonally integrated process with autocorrelated shocks: the natural
    habitat of a (p,d,q)(P,1,Q)_7 model."""
    frac = np.array(FRACTIONS["novosibirsk"])
    season = 7.0 * frac - 1.0  # zero-mean weekly shape
    e = rng.normal(0, 6.0, n)
    u = np.zeros(n)
    for t in range(n):
        u[t] = e[t] + (0.7 * u[t - 1] if t >= 1 else 0.0) + (0.35 * e[t - 7] if t >= 7 else 0.0)
    t = np.arange(n)
    trend = 120 + 180 * np.exp(-0.5 * ((t - 110) / 45.0) ** 2) + 0.25 * t
    x = trend * (1.0 + 0.22 * season[t % 7]) + u
    return np.round(np.maximum(x, 1.0))


def _derive(tests: np.ndarray, wave: np.ndarray, rng) -> pd.DataFrame:
    n = len(tests)
    positivity = np.clip(wave / wave.max() * 0.12 + 0.01, 0.005, 0.5)
    diagnoses = np.round(tests * positivity * (1.0 + rng.normal(0, 0.05, n)))
    deaths = np.round(np.roll(diagnoses, 14) * 0.015 * (1.0 + rng.normal(0, 0.2, n)))
    deaths[:14] = np.round(diagnoses[:14] * 0.005)
    critical = np.round(
        pd.Series(diagnoses).rolling(10, min_periods=1).mean().to_numpy() * 0.04
    )
    return pd.DataFrame(
        {
            "date": [START + dt.timedelta(days=i) for i in range(n)],
            "new_tests": tests,
            "new_diagnoses": np.maximum(diagnoses, 0),
            "new_deaths": np.maximum(deaths, 0),
            "num_critical": np.maximum(critical, 0),
        }
    )


AGE_HISTOGRAMS = {
    "ny": [0.11, 0.12, 0.14, 0.14, 0.12, 0.13, 0.11, 0.07, 0.04, 0.02],
    "uk": [0.11, 0.12, 0.13, 0.13, 0.12, 0.13, 0.11, 0.08, 0.05, 0.02],
    "novosibirsk": [0.12, 0.11, 0.13, 0.16, 0.13, 0.12, 0.11, 0.07, 0.04, 0.01],
}

REAL_POPULATIONS = {"ny": 19_450_000, "uk": 66_800_000, "novosibirsk": 2_800_000}


def _config(region: str, sim_size: int) -> dict:
    return {
        "region": region,
        "dataset": f"{region}.csv",
        "population_size": sim_size,
        "scale_factor": round(REAL_POPULATIONS[region] / sim_size, 2),
        "age_distribution": AGE_HISTOGRAMS[region],
        "mean_household_size": 3.0,
        "beta": 0.016,
        "test_odds": 10.0,
        "initial_exposed": 10,
        "seed": 0,
    }


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    n = N_WEEKS * 7

    rng = np.random.default_rng(20)
    tests = _tests("ny", 20_000, 60_000, rng)
    wave = _epidemic_wave(n, 60, 30.0, 1.0, rng)
    _derive(tests, wave, rng).to_csv(OUT / "ny.csv", index=False)

    rng = np.random.default_rng(21)
    tests = _tests("uk", 15_000, 90_000, rng)
    wave = _epidemic_wave(n, 90, 40.0, 1.0, rng)
    _derive(tests, wave, rng).to_csv(OUT / "uk.csv", index=False)

    rng = np.random.default_rng(22)
    tests = _tests("novosibirsk", 4_000, 9_000, rng)
    wave = _epidemic_wave(n, 110, 45.0, 1.0, rng)
    df = _derive(tests, wave, rng)
    df["new_diagnoses"] = _sarima_like_diagnoses(n, rng)
    df.to_csv(OUT / "novosibirsk.csv", index=False)

    for region, sim_size in (("ny", 50_000), ("uk", 50_000), ("novosibirsk", 20_000)):
        cfg = _config(region, sim_size)
        (OUT / f"{region}.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
