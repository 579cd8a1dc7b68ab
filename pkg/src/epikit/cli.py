"""Command-line entry point wiring the full pipeline.

Exit codes: 0 success, 1 usage error, 2 data/config error, 3 numerical
failure.  Every run writes a manifest recording the config hash, seeds and
library versions, which is enough to re-execute the run exactly.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .abm import DiseaseParams, run_ensemble
from .calibrate import calibrate_windows
from .config import RegionConfig, load_config, normalized_json
from .errors import DataError, EpikitError, NumericalError
from .forecast import compare_models
from .preprocess import hp_filter, smooth
from .report import project, quantile_bands
from .timeseries import Indicator, TimeSeries, load_csv
from .tsa import acf, adf_test, weekly_fractions

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the contract is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    p = _Parser(prog="epikit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"epikit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="region config JSON")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--threads", type=int, default=1, help="worker cap (reserved)")

    sp = sub.add_parser("validate-config", help="check and normalize a region config")
    sp.add_argument("--config", required=True)

    sp = sub.add_parser("analyze", help="seasonality and trend diagnostics")
    common(sp)
    sp.add_argument("--max-lag", type=int, default=28)

    sp = sub.add_parser("forecast", help="cross-validated model comparison and forecast")
    common(sp)
    sp.add_argument("--indicator", default="new_diagnoses",
                    choices=[i.value for i in Indicator])
    sp.add_argument("--horizon", type=int, default=14)

    sp = sub.add_parser("simulate", help="run a seeded simulation ensemble")
    common(sp)
    sp.add_argument("--days", type=int, default=90)
    sp.add_argument("--runs", type=int, default=10)
    sp.add_argument("--params", help="calibrated parameters JSON from `calibrate`")

    sp = sub.add_parser("calibrate", help="recover transmission parameters per window")
    common(sp)
    sp.add_argument("--windows", type=int, default=None)
    sp.add_argument("--trials", type=int, default=None, help="trials per window")
    sp.add_argument("--ensemble", type=int, default=None)

    sp = sub.add_parser("project", help="simulate past the data with forecast test volumes")
    common(sp)
    sp.add_argument("--horizon", type=int, default=30)
    sp.add_argument("--runs", type=int, default=10)
    sp.add_argument("--params", help="calibrated parameters JSON from `calibrate`")

    return p


# ------------------------------------------------------------------ plumbing


def _load_region(args) -> tuple[RegionConfig, dict[Indicator, TimeSeries]]:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    data = load_csv(cfg.dataset_path(args.config), cfg.column_map())
    return cfg, data


def _write_manifest(args, out: Path) -> None:
    digest = hashlib.sha256(Path(args.config).read_bytes()).hexdigest()
    manifest = {
        "command": args.command,
        "argv": sys.argv[1:],
        "config": str(args.config),
        "config_sha256": digest,
        "seed": args.seed,
        "versions": {
            "epikit": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def _params_from(cfg: RegionConfig, path: str | None) -> DiseaseParams:
    base = cfg.disease_params()
    if path is None:
        return base
    p = Path(path)
    if not p.exists():
        raise DataError(f"parameters file not found: {p}")
    raw = json.loads(p.read_text())
    return replace(
        base,
        beta=float(raw["beta"]),
        initial_exposed=int(raw["initial_exposed"]),
        test_odds=float(raw["test_odds"]),
        beta_schedule=tuple((int(d), float(m)) for d, m in raw.get("beta_schedule", [])),
    )


def _require(data: dict, indicator: Indicator) -> TimeSeries:
    if indicator not in data:
        raise DataError(f"dataset has no {indicator.value} column mapped")
    return data[indicator]


def _band_rows(band, dates, history_days):
    for i, d in enumerate(dates):
        yield {
            "date": d.isoformat(),
            "statistic": band.statistic,
            "q10": band.q10[i],
            "q50": band.q50[i],
            "q90": band.q90[i],
            "is_forecast": int(i >= history_days),
        }


# --------------------------------------------------------------- subcommands


def _cmd_validate_config(args) -> int:
    cfg = load_config(args.config)
    print(normalized_json(cfg))
    return EXIT_OK


def _cmd_analyze(args) -> int:
    import pandas as pd

    cfg, data = _load_region(args)
    out = Path(args.out)
    _write_manifest(args, out)
    rows = []
    for ind, series in data.items():
        sm = smooth(series)
        dec = hp_filter(sm)
        r = acf(series, args.max_lag)
        profile = weekly_fractions(series)
        adf = adf_test(dec.residual)
        pd.DataFrame(
            {"date": [d.isoformat() for d in series.dates()],
             "raw": series.values, "smoothed": sm.values, "trend": dec.trend}
        ).to_csv(out / f"{ind.value}_decomposition.csv", index=False)
        pd.DataFrame({"lag": r.lags, "acf": r.coefficients}).assign(
            band=r.confidence_band
        ).to_csv(out / f"{ind.value}_acf.csv", index=False)
        for day, frac in profile.as_dict().items():
            rows.append({"indicator": ind.value, "day": day, "fraction": frac})
        print(f"{ind.value}: ADF stat {adf.statistic:.3f} "
              f"(reject unit root at 5%: {adf.reject_at_5pct})")
    pd.DataFrame(rows).to_csv(out / "weekly_fractions.csv", index=False)
    return EXIT_OK


def _cmd_forecast(args) -> int:
    import pandas as pd

    cfg, data = _load_region(args)
    out = Path(args.out)
    _write_manifest(args, out)
    series = _require(data, Indicator(args.indicator))
    results, _ = compare_models(series, horizon=args.horizon, seed=cfg.seed)
    pd.DataFrame(
        [{"model": r.model_tag.value, "cv_mae": r.cv_mae} for r in results]
    ).to_csv(out / "model_ranking.csv", index=False)
    best = results[0]
    pd.DataFrame(
        {"date": [d.isoformat() for d in best.point_forecast.dates()],
         "forecast": best.point_forecast.values}
    ).to_csv(out / "forecast.csv", index=False)
    print(f"best model: {best.model_tag.value} (CV MAE {best.cv_mae:.3f})")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    import pandas as pd

    cfg, data = _load_region(args)
    out = Path(args.out)
    _write_manifest(args, out)
    params = _params_from(cfg, args.params)
    tests = _require(data, Indicator.NEW_TESTS)
    days = min(args.days, len(tests))
    pop = cfg.build_population()
    ensemble = run_ensemble(pop, params, days, tests, args.runs, cfg.seed)
    dates = tests.dates()[:days]
    rows = []
    for stat in ("new_diagnoses", "new_deaths", "num_critical", "new_infections"):
        band = quantile_bands(ensemble, stat)
        rows.extend(_band_rows(band, dates, history_days=days))
    pd.DataFrame(rows).to_csv(out / "simulation_bands.csv", index=False)
    print(f"simulated {args.runs} runs x {days} days, population {pop.size}")
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    import pandas as pd

    cfg, data = _load_region(args)
    out = Path(args.out)
    _write_manifest(args, out)
    cal = cfg.calibration
    tests = _require(data, Indicator.NEW_TESTS)
    observed = {}
    for stat in cal.statistics:
        series = _require(data, Indicator(stat))
        observed[stat] = smooth(series).values
    pop = cfg.build_population()
    result = calibrate_windows(
        observed,
        pop,
        cfg.disease_params(),
        tests,
        n_windows=args.windows,
        window_length=cal.window_length,
        trials_per_window=args.trials or cal.trials_per_window,
        ensemble_size=args.ensemble or cal.ensemble_size,
        statistics=cal.statistics,
        seed=cfg.seed,
    )
    for w in result.windows:
        rows = [
            {"trial": k, "loss": w.store.losses[k],
             **{f"q{j}": w.store.params[k][j] for j in range(len(w.store.params[k]))}}
            for k in range(len(w.store))
        ]
        pd.DataFrame(rows).to_csv(out / f"window_{w.index}_trials.csv", index=False)
        print(f"window {w.index} [{w.start},{w.end}): J={w.best_loss:.4f} {w.best}")
    final = {
        "beta": result.params.beta,
        "initial_exposed": result.params.initial_exposed,
        "test_odds": result.params.test_odds,
        "beta_schedule": [list(x) for x in result.params.beta_schedule],
    }
    (out / "calibrated_params.json").write_text(json.dumps(final, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_project(args) -> int:
    import datetime as dt

    import pandas as pd

    from .plotting import plot_projection

    cfg, data = _load_region(args)
    out = Path(args.out)
    _write_manifest(args, out)
    params = _params_from(cfg, args.params)
    tests = _require(data, Indicator.NEW_TESTS)
    pop = cfg.build_population()
    proj = project(params, pop, tests, horizon=args.horizon,
                   n_runs=args.runs, seed=cfg.seed)
    dates = [tests.start_date + dt.timedelta(days=i) for i in range(len(proj.tests))]
    rows = []
    for band in proj.bands.values():
        rows.extend(_band_rows(band, dates, proj.history_days))
    pd.DataFrame(rows).to_csv(out / "projection_bands.csv", index=False)
    rt = proj.repro.values
    pd.DataFrame(
        {"date": [d.isoformat() for d in dates],
         "r_t": ["" if np.isnan(v) else v for v in rt],
         "is_forecast": [int(i >= proj.history_days) for i in range(len(rt))]}
    ).to_csv(out / "reproduction_number.csv", index=False)
    plot_projection(proj, out, region=cfg.region)
    print(f"projected {args.horizon} days past {proj.history_days} days of history")
    return EXIT_OK


_COMMANDS = {
    "validate-config": _cmd_validate_config,
    "analyze": _cmd_analyze,
    "forecast": _cmd_forecast,
    "simulate": _cmd_simulate,
    "calibrate": _cmd_calibrate,
    "project": _cmd_project,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"epikit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, OSError) as exc:
        print(f"epikit: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except EpikitError as exc:
        print(f"epikit: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
