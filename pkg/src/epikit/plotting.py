"""SVG figures for projections: median with shaded quantile band, and the
reproduction-number curve with its R = 1 reference."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .report import Projection, QuantileBand, ReproSeries

# savefig kwargs that keep repeated renders byte-identical
_SAVE = {"format": "svg", "metadata": {"Date": None}}


def _mark_boundary(ax, history_days: int, n_days: int):
    if 0 < history_days < n_days:
        ax.axvline(history_days - 0.5, color="gray", linestyle=":", linewidth=1)


def plot_band(
    band: QuantileBand, path: str | Path, history_days: int | None = None,
    observed: np.ndarray | None = None, title: str | None = None,
) -> None:
    fig, ax = plt.subplots(figsize=(8, 4))
    days = np.arange(len(band.q50))
    ax.fill_between(days, band.q10, band.q90, alpha=0.3, color="tab:blue",
                    label="10-90% quantiles")
    ax.plot(days, band.q50, color="tab:blue", label="median")
    if observed is not None:
        ax.plot(np.arange(len(observed)), observed, color="black",
                linewidth=0.8, label="observed")
    if history_days is not None:
        _mark_boundary(ax, history_days, len(days))
    ax.set_xlabel("day")
    ax.set_ylabel(band.statistic.replace("_", " "))
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def plot_repro(
    repro: ReproSeries, path: str | Path, history_days: int | None = None,
    title: str | None = None,
) -> None:
    fig, ax = plt.subplots(figsize=(8, 4))
    days = np.arange(len(repro.values))
    ax.plot(days, repro.values, color="tab:red", label="R(t)")
    ax.axhline(1.0, color="black", linestyle="--", linewidth=1, label="R = 1")
    if history_days is not None:
        _mark_boundary(ax, history_days, len(days))
    ax.set_xlabel("day")
    ax.set_ylabel("effective reproduction number")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def plot_projection(projection: Projection, out_dir: str | Path, region: str = "") -> list[Path]:
    """One SVG per projected statistic plus the R(t) figure."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, band in projection.bands.items():
        p = out_dir / f"{name}.svg"
        plot_band(band, p, history_days=projection.history_days,
                  title=f"{region} {name.replace('_', ' ')}".strip())
        written.append(p)
    p = out_dir / "reproduction_number.svg"
    plot_repro(projection.repro, p, history_days=projection.history_days,
               title=f"{region} R(t)".strip())
    written.append(p)
    return written
