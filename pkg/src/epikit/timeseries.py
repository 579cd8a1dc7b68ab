"""Daily epidemiological time series: the core container used everywhere."""

from __future__ import annotations

import datetime as dt
import enum
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from .errors import MissingColumn, NegativeValue, UnparseableDate


class Indicator(enum.Enum):
    NEW_TESTS = "new_tests"
    NEW_DIAGNOSES = "new_diagnoses"
    NEW_DEATHS = "new_deaths"
    NUM_CRITICAL = "num_critical"


@dataclass(frozen=True)
class TimeSeries:
    """One daily indicator: consecutive dates, non-negative values, no NaNs.

    ``gap_indices`` records interior days that were absent from the source
    and filled by linear interpolation at load time.
    """

    start_date: dt.date
    values: np.ndarray
    indicator: Indicator | None = None
    gap_indices: tuple[int, ...] = field(default=())

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or len(vals) < 1:
            raise ValueError("values must be a non-empty 1-d sequence")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end_date(self) -> dt.date:
        return self.start_date + dt.timedelta(days=len(self) - 1)

    def dates(self) -> list[dt.date]:
        return [self.start_date + dt.timedelta(days=i) for i in range(len(self))]

    def with_values(self, values, start_date: dt.date | None = None) -> "TimeSeries":
        return replace(
            self,
            values=np.asarray(values, dtype=float),
            start_date=start_date if start_date is not None else self.start_date,
        )

    def slice(self, start: int, stop: int) -> "TimeSeries":
        gaps = tuple(g - start for g in self.gap_indices if start <= g < stop)
        return TimeSeries(
            start_date=self.start_date + dt.timedelta(days=start),
            values=self.values[start:stop],
            indicator=self.indicator,
            gap_indices=gaps,
        )

    def to_frame(self) -> pd.DataFrame:
        name = self.indicator.value if self.indicator else "value"
        return pd.DataFrame({"date": self.dates(), name: self.values})


def load_csv(path, column_map: dict[Indicator, str]) -> dict[Indicator, TimeSeries]:
    """Read one CSV into one TimeSeries per mapped indicator.

    The file must have a ``date`` column (ISO-8601) plus one column per
    mapped indicator.  Rows are sorted by date; missing interior dates are
    filled by linear interpolation and flagged in ``gap_indices``.
    """
    df = pd.read_csv(path, dtype=str)
    if "date" not in df.columns:
        raise MissingColumn(f"{path}: no 'date' column")
    for ind, col in column_map.items():
        if col not in df.columns:
            raise MissingColumn(f"{path}: column '{col}' (for {ind.value}) not found")

    dates = []
    for i, raw in enumerate(df["date"]):
        try:
            dates.append(dt.date.fromisoformat(str(raw).strip()))
        except ValueError:
            raise UnparseableDate(f"{path} row {i + 2}: cannot parse date {raw!r}")
    order = np.argsort(np.array(dates, dtype="datetime64[D]"), kind="stable")
    dates = [dates[i] for i in order]

    start, end = dates[0], dates[-1]
    n_days = (end - start).days + 1
    day_index = np.array([(d - start).days for d in dates])

    out: dict[Indicator, TimeSeries] = {}
    for ind, col in column_map.items():
        raw = df[col].to_numpy()[order]
        vals = np.full(n_days, np.nan)
        for row_pos, (di, cell) in enumerate(zip(day_index, raw)):
            if cell is None or (isinstance(cell, float) and np.isnan(cell)) or str(cell).strip() == "":
                continue
            try:
                v = float(cell)
            except ValueError:
                raise UnparseableDate(
                    f"{path} row {order[row_pos] + 2}: non-numeric value {cell!r} in '{col}'"
                )
            if v < 0:
                raise NegativeValue(
                    f"{path} row {order[row_pos] + 2}: negative value {v} in '{col}'"
                )
            vals[di] = v
        known = np.flatnonzero(~np.isnan(vals))
        if len(known) == 0:
            raise MissingColumn(f"{path}: column '{col}' has no values")
        # Leading/trailing missing days are trimmed (the series simply starts
        # later); only interior gaps are interpolated and flagged.
        vals = vals[known[0] : known[-1] + 1]
        gaps = tuple(int(i) for i in np.flatnonzero(np.isnan(vals)))
        if gaps:
            idx = np.arange(len(vals))
            mask = ~np.isnan(vals)
            vals = np.interp(idx, idx[mask], vals[mask])
        out[ind] = TimeSeries(
            start_date=start + dt.timedelta(days=int(known[0])),
            values=vals,
            indicator=ind,
            gap_indices=gaps,
        )
    return out


def save_csv(path, series: list[TimeSeries]) -> None:
    """Write one or more aligned TimeSeries to the same CSV shape as input."""
    frames = [s.to_frame().set_index("date") for s in series]
    pd.concat(frames, axis=1).reset_index().to_csv(path, index=False)
