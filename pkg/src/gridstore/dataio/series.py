"""Hourly series ingestion, peak scaling and representative-day selection."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

HOURS_PER_DAY = 24
DAYS_PER_YEAR = 365


class DataError(ValueError):
    """Base class for input-data problems."""


class MissingHourError(DataError):
    def __init__(self, timestamp):
        super().__init__(f"missing hour {timestamp}")
        self.timestamp = timestamp


class NonNumericError(DataError):
    def __init__(self, row: int, value):
        super().__init__(f"non-numeric value {value!r} in data row {row}")
        self.row = row
        self.value = value


class WrongLengthError(DataError):
    pass


@dataclass(frozen=True)
class RawSeries:
    """Ordered hourly values; ``timestamps`` excludes Feb 29 by convention."""

    values: np.ndarray
    timestamps: pd.DatetimeIndex
    name: str
    year: int | None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if v.size % HOURS_PER_DAY:
            raise WrongLengthError(f"{v.size} hourly values is not a whole number of days")

    def __len__(self):
        return self.values.size

    @property
    def days(self) -> np.ndarray:
        return self.values.reshape(-1, HOURS_PER_DAY)

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.timestamps[::HOURS_PER_DAY].normalize()


def _leap_day(idx: pd.DatetimeIndex) -> np.ndarray:
    return np.asarray((idx.month == 2) & (idx.day == 29))


def load_timeseries(path, column: str | None = None, time_column: str | None = None,
                    expected_hours: int | None = None) -> RawSeries:
    """Read an hourly CSV with a timestamp column and a value column.

    Defaults: first column holds timestamps, the next one the values. Feb 29
    rows are dropped. Raises :class:`MissingHourError`, :class:`NonNumericError`
    or :class:`WrongLengthError`.
    """
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    if frame.shape[1] < 2:
        raise DataError(f"{path}: need a timestamp column and a value column")
    time_column = time_column or frame.columns[0]
    if column is None:
        column = next(c for c in frame.columns if c != time_column)
    for col in (time_column, column):
        if col not in frame.columns:
            raise DataError(f"{path}: no column {col!r}")
    stamps = pd.to_datetime(frame[time_column].str.strip(), errors="coerce")
    bad = np.flatnonzero(stamps.isna().to_numpy())
    if bad.size:
        raise DataError(f"{path}: unparseable timestamp {frame[time_column].iloc[bad[0]]!r} in data row {bad[0] + 1}")
    values = pd.to_numeric(frame[column].str.strip(), errors="coerce")
    bad = np.flatnonzero(values.isna().to_numpy() | ~np.isfinite(values.to_numpy(dtype=float, na_value=np.nan)))
    if bad.size:
        raise NonNumericError(int(bad[0]) + 1, frame[column].iloc[bad[0]])
    idx = pd.DatetimeIndex(stamps)
    order = np.argsort(idx.asi8, kind="stable")
    idx = idx[order]
    vals = values.to_numpy(dtype=float)[order]
    if idx.has_duplicates:
        raise DataError(f"{path}: duplicate timestamp {idx[idx.duplicated()][0]}")
    keep = ~_leap_day(idx)
    idx, vals = idx[keep], vals[keep]
    if len(idx):
        expected = pd.date_range(idx[0].floor("h"), idx[-1], freq="h")
        expected = expected[~_leap_day(expected)]
        missing = expected.difference(idx)
        if len(missing):
            raise MissingHourError(missing[0])
        if len(expected) != len(idx):
            raise DataError(f"{path}: timestamps are not on whole hours")
    if vals.size == 0 or vals.size % HOURS_PER_DAY:
        raise WrongLengthError(f"{path}: {vals.size} hourly values is not a whole number of days")
    if expected_hours is not None and vals.size != expected_hours:
        raise WrongLengthError(f"{path}: expected {expected_hours} hourly values, found {vals.size}")
    years = set(idx.year)
    return RawSeries(vals, idx, str(column), years.pop() if len(years) == 1 else None)


@dataclass(frozen=True)
class PeakProjection:
    years: tuple[int, ...]
    peaks: tuple[float, ...]

    def __post_init__(self):
        if len(self.years) != len(self.peaks) or not self.years:
            raise DataError("need one peak per year")
        if any(p <= 0 for p in self.peaks):
            raise DataError("peak loads must be positive")

    @classmethod
    def linear(cls, first_year: int, last_year: int, first_peak: float, last_peak: float) -> "PeakProjection":
        years = tuple(range(first_year, last_year + 1))
        peaks = np.linspace(first_peak, last_peak, len(years))
        return cls(years, tuple(float(p) for p in peaks))

    @classmethod
    def from_csv(cls, path) -> "PeakProjection":
        frame = pd.read_csv(path)
        years = pd.to_numeric(frame.iloc[:, 0], errors="raise").astype(int)
        peaks = pd.to_numeric(frame.iloc[:, 1], errors="raise").astype(float)
        return cls(tuple(int(y) for y in years), tuple(float(p) for p in peaks))

    def for_years(self, years) -> np.ndarray:
        lookup = dict(zip(self.years, self.peaks))
        missing = [y for y in years if y not in lookup]
        if missing:
            raise DataError(f"no peak projection for years {missing}")
        return np.array([lookup[y] for y in years])


def scale_load_by_peak(base, peaks) -> np.ndarray:
    """Scale one year of hourly load to each period's peak: shape ``(N, days, 24)``."""
    values = base.values if isinstance(base, RawSeries) else np.asarray(base, dtype=float)
    days = values.reshape(-1, HOURS_PER_DAY)
    top = float(days.max())
    if not top > 0:
        raise DataError("base load has zero peak")
    peaks = np.asarray(peaks.peaks if isinstance(peaks, PeakProjection) else peaks, dtype=float).ravel()
    out = days[None, :, :] * (peaks[:, None, None] / top)
    # hit the target peaks exactly despite rounding in the ratio
    flat = out.reshape(len(peaks), -1)
    at = int(np.argmax(days))
    flat[:, at] = peaks
    return out


def select_representative_days(series, count: int, strategy: str = "peak+stratified"):
    """Pick ``count`` days and weights summing to the number of days.

    Half the slots (rounded up) go to the days with the highest hourly peak,
    weight 1 each. The other days are sorted by daily mean and cut into equal
    strata; each stratum is represented by its day closest to the stratum
    mean and weighted by the stratum size. Returns chronologically sorted
    indices and matching weights.
    """
    days = series.days if isinstance(series, RawSeries) else np.asarray(series, dtype=float)
    days = days.reshape(days.shape[0], -1) if days.ndim > 1 else days.reshape(-1, HOURS_PER_DAY)
    total = days.shape[0]
    if strategy != "peak+stratified":
        raise ValueError(f"unknown selection strategy {strategy!r}")
    if count < 2:
        raise ValueError("need at least two representative days")
    if count > total:
        raise ValueError(f"cannot pick {count} of {total} days")
    if count == total:
        return np.arange(total), np.ones(total)
    n_peak = math.ceil(count / 2)
    peak_order = np.lexsort((np.arange(total), -days.max(axis=1)))
    chosen = list(peak_order[:n_peak])
    weights = [1.0] * n_peak
    rest = np.setdiff1d(np.arange(total), chosen)
    means = days[rest].mean(axis=1)
    by_mean = rest[np.lexsort((rest, means))]
    for stratum in np.array_split(by_mean, count - n_peak):
        m = days[stratum].mean(axis=1)
        pick = stratum[int(np.argmin(np.abs(m - m.mean())))]
        chosen.append(int(pick))
        weights.append(float(stratum.size))
    chosen = np.asarray(chosen, dtype=np.int64)
    weights = np.asarray(weights)
    order = np.argsort(chosen)
    return chosen[order], weights[order]


def load_scarcity_events(path) -> list[tuple[pd.Timestamp, int, int]]:
    """Read ``date,start,end`` rows (ISO date, ``HH:MM`` times).

    Returns ``(date, first_hour, last_hour)`` with every clock hour the
    event touches.
    """
    frame = pd.read_csv(path, dtype=str)
    if list(frame.columns[:3]) != ["date", "start", "end"]:
        raise DataError(f"{path}: expected columns date,start,end")
    out = []
    for row, (d, s, e) in enumerate(frame.iloc[:, :3].itertuples(index=False), start=1):
        day = pd.Timestamp(d.strip())
        start = pd.Timestamp(f"{d.strip()} {s.strip()}")
        end = pd.Timestamp(f"{d.strip()} {e.strip()}")
        if end <= start:
            raise DataError(f"{path}: event in row {row} ends before it starts")
        last = end - pd.Timedelta(microseconds=1)
        out.append((day, int(start.hour), int(last.hour)))
    return out


def event_positions(events, dates: pd.DatetimeIndex, selected, n_periods: int) -> np.ndarray:
    """Map events to ``(n, j, k)`` rows on the selected days, repeated for every period."""
    selected = np.asarray(selected)
    position = {pd.Timestamp(dates[d]).normalize(): j for j, d in enumerate(selected)}
    rows = []
    for day, first, last in events:
        j = position.get(pd.Timestamp(day).normalize())
        if j is None:
            continue
        for n in range(n_periods):
            rows.extend((n, j, k) for k in range(first, last + 1))
    return np.array(rows, dtype=np.int64).reshape(-1, 3)
