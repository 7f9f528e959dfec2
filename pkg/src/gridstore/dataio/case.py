"""Assemble a planning instance from a case configuration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..model.types import ExogenousSeries, Horizon, PlanningInstance
from .config import CaseConfig
from .series import (
    HOURS_PER_DAY,
    PeakProjection,
    RawSeries,
    event_positions,
    load_scarcity_events,
    load_timeseries,
    scale_load_by_peak,
    select_representative_days,
)
from .synthetic import SCARCITY, synthetic_year


@dataclass(frozen=True)
class CaseData:
    instance: PlanningInstance
    base_load: RawSeries
    price: RawSeries
    days: np.ndarray
    day_weights: np.ndarray
    events: list
    event_cells: np.ndarray
    full_load: np.ndarray
    years: list[int]
    synthetic: bool


def _synthetic_series(seed: int) -> tuple[RawSeries, RawSeries, list]:
    frame = synthetic_year(seed)
    idx = pd.DatetimeIndex(frame["timestamp"])
    keep = ~((idx.month == 2) & (idx.day == 29))
    idx = idx[keep]
    load = RawSeries(frame["load_mw"].to_numpy()[keep], idx, "load_mw", 2024)
    price = RawSeries(frame["price_per_mwh"].to_numpy()[keep], idx, "price_per_mwh", 2024)
    events = []
    for day, start, end in SCARCITY:
        last = pd.Timestamp(f"{day} {end}") - pd.Timedelta(microseconds=1)
        events.append((pd.Timestamp(day), pd.Timestamp(f"{day} {start}").hour, last.hour))
    return load, price, events


def build_case(case: CaseConfig) -> CaseData:
    """Load (or synthesize) the series, scale, reduce days and build the instance.

    Without ``load_csv`` the deterministic synthetic year is used for load,
    prices and scarcity events alike.
    """
    case.validate()
    synthetic = case.load_csv is None
    if synthetic:
        load, price, events = _synthetic_series(case.seed)
    else:
        load = load_timeseries(case.load_csv)
        price_path = case.price_csv or case.load_csv
        price = load_timeseries(price_path)
        events = load_scarcity_events(case.scarcity_csv) if case.scarcity_csv else []
    if len(price) != len(load):
        raise ValueError(f"price series has {len(price)} hours, load series {len(load)}")
    if case.peak_csv is not None:
        peaks = PeakProjection.from_csv(case.peak_csv)
    else:
        peaks = PeakProjection.linear(case.start_year, case.last_year, case.first_peak_mw, case.last_peak_mw)
    years = case.years
    full = scale_load_by_peak(load, peaks.for_years(years))
    days, weights = select_representative_days(load, case.representative_days)
    reduced = full[:, days, :]
    price_days = price.values.reshape(-1, HOURS_PER_DAY)[days]
    grid_price = np.broadcast_to(price_days, reduced.shape)
    cells = event_positions(events, load.dates, days, len(years))
    horizon = Horizon(len(years), len(days), HOURS_PER_DAY, case.dt_hours, case.contingency_weights, weights)
    specs = case.specs()
    return CaseData(
        instance=PlanningInstance(specs, case.storage, horizon, ExogenousSeries.from_prices(
            reduced, grid_price, case.backup_price_per_mwh, 0.0, 0.0, cells)),
        base_load=load, price=price, days=days, day_weights=weights, events=events, event_cells=cells,
        full_load=full, years=years, synthetic=synthetic,
    )


def with_load_value(instance: PlanningInstance, value: float) -> PlanningInstance:
    """Copy of ``instance`` whose served load is worth ``value`` $/MWh (shedding runs)."""
    s = instance.series
    dem = np.array(s.demand_price)
    dem[1] = value
    return instance.replace(series=ExogenousSeries(s.load, s.supply_price, dem, s.scarcity_events))
