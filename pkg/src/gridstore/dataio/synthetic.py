"""Deterministic stand-in for an island distribution system's 2024 data.

The load is summer-peaking (tourist season) with a winter base near a third
of the peak and an evening daily maximum; the peak is 57 MW on a heat-wave
day in early August. Prices follow load with a winter gas premium and short
spikes during the two scarcity events.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

BASE_PEAK_MW = 57.0
YEAR = 2024
HEAT_WAVE = ("2024-07-15", "2024-07-16", "2024-08-02", "2024-08-03", "2024-08-05")
SCARCITY = (("2024-06-18", "17:50", "18:20"), ("2024-08-01", "16:55", "17:05"), ("2024-08-01", "17:45", "19:25"))


def _hourly_index(year: int) -> pd.DatetimeIndex:
    return pd.date_range(f"{year}-01-01", f"{year + 1}-01-01", freq="h", inclusive="left")


def synthetic_year(seed: int = 2024, year: int = YEAR) -> pd.DataFrame:
    """Hourly ``load_mw`` and ``price_per_mwh``, Feb 29 included when it exists."""
    rng = np.random.default_rng(seed)
    idx = _hourly_index(year)
    doy = idx.dayofyear.to_numpy()
    hour = idx.hour.to_numpy()
    season = np.exp(-(((doy - 208) / 38.0) ** 2))
    winter = np.exp(-(((np.minimum(doy, 366 - doy + 1) - 15) / 40.0) ** 2))
    day_noise = np.repeat(rng.normal(0.0, 0.04, size=doy.max()), 24)[: idx.size]
    level = (19.0 + 19.0 * season + 3.0 * winter) * (1.0 + day_noise)
    evening = np.exp(-(((hour - 19.0) / 3.0) ** 2))
    midday = np.exp(-(((hour - 13.0) / 3.5) ** 2))
    night = np.exp(-(((hour - 4.0) / 2.5) ** 2))
    shape = 0.95 + (0.33 + 0.12 * season) * evening + 0.15 * season * midday - 0.28 * night
    load = level * shape * (1.0 + rng.normal(0.0, 0.015, size=idx.size))
    dates = idx.normalize()
    for d in HEAT_WAVE:
        load[dates == pd.Timestamp(d)] *= 1.12
    load *= BASE_PEAK_MW / load.max()

    gas = 1.0 + 0.8 * winter
    price = 24.0 * gas + 35.0 * (load / BASE_PEAK_MW) ** 2 + rng.gamma(2.0, 3.0, size=idx.size)
    for day, start, end in SCARCITY:
        t0 = pd.Timestamp(f"{day} {start}").floor("h")
        t1 = pd.Timestamp(f"{day} {end}")
        price[(idx >= t0) & (idx < t1)] += 900.0
    return pd.DataFrame({"timestamp": idx, "load_mw": np.round(load, 4), "price_per_mwh": np.round(price, 2)})


def write_synthetic_case(directory, seed: int = 2024) -> dict[str, Path]:
    """Write load, price, peak-projection and scarcity CSVs; returns their paths."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    frame = synthetic_year(seed)
    stamp = frame["timestamp"].dt.strftime("%Y-%m-%d %H:%M")
    paths = {
        "load_csv": out / "load_2024.csv",
        "price_csv": out / "price_2024.csv",
        "peak_csv": out / "peak_projection.csv",
        "scarcity_csv": out / "scarcity_events.csv",
    }
    pd.DataFrame({"timestamp": stamp, "load_mw": frame["load_mw"]}).to_csv(paths["load_csv"], index=False)
    pd.DataFrame({"timestamp": stamp, "price_per_mwh": frame["price_per_mwh"]}).to_csv(paths["price_csv"], index=False)
    years = np.arange(2025, 2051)
    peaks = np.round(np.linspace(62.0, 98.0, years.size), 4)
    pd.DataFrame({"year": years, "peak_mw": peaks}).to_csv(paths["peak_csv"], index=False)
    pd.DataFrame(SCARCITY, columns=["date", "start", "end"]).to_csv(paths["scarcity_csv"], index=False)
    return paths
