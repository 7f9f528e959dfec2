"""INI-style case configuration with strict keys and case-study defaults.

Every key carries its unit in the name. Relative paths resolve against the
directory of the config file. Sections and defaults::

    [case]     name, start_year, n_periods, representative_days, dt_hours,
               contingency_weights, load_csv, price_csv, peak_csv,
               scarcity_csv, seed
    [backup]   min_invest_mw, max_invest_mw, lifetime_years, unit_cost_per_kw,
               fixed_cost, existing_mw, existing_installed_year,
               supply_price_per_mwh
    [grid]     (same investment keys as backup, minus supply_price_per_mwh)
    [storage]  (same investment keys) plus charge_efficiency,
               discharge_efficiency, duration_hours, cycle_limit,
               storage_cost_per_kwh
    [market]   capacity_price_per_kw_month, load_value_per_mwh, first_peak_mw,
               last_peak_mw, last_year
    [experiment] name, market_mode, investable, cycle_scope, load_shedding,
               storage_cost_per_kwh, capacity_price_per_kw_month
    [solver]   mip_gap, time_limit_s, node_limit, backend
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from ..formulation.config import CAPACITY_PRICE, ExperimentConfig
from ..model.types import ResourceKind, ResourceSpec, StorageSpec
from ..solver.problem import SolverOptions


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in str(text).replace(";", ",").split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in str(text).replace(";", ",").split(",") if v.strip())


@dataclass(frozen=True)
class FleetConfig:
    min_invest_mw: float
    max_invest_mw: float
    lifetime_years: int
    unit_cost_per_kw: float
    existing_mw: tuple[float, ...]
    existing_installed_year: tuple[int, ...]
    fixed_cost: float = 0.0

    def spec(self, kind: ResourceKind, years, capacity_price_per_kw_period: float = 0.0) -> ResourceSpec:
        years = list(years)
        n = len(years)
        if len(self.existing_mw) != len(self.existing_installed_year):
            raise ConfigError(f"{kind.name.lower()}: existing_mw and existing_installed_year differ in length")
        pre = np.zeros((n, len(self.existing_mw)))
        for i, (mw, built) in enumerate(zip(self.existing_mw, self.existing_installed_year)):
            for t, year in enumerate(years):
                if built <= year < built + self.lifetime_years:
                    pre[t, i] = mw
        return ResourceSpec(kind, np.full(n, self.unit_cost_per_kw), np.full(n, self.fixed_cost),
                            self.min_invest_mw, self.max_invest_mw, self.lifetime_years, pre,
                            np.full(n, capacity_price_per_kw_period))


# synthetic backup cost and install year; see the project notes
BACKUP = FleetConfig(2.0, 30.0, 20, 1500.0, (13.0,), (2012,))
GRID = FleetConfig(40.0, 40.0, 40, 5000.0, (36.0, 38.0), (1996, 2006))
STORAGE = FleetConfig(2.0, 24.0, 20, 604.0 * 8.0, (6.0,), (2019,))


@dataclass(frozen=True)
class CaseConfig:
    name: str = "island-desk"
    start_year: int = 2025
    n_periods: int = 3
    representative_days: int = 10
    dt_hours: float = 1.0
    contingency_weights: tuple[float, ...] = (0.8, 0.2)
    load_csv: Path | None = None
    price_csv: Path | None = None
    peak_csv: Path | None = None
    scarcity_csv: Path | None = None
    seed: int = 2024
    backup: FleetConfig = BACKUP
    grid: FleetConfig = GRID
    storage_fleet: FleetConfig = STORAGE
    storage: StorageSpec = field(default_factory=StorageSpec)
    storage_cost_per_kwh: float = 604.0
    backup_price_per_mwh: float = 305.0
    capacity_price_per_kw_month: float = CAPACITY_PRICE
    load_value_per_mwh: float = 9337.0
    first_peak_mw: float = 62.0
    last_peak_mw: float = 98.0
    last_year: int = 2050

    @property
    def years(self) -> list[int]:
        return list(range(self.start_year, self.start_year + self.n_periods))

    def specs(self) -> dict:
        years = self.years
        cap = self.capacity_price_per_kw_month * 12.0
        storage = replace(self.storage_fleet, unit_cost_per_kw=self.storage_cost_per_kwh * self.storage.duration)
        return {
            ResourceKind.BACKUP: self.backup.spec(ResourceKind.BACKUP, years, cap),
            ResourceKind.GRID: self.grid.spec(ResourceKind.GRID, years, 0.0),
            ResourceKind.STORAGE: storage.spec(ResourceKind.STORAGE, years, cap),
        }

    def validate(self) -> "CaseConfig":
        if self.n_periods < 1:
            raise ConfigError("n_periods must be at least 1")
        if not 2 <= self.representative_days <= 365:
            raise ConfigError("representative_days must lie in [2, 365]")
        if self.dt_hours != 1.0:
            raise ConfigError("hourly data requires dt_hours = 1")
        if not self.contingency_weights or any(w < 0 for w in self.contingency_weights):
            raise ConfigError("contingency weights must be nonnegative")
        if self.start_year + self.n_periods - 1 > self.last_year:
            raise ConfigError("planning horizon runs past last_year")
        for name in ("storage_cost_per_kwh", "backup_price_per_mwh", "capacity_price_per_kw_month",
                     "load_value_per_mwh"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if self.first_peak_mw <= 0 or self.last_peak_mw <= 0:
            raise ConfigError("peak loads must be positive")
        try:
            self.specs()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self


_FLEET_KEYS = {
    "min_invest_mw": float, "max_invest_mw": float, "lifetime_years": int, "unit_cost_per_kw": float,
    "fixed_cost": float, "existing_mw": _floats, "existing_installed_year": _ints,
}
SCHEMA = {
    "case": {"name": str, "start_year": int, "n_periods": int, "representative_days": int, "dt_hours": float,
             "contingency_weights": _floats, "load_csv": Path, "price_csv": Path, "peak_csv": Path,
             "scarcity_csv": Path, "seed": int},
    "backup": dict(_FLEET_KEYS, supply_price_per_mwh=float),
    "grid": dict(_FLEET_KEYS),
    "storage": dict(_FLEET_KEYS, charge_efficiency=float, discharge_efficiency=float, duration_hours=float,
                    cycle_limit=float, storage_cost_per_kwh=float),
    "market": {"capacity_price_per_kw_month": float, "load_value_per_mwh": float, "first_peak_mw": float,
               "last_peak_mw": float, "last_year": int},
    "experiment": {"name": str, "market_mode": str, "investable": str, "cycle_scope": str,
                   "load_shedding": bool, "storage_cost_per_kwh": float, "capacity_price_per_kw_month": float},
    "solver": {"mip_gap": float, "time_limit_s": float, "node_limit": int, "backend": str},
}
_BOOL = {"true": True, "yes": True, "1": True, "on": True, "false": False, "no": False, "0": False, "off": False}


def _parse(section: str, key: str, raw: str, base: Path):
    kind = SCHEMA[section][key]
    try:
        if kind is bool:
            return _BOOL[raw.strip().lower()]
        if kind is Path:
            p = Path(raw.strip())
            return p if p.is_absolute() else (base / p)
        return kind(raw.strip()) if kind in (int, float, str) else kind(raw)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from exc


def read_sections(path) -> dict:
    """Parse and type-check; unknown sections or keys are errors."""
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    out = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        values = {}
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            values[key] = _parse(section, key, raw, path.parent)
        out[section] = values
    return out


def _fleet(default: FleetConfig, values: dict) -> FleetConfig:
    names = {f.name for f in fields(FleetConfig)}
    return replace(default, **{k: v for k, v in values.items() if k in names})


def build_config(sections: dict) -> tuple[ExperimentConfig, CaseConfig]:
    case_kw = dict(sections.get("case", {}))
    b = sections.get("backup", {})
    g = sections.get("grid", {})
    s = sections.get("storage", {})
    mk = sections.get("market", {})
    ex = sections.get("experiment", {})
    sv = sections.get("solver", {})
    storage = StorageSpec(
        s.get("charge_efficiency", 0.913), s.get("discharge_efficiency", 0.913),
        s.get("duration_hours", 8.0), s.get("cycle_limit", 150.0),
    )
    case = CaseConfig(
        **case_kw,
        backup=_fleet(BACKUP, b), grid=_fleet(GRID, g), storage_fleet=_fleet(STORAGE, s), storage=storage,
        storage_cost_per_kwh=s.get("storage_cost_per_kwh", 604.0),
        backup_price_per_mwh=b.get("supply_price_per_mwh", 305.0),
        **mk,
    ).validate()
    solver = SolverOptions(mip_gap=sv.get("mip_gap", 1e-5), time_limit=sv.get("time_limit_s", 14400.0),
                           node_limit=sv.get("node_limit"))
    investable = ex.get("investable", "b,g,s")
    codes = [c.strip() for c in investable.replace("+", ",").split(",") if c.strip()]
    try:
        config = ExperimentConfig(
            name=ex.get("name", "experiment"), market_mode=ex.get("market_mode", "full"),
            investable=frozenset(ResourceKind(c) for c in codes), cycle_scope=ex.get("cycle_scope", "yearly"),
            load_shedding=ex.get("load_shedding", False),
            storage_cost_per_kwh=ex.get("storage_cost_per_kwh", case.storage_cost_per_kwh),
            capacity_price_per_kw_month=ex.get("capacity_price_per_kw_month"),
            solver=solver, backend=sv.get("backend"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return config, case


def load_config(path) -> tuple[ExperimentConfig, CaseConfig]:
    """Read a config file into an experiment config and case parameters."""
    return build_config(read_sections(path))
