"""Domain types for the planning model.

Array layouts (all 0-based):

* supply-side arrays are indexed ``[r, n, j, k, c]`` with ``r`` in ``SUPPLY``
* demand-side arrays are indexed ``[d, n, j, k, c]`` with ``d`` in ``DEMAND``
* exogenous series drop the trailing contingency axis

Power is in MW, energy in MWh, prices in $/MWh, unit investment costs in
$/kW and capacity prices in $/kW per planning period.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

KW_PER_MW = 1000.0


class ResourceKind(str, Enum):
    BACKUP = "b"
    GRID = "g"
    STORAGE = "s"


class DemandKind(str, Enum):
    GRID = "g"
    LOAD = "l"
    STORAGE = "s"


SUPPLY: tuple[ResourceKind, ...] = (ResourceKind.BACKUP, ResourceKind.GRID, ResourceKind.STORAGE)
DEMAND: tuple[DemandKind, ...] = (DemandKind.GRID, DemandKind.LOAD, DemandKind.STORAGE)
NON_GRID: tuple[ResourceKind, ...] = (ResourceKind.BACKUP, ResourceKind.STORAGE)

B, G, S = 0, 1, 2  # supply positions
DG, DL, DS = 0, 1, 2  # demand positions


def supply_index(kind: ResourceKind | str) -> int:
    return SUPPLY.index(ResourceKind(kind))


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Horizon:
    n_periods: int
    n_operating: int
    n_subperiods: int
    dt: float = 1.0
    duration_weights: tuple[float, ...] = (0.8, 0.2)
    day_weights: np.ndarray | None = None

    def __post_init__(self):
        if min(self.n_periods, self.n_operating, self.n_subperiods) < 1:
            raise ValueError("N, J and K must be at least 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        tw = tuple(float(t) for t in self.duration_weights)
        if not tw or any(t < 0 for t in tw):
            raise ValueError("duration weights must be nonnegative")
        object.__setattr__(self, "duration_weights", tw)
        w = np.ones(self.n_operating) if self.day_weights is None else self.day_weights
        w = _frozen(w)
        if w.shape != (self.n_operating,):
            raise ValueError("need one day weight per operating period")
        if np.any(w <= 0):
            raise ValueError("day weights must be positive")
        object.__setattr__(self, "day_weights", w)

    @property
    def n_contingencies(self) -> int:
        return len(self.duration_weights)

    @property
    def contingencies(self) -> range:
        return range(self.n_contingencies)

    @property
    def days_represented(self) -> float:
        return float(self.day_weights.sum())

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.n_periods, self.n_operating, self.n_subperiods, self.n_contingencies)


@dataclass(frozen=True)
class ResourceSpec:
    """Economics and preinstalled fleet of one supply resource.

    ``preinstalled`` has shape ``(N, I)``: capacity of preinstalled unit ``i``
    during period ``n``, zero once the unit has retired.
    """

    kind: ResourceKind
    unit_cost: np.ndarray
    fixed_cost: np.ndarray
    min_invest: float
    max_invest: float
    lifetime: int
    preinstalled: np.ndarray
    capacity_price: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kind", ResourceKind(self.kind))
        for name in ("unit_cost", "fixed_cost", "capacity_price"):
            arr = _frozen(np.atleast_1d(getattr(self, name)))
            if np.any(arr < 0):
                raise ValueError(f"{self.kind.name.lower()} {name} must be nonnegative")
            object.__setattr__(self, name, arr)
        n = self.unit_cost.size
        if self.fixed_cost.size != n or self.capacity_price.size != n:
            raise ValueError("cost and price series must cover the same periods")
        pre = np.asarray(self.preinstalled, dtype=float)
        if pre.ndim == 1:
            pre = pre.reshape(n, -1) if pre.size else np.zeros((n, 0))
        if pre.shape[0] != n:
            raise ValueError("preinstalled capacities must have one row per period")
        if np.any(pre < 0):
            raise ValueError("preinstalled capacities must be nonnegative")
        object.__setattr__(self, "preinstalled", _frozen(pre))
        if not 0 <= self.min_invest <= self.max_invest:
            raise ValueError(
                f"{self.kind.name.lower()}: need 0 <= min_invest <= max_invest, "
                f"got {self.min_invest} and {self.max_invest}"
            )
        if int(self.lifetime) < 1:
            raise ValueError("lifetime must be at least one period")
        object.__setattr__(self, "lifetime", int(self.lifetime))

    @property
    def n_periods(self) -> int:
        return self.unit_cost.size

    def replace(self, **changes) -> "ResourceSpec":
        fields = dict(
            kind=self.kind, unit_cost=self.unit_cost, fixed_cost=self.fixed_cost,
            min_invest=self.min_invest, max_invest=self.max_invest, lifetime=self.lifetime,
            preinstalled=self.preinstalled, capacity_price=self.capacity_price,
        )
        fields.update(changes)
        return ResourceSpec(**fields)


@dataclass(frozen=True)
class StorageSpec:
    eta_c: float = 0.913
    eta_d: float = 0.913
    duration: float = 8.0
    cycle_limit: float = 150.0

    def __post_init__(self):
        if not (0 < self.eta_c <= 1 and 0 < self.eta_d <= 1):
            raise ValueError("efficiencies must lie in (0, 1]")
        if not (self.duration > 0 and self.cycle_limit > 0):
            raise ValueError("duration and cycle limit must be positive")

    @property
    def roundtrip(self) -> float:
        return self.eta_c * self.eta_d


@dataclass(frozen=True)
class ExogenousSeries:
    """Load and prices per ``(n, j, k)``.

    ``supply_price`` is ``(3, N, J, K)`` in ``SUPPLY`` order, ``demand_price``
    is ``(3, N, J, K)`` in ``DEMAND`` order; its load slice holds the value of
    served load (the shedding penalty). ``scarcity_events`` lists ``(n, j, k)``
    positions.
    """

    load: np.ndarray
    supply_price: np.ndarray
    demand_price: np.ndarray
    scarcity_events: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.int64))

    def __post_init__(self):
        load = _frozen(self.load)
        if load.ndim != 3:
            raise ValueError("load must have shape (N, J, K)")
        if np.any(load < 0) or np.any(~np.isfinite(load)):
            raise ValueError("load must be finite and nonnegative")
        object.__setattr__(self, "load", load)
        for name in ("supply_price", "demand_price"):
            arr = _frozen(getattr(self, name))
            if arr.shape != (3,) + load.shape:
                raise ValueError(f"{name} must have shape (3, N, J, K)")
            if np.any(~np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, arr)
        ev = np.asarray(self.scarcity_events, dtype=np.int64).reshape(-1, 3)
        if ev.size and (np.any(ev < 0) or np.any(ev >= np.array(load.shape))):
            raise ValueError("scarcity event outside the horizon")
        object.__setattr__(self, "scarcity_events", _frozen(ev, np.int64))

    @classmethod
    def from_prices(cls, load, grid_price, backup_price: float = 305.0,
                    load_value: float = 0.0, storage_price: float = 0.0,
                    scarcity_events=()) -> "ExogenousSeries":
        """Grid demand is priced like grid supply; storage flows cost ``storage_price``."""
        load = np.asarray(load, dtype=float)
        gp = np.broadcast_to(np.asarray(grid_price, dtype=float), load.shape)
        sup = np.stack([np.full(load.shape, float(backup_price)), gp, np.full(load.shape, float(storage_price))])
        dem = np.stack([gp, np.full(load.shape, float(load_value)), np.full(load.shape, float(storage_price))])
        return cls(load, sup, dem, np.asarray(scarcity_events, dtype=np.int64).reshape(-1, 3))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.load.shape

    def check_horizon(self, horizon: Horizon) -> None:
        if self.load.shape != horizon.shape[:3]:
            raise ValueError(f"series shape {self.load.shape} does not match horizon {horizon.shape[:3]}")


@dataclass(frozen=True)
class InvestmentPlan:
    """Investment decisions ``x``/``z`` of shape ``(3, N)`` in ``SUPPLY`` order.

    ``x_tot`` has shape ``(3, N, C)``; non-grid rows repeat across ``c``.
    """

    x: np.ndarray
    z: np.ndarray
    x_tot: np.ndarray
    x_max: np.ndarray

    def __post_init__(self):
        for name in ("x", "z", "x_tot", "x_max"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))


@dataclass(frozen=True)
class OperationPlan:
    """Dispatch: ``supply``/``demand`` ``(3, N, J, K, C)``, ``soc`` ``(N, J, K, C)``
    at the end of each subperiod, and ``soc_target`` ``(N,)``."""

    supply: np.ndarray
    demand: np.ndarray
    soc: np.ndarray
    soc_target: np.ndarray

    def __post_init__(self):
        for name in ("supply", "demand", "soc", "soc_target"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if self.supply.shape != self.demand.shape or self.supply.shape[1:] != self.soc.shape:
            raise ValueError("inconsistent operation plan shapes")

    @classmethod
    def zeros(cls, horizon: Horizon) -> "OperationPlan":
        shp = horizon.shape
        return cls(np.zeros((3,) + shp), np.zeros((3,) + shp), np.zeros(shp), np.zeros(shp[0]))

    def mix(self, other: "OperationPlan", weight: float) -> "OperationPlan":
        """Convex combination ``(1 - weight) * self + weight * other``."""
        a, b = 1.0 - weight, weight
        return OperationPlan(a * self.supply + b * other.supply, a * self.demand + b * other.demand,
                             a * self.soc + b * other.soc, a * self.soc_target + b * other.soc_target)


@dataclass(frozen=True)
class CostBreakdown:
    """Objective decomposition in $.

    ``operating`` has shape ``(N, C)`` and already carries the duration and
    day weights, exactly as in the objective.
    """

    capital: np.ndarray
    capacity_revenue: np.ndarray
    operating: np.ndarray

    def __post_init__(self):
        for name in ("capital", "capacity_revenue", "operating"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def operating_by_contingency(self) -> np.ndarray:
        return self.operating.sum(axis=0)

    @property
    def total(self) -> float:
        return float(self.capital.sum() - self.capacity_revenue.sum() + self.operating.sum())


@dataclass(frozen=True)
class Infeasible:
    """Marker returned by cost functions for inadmissible investments."""

    reason: str

    def __bool__(self):
        return False


@dataclass(frozen=True)
class Violation:
    constraint: str
    index: tuple
    residual: float


@dataclass(frozen=True)
class PlanningInstance:
    """Everything the builder needs: resource specs, storage physics, horizon and series."""

    specs: dict
    storage: StorageSpec
    horizon: Horizon
    series: ExogenousSeries

    def __post_init__(self):
        specs = {ResourceKind(k): v for k, v in dict(self.specs).items()}
        for kind, spec in specs.items():
            if spec.kind != kind:
                raise ValueError(f"spec registered as {kind.name} has kind {spec.kind.name}")
            if spec.n_periods != self.horizon.n_periods:
                raise ValueError(f"{kind.name.lower()} spec covers {spec.n_periods} periods, "
                                 f"horizon has {self.horizon.n_periods}")
        object.__setattr__(self, "specs", specs)
        self.series.check_horizon(self.horizon)

    def replace(self, **changes) -> "PlanningInstance":
        fields = dict(specs=self.specs, storage=self.storage, horizon=self.horizon, series=self.series)
        fields.update(changes)
        return PlanningInstance(**fields)
