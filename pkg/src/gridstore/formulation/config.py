from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..model.types import ResourceKind
from ..solver.problem import SolverOptions

MARKET_MODES = ("peak_only", "full")
CYCLE_SCOPES = ("yearly", "daily")


@dataclass(frozen=True)
class BigMConstants:
    """Constants of the disjunctive market-participation rows (MW).

    ``upper1`` has shape ``(N, J, K, C)``, ``upper2`` has shape ``(N, J, K)``.
    """

    lower1: float
    lower2: float
    upper1: np.ndarray
    upper2: np.ndarray
    storage_buildout: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment column.

    ``capacity_price_per_kw_month`` overrides the resource capacity prices
    for backup and storage (``None`` keeps them). ``peak_only`` imposes the
    market-participation limit and drops capacity credits.
    """

    name: str = "experiment"
    market_mode: str = "full"
    investable: frozenset = frozenset({ResourceKind.BACKUP, ResourceKind.GRID, ResourceKind.STORAGE})
    storage_cost_per_kwh: float | None = None
    cycle_scope: str = "yearly"
    capacity_price_per_kw_month: float | None = None
    load_shedding: bool = False
    solver: SolverOptions = field(default_factory=SolverOptions)
    backend: str | None = None

    def __post_init__(self):
        if self.market_mode not in MARKET_MODES:
            raise ValueError(f"market_mode must be one of {MARKET_MODES}")
        if self.cycle_scope not in CYCLE_SCOPES:
            raise ValueError(f"cycle_scope must be one of {CYCLE_SCOPES}")
        inv = frozenset(ResourceKind(k) for k in self.investable)
        object.__setattr__(self, "investable", inv)
        if self.storage_cost_per_kwh is not None and self.storage_cost_per_kwh < 0:
            raise ValueError("storage cost must be nonnegative")
        if self.capacity_price_per_kw_month is not None and self.capacity_price_per_kw_month < 0:
            raise ValueError("capacity price must be nonnegative")

    @property
    def market_restricted(self) -> bool:
        return self.market_mode == "peak_only"

    @property
    def capacity_credits(self) -> bool:
        return self.market_mode == "full"

    def replace(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


def _inv(codes: str) -> frozenset:
    return frozenset(ResourceKind(c) for c in codes)


CAPACITY_PRICE = 3.064


def default_experiments(solver: SolverOptions | None = None) -> list[ExperimentConfig]:
    """The nine experiment columns of the case study."""
    s = solver or SolverOptions()
    rows = [
        ("exp1", "peak_only", "g", None, "yearly", None),
        ("exp2", "peak_only", "gs", 604.0, "yearly", None),
        ("exp3", "full", "gs", 604.0, "yearly", 0.0),
        ("exp4", "full", "gs", 604.0, "yearly", CAPACITY_PRICE),
        ("exp5", "full", "gs", 604.0, "daily", 0.0),
        ("exp6", "full", "bgs", 604.0, "yearly", 0.0),
        ("exp7", "full", "bgs", 604.0, "yearly", CAPACITY_PRICE),
        ("exp8", "peak_only", "gs", 1.0, "yearly", None),
        ("exp9", "full", "gs", 1.0, "yearly", 0.0),
    ]
    return [
        ExperimentConfig(name=n, market_mode=m, investable=_inv(inv), storage_cost_per_kwh=cost,
                         cycle_scope=cyc, capacity_price_per_kw_month=cap, solver=s)
        for n, m, inv, cost, cyc, cap in rows
    ]
