from .capacity import (
    resource_capacity,
    capacity_revenues,
    capacity_table,
    capital_costs,
    grid_capacity,
    installed_capacity,
    investment_cost,
    largest_grid_unit,
    lifetime_window_start,
    make_plan,
    net_investment_cost,
)
from .operations import (
    FEAS_TOL,
    check_complementarity,
    cost_breakdown,
    discharge_cycles,
    operating_cost,
    operating_costs,
    scarcity_supply_ratio,
    validate_operation,
)
from .types import (
    DEMAND,
    NON_GRID,
    SUPPLY,
    CostBreakdown,
    DemandKind,
    ExogenousSeries,
    Horizon,
    Infeasible,
    InvestmentPlan,
    OperationPlan,
    PlanningInstance,
    ResourceKind,
    ResourceSpec,
    StorageSpec,
    Violation,
)

__all__ = [name for name in dir() if not name.startswith("_") and name not in ("capacity", "operations", "types")]
