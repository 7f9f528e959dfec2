"""Operating cost, ex-post validation and dispatch metrics.

Index tuples in violation records and complementarity reports are 0-based
array positions ``(n, j, k, c)``; ``n`` arguments are 1-based periods.
"""
from __future__ import annotations

import numpy as np

from .capacity import Specs, capacity_table, capital_costs, capacity_revenues
from .types import (
    B,
    DG,
    DL,
    DS,
    G,
    S,
    CostBreakdown,
    ExogenousSeries,
    Horizon,
    Infeasible,
    InvestmentPlan,
    OperationPlan,
    ResourceKind,
    StorageSpec,
    Violation,
)

FEAS_TOL = 1e-6


def operating_cost(op: OperationPlan, series: ExogenousSeries, horizon: Horizon, n: int, c: int) -> float:
    """Weighted operating cost of period ``n`` under contingency ``c`` in $."""
    i = n - 1
    ys = op.supply[:, i, :, :, c]
    yd = op.demand[:, i, :, :, c]
    cell = (series.supply_price[:, i] * ys).sum(axis=0) - (series.demand_price[:, i] * yd).sum(axis=0)
    return float(horizon.duration_weights[c] * (horizon.day_weights @ cell.sum(axis=1)))


def operating_costs(op: OperationPlan, series: ExogenousSeries, horizon: Horizon) -> np.ndarray:
    out = np.zeros((horizon.n_periods, horizon.n_contingencies))
    for n in range(1, horizon.n_periods + 1):
        for c in horizon.contingencies:
            out[n - 1, c] = operating_cost(op, series, horizon, n, c)
    return out


def cost_breakdown(plan: InvestmentPlan, op: OperationPlan, specs: Specs, horizon: Horizon,
                   series: ExogenousSeries) -> CostBreakdown:
    capital = capital_costs(plan, specs, horizon)
    if isinstance(capital, Infeasible):
        raise ValueError(f"inadmissible investment plan: {capital.reason}")
    return CostBreakdown(capital, capacity_revenues(plan, specs, horizon),
                         operating_costs(op, series, horizon))


def _report(out: list, name: str, excess: np.ndarray, tol: float, offset=()):
    for idx in zip(*np.nonzero(excess > tol)):
        out.append(Violation(name, tuple(int(v) for v in offset) + tuple(int(v) for v in idx),
                             float(excess[idx])))


def validate_operation(op: OperationPlan, plan: InvestmentPlan, specs: Specs, storage: StorageSpec,
                       horizon: Horizon, series: ExogenousSeries, *, load_shedding: bool = True,
                       market_participation: bool = False, cycle_scope: str = "yearly",
                       tol: float = FEAS_TOL) -> list[Violation]:
    """Every constraint of the dispatch problem checked from first principles.

    Capacities are recomputed from ``plan.x``; the stored ``plan.x_tot`` and
    the investment bounds are checked as well.
    """
    out: list[Violation] = []
    N, J, K, C = horizon.shape
    series.check_horizon(horizon)
    if op.soc.shape != horizon.shape:
        raise ValueError("operation plan does not match the horizon")
    ys, yd, soc, y0 = op.supply, op.demand, op.soc, op.soc_target
    xt = capacity_table(plan, specs, horizon)

    # investments
    for r, kind in enumerate((ResourceKind.BACKUP, ResourceKind.GRID, ResourceKind.STORAGE)):
        spec = specs.get(kind)
        x, z = plan.x[r], plan.z[r]
        if spec is None:
            _report(out, "investment_unavailable", np.abs(x), tol, (r,))
            continue
        _report(out, "investment_min", spec.min_invest * z - x, tol, (r,))
        _report(out, "investment_max", x - spec.max_invest * z, tol, (r,))
        _report(out, "investment_binary", np.minimum(np.abs(z), np.abs(z - 1)), tol, (r,))
    _report(out, "capacity_total", np.abs(plan.x_tot - xt), tol)

    # sign
    _report(out, "nonneg_supply", -ys, tol)
    _report(out, "nonneg_demand", -yd, tol)
    _report(out, "nonneg_soc", -soc, tol)
    _report(out, "nonneg_soc_target", -y0, tol)

    _report(out, "balance", np.abs(ys.sum(axis=0) - yd.sum(axis=0)), tol)

    cap = xt[:, :, None, None, :]  # (3, N, 1, 1, C)
    _report(out, "supply_backup", ys[B] - cap[B], tol)
    _report(out, "supply_grid", ys[G] - cap[G], tol)
    _report(out, "supply_storage", ys[S] - cap[S], tol)
    _report(out, "demand_grid", yd[DG] - cap[G], tol)
    _report(out, "demand_storage", yd[DS] - cap[S], tol)
    load = series.load[..., None]
    if load_shedding:
        _report(out, "demand_load", yd[DL] - load, tol)
    else:
        _report(out, "demand_load", np.abs(yd[DL] - load), tol)

    # state of charge
    e_cap = storage.duration * xt[S, :, 0]
    _report(out, "soc_target_max", y0 - e_cap, tol)
    _report(out, "soc_max", soc - e_cap[:, None, None, None], tol)
    flow = horizon.dt * (storage.eta_c * yd[DS] - ys[S] / storage.eta_d)
    prev = np.concatenate([np.broadcast_to(y0[:, None, None, None], (N, J, 1, C)), soc[:, :, :-1, :]], axis=2)
    _report(out, "soc_recursion", np.abs(soc - prev - flow), tol)
    _report(out, "soc_terminal", np.abs(soc[:, :, -1, :] - y0[:, None, None]), tol)

    # cycle budget
    throughput = (horizon.dt / storage.eta_d) * ys[S].sum(axis=2)  # (N, J, C)
    if cycle_scope == "yearly":
        lhs = np.einsum("j,njc->nc", horizon.day_weights, throughput)
        rhs = storage.cycle_limit * e_cap[:, None]
        _report(out, "cycle_budget", lhs - rhs, tol * max(1.0, horizon.days_represented))
    elif cycle_scope == "daily":
        per_day = storage.cycle_limit / horizon.days_represented
        _report(out, "cycle_budget_daily", throughput - per_day * e_cap[:, None, None], tol)
    else:
        raise ValueError(f"unknown cycle scope {cycle_scope!r}")

    if market_participation:
        shortfall = np.maximum(yd[DL] - cap[G], 0.0)
        _report(out, "market_participation", ys[B] + ys[S] - shortfall, tol)
    return out


def check_complementarity(op: OperationPlan, tol: float = FEAS_TOL) -> list[tuple[int, int, int, int]]:
    """Cells where storage charges and discharges at the same time."""
    both = (op.demand[DS] > tol) & (op.supply[S] > tol)
    return [tuple(int(v) for v in idx) for idx in zip(*np.nonzero(both))]


def discharge_cycles(op: OperationPlan, storage: StorageSpec, x_tot_s: float, horizon: Horizon,
                     n: int, c: int) -> float:
    """Equivalent full discharge cycles in period ``n``, contingency ``c``."""
    energy = (horizon.dt / storage.eta_d) * float(horizon.day_weights @ op.supply[S, n - 1, :, :, c].sum(axis=1))
    if x_tot_s <= 0:
        if energy > FEAS_TOL:
            raise ValueError("storage discharges without installed capacity")
        return 0.0
    return energy / (storage.duration * x_tot_s)


def scarcity_supply_ratio(op: OperationPlan, events, plan: InvestmentPlan, periods=None) -> dict:
    """Worst-hour ``supply / capacity`` during scarcity events.

    Returns ``{(kind, c): ratio}`` for backup and storage; the ratio is
    ``None`` when the resource has no capacity in any event hour.
    ``periods`` optionally restricts events to 0-based period positions.
    """
    events = np.asarray(events, dtype=np.int64).reshape(-1, 3)
    if periods is not None:
        events = events[np.isin(events[:, 0], np.asarray(list(periods)))]
    n_c = op.supply.shape[-1]
    out = {}
    for kind, r in ((ResourceKind.BACKUP, B), (ResourceKind.STORAGE, S)):
        for c in range(n_c):
            ratios = []
            for n, j, k in events:
                cap = plan.x_tot[r, n, c]
                if cap > FEAS_TOL:
                    ratios.append(op.supply[r, n, j, k, c] / cap)
            out[(kind, c)] = float(min(ratios)) if ratios else None
    return out
