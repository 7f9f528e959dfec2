"""Capacity and investment-cost functions.

Period arguments ``n`` are 1-based planning-period numbers.
"""
from __future__ import annotations

from typing import Mapping

import numpy as np

from .types import (
    KW_PER_MW,
    SUPPLY,
    Horizon,
    Infeasible,
    InvestmentPlan,
    ResourceKind,
    ResourceSpec,
)

INVEST_TOL = 1e-6

Specs = Mapping[ResourceKind, ResourceSpec]


def lifetime_window_start(n: int, lifetime: int) -> int:
    """First period whose investment is still live in period ``n``."""
    return max(1, n - lifetime + 1)


def _investments(plan, kind: ResourceKind) -> np.ndarray:
    if isinstance(plan, InvestmentPlan):
        return np.asarray(plan.x[SUPPLY.index(kind)], dtype=float)
    return np.asarray(plan, dtype=float).ravel()


def _live(x: np.ndarray, spec: ResourceSpec, n: int) -> np.ndarray:
    start = lifetime_window_start(n, spec.lifetime)
    return x[start - 1: n]


def _preinstalled(spec: ResourceSpec, n: int) -> np.ndarray:
    if n - 1 < spec.preinstalled.shape[0]:
        return spec.preinstalled[n - 1]
    return np.zeros(0)


def installed_capacity(plan, spec: ResourceSpec, n: int) -> float:
    """Live capacity of a backup or storage fleet in period ``n``.

    ``plan`` is an :class:`InvestmentPlan` or this resource's investment vector.
    """
    if spec.kind == ResourceKind.GRID:
        raise ValueError("grid capacity depends on the contingency; use grid_capacity")
    x = _investments(plan, spec.kind)
    return float(_preinstalled(spec, n).sum() + _live(x, spec, n).sum())


def grid_capacity(plan, spec: ResourceSpec, n: int, c: int) -> float:
    """Grid capacity in period ``n``, less the largest live unit when ``c`` is 1."""
    if spec.kind != ResourceKind.GRID:
        raise ValueError("grid_capacity expects the grid resource")
    x = _investments(plan, spec.kind)
    pre = _preinstalled(spec, n)
    live = _live(x, spec, n)
    largest = max(pre.max(initial=0.0), live.max(initial=0.0))
    return float(pre.sum() + live.sum() - c * largest)


def largest_grid_unit(plan, spec: ResourceSpec, n: int) -> float:
    x = _investments(plan, spec.kind)
    return float(max(_preinstalled(spec, n).max(initial=0.0), _live(x, spec, n).max(initial=0.0)))


def resource_capacity(plan, spec: ResourceSpec, n: int, c: int = 0) -> float:
    if spec.kind == ResourceKind.GRID:
        return grid_capacity(plan, spec, n, c)
    return installed_capacity(plan, spec, n)


def investment_cost(x: float, spec: ResourceSpec, n: int) -> float | Infeasible:
    """Cost in $ of adding ``x`` MW in period ``n``, or an :class:`Infeasible` marker."""
    if x < -INVEST_TOL:
        return Infeasible(f"negative investment {x}")
    if x <= INVEST_TOL:
        return 0.0
    if x < spec.min_invest - INVEST_TOL or x > spec.max_invest + INVEST_TOL:
        return Infeasible(
            f"{spec.kind.name.lower()} investment {x:g} MW outside [{spec.min_invest:g}, {spec.max_invest:g}]"
        )
    return float(spec.unit_cost[n - 1] * KW_PER_MW * x + spec.fixed_cost[n - 1])


def capital_costs(plan, specs: Specs, horizon: Horizon) -> np.ndarray | Infeasible:
    """Per-resource capital spending over the horizon, shape ``(3,)``."""
    out = np.zeros(len(SUPPLY))
    for r, kind in enumerate(SUPPLY):
        if kind not in specs:
            continue
        x = _investments(plan, kind) if isinstance(plan, InvestmentPlan) else np.asarray(plan)[r]
        for n in range(1, horizon.n_periods + 1):
            cost = investment_cost(float(x[n - 1]), specs[kind], n)
            if isinstance(cost, Infeasible):
                return cost
            out[r] += cost
    return out


def capacity_revenues(plan, specs: Specs, horizon: Horizon) -> np.ndarray:
    """Capacity-credit revenue per resource in $, shape ``(3,)``; grid earns none."""
    out = np.zeros(len(SUPPLY))
    for r, kind in enumerate(SUPPLY):
        if kind == ResourceKind.GRID or kind not in specs:
            continue
        spec = specs[kind]
        x = _investments(plan, kind) if isinstance(plan, InvestmentPlan) else np.asarray(plan)[r]
        for n in range(1, horizon.n_periods + 1):
            out[r] += spec.capacity_price[n - 1] * KW_PER_MW * installed_capacity(x, spec, n)
    return out


def net_investment_cost(plan, specs: Specs, horizon: Horizon) -> float | Infeasible:
    """Capital spending minus capacity-credit revenue, in $."""
    cap = capital_costs(plan, specs, horizon)
    if isinstance(cap, Infeasible):
        return cap
    return float(cap.sum() - capacity_revenues(plan, specs, horizon).sum())


def capacity_table(plan, specs: Specs, horizon: Horizon) -> np.ndarray:
    """``x_tot`` of shape ``(3, N, C)`` recomputed from the investments."""
    out = np.zeros((len(SUPPLY), horizon.n_periods, horizon.n_contingencies))
    for r, kind in enumerate(SUPPLY):
        if kind not in specs:
            continue
        x = _investments(plan, kind) if isinstance(plan, InvestmentPlan) else np.asarray(plan)[r]
        for n in range(1, horizon.n_periods + 1):
            for c in horizon.contingencies:
                out[r, n - 1, c] = resource_capacity(x, specs[kind], n, c)
    return out


def make_plan(x, specs: Specs, horizon: Horizon) -> InvestmentPlan:
    """Complete an investment vector ``(3, N)`` into a consistent plan."""
    x = np.asarray(x, dtype=float).reshape(len(SUPPLY), horizon.n_periods)
    z = (x > INVEST_TOL).astype(float)
    x_tot = capacity_table(x, specs, horizon)
    grid = specs.get(ResourceKind.GRID)
    if grid is None:
        x_max = np.zeros(horizon.n_periods)
    else:
        x_max = np.array([largest_grid_unit(x[1], grid, n) for n in range(1, horizon.n_periods + 1)])
    return InvestmentPlan(x, z, x_tot, x_max)
