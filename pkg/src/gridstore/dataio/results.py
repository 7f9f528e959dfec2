"""Experiment metrics in the case-study table layout, and their serialization."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..formulation.config import ExperimentConfig
from ..model.operations import discharge_cycles, scarcity_supply_ratio
from ..model.types import (
    DG,
    DL,
    DS,
    B,
    G,
    S,
    CostBreakdown,
    InvestmentPlan,
    OperationPlan,
    PlanningInstance,
    ResourceKind,
)

NA = None
MILLION = 1e6
GWH = 1e3

# (group, label); "- x" rows break down the nearest row above them
ROWS: tuple[tuple[str, str], ...] = (
    ("Parameters", "Market participation"),
    ("Parameters", "Available investments"),
    ("Parameters", "Storage cost ($/kWh)"),
    ("Parameters", "Cycle limit"),
    ("Parameters", "Cap. price ($/kW-month)"),
    ("Solution quality", "Total cost (M$)"),
    ("Solution quality", "Solve time (s)"),
    ("Solution quality", "Maximum MIP gap (%)"),
    ("Costs (M$)", "Total operating"),
    ("Costs (M$)", "- base case"),
    ("Costs (M$)", "- contingency"),
    ("Costs (M$)", "Total capital"),
    ("Costs (M$)", "- backup"),
    ("Costs (M$)", "- grid"),
    ("Costs (M$)", "- storage"),
    ("Costs (M$)", "Total capacity payment"),
    ("Costs (M$)", "- backup"),
    ("Costs (M$)", "- grid"),
    ("Costs (M$)", "- storage"),
    ("Investment decisions (MW)", "Terminal capacity"),
    ("Investment decisions (MW)", "- backup"),
    ("Investment decisions (MW)", "- grid"),
    ("Investment decisions (MW)", "- storage"),
    ("Investment decisions (MW)", "Total investment"),
    ("Investment decisions (MW)", "- backup"),
    ("Investment decisions (MW)", "- grid"),
    ("Investment decisions (MW)", "- storage"),
) + tuple(
    (f"Operating decisions: {case} (GWh/yr)", label)
    for case in ("Base case", "Contingency")
    for label in ("Demand (w/o storage)", "- grid", "- load", "- storage",
                  "Supply (w/o storage)", "- backup", "- grid", "- storage")
) + (
    ("Yearly discharge cycles (#)", "Average (base case)"),
    ("Yearly discharge cycles (#)", "Maximum (base case)"),
    ("Yearly discharge cycles (#)", "Average (contingency)"),
    ("Yearly discharge cycles (#)", "Maximum (contingency)"),
    ("Minimum scarcity supply ratio (-)", "Backup (base case)"),
    ("Minimum scarcity supply ratio (-)", "Storage (base case)"),
    ("Minimum scarcity supply ratio (-)", "Backup (contingency)"),
    ("Minimum scarcity supply ratio (-)", "Storage (contingency)"),
)


def _keys(rows) -> tuple[str, ...]:
    out, parent = [], ""
    for group, label in rows:
        if label.startswith("- "):
            out.append(f"{group} | {parent} | {label[2:]}")
        else:
            parent = label
            out.append(f"{group} | {label}")
    return tuple(out)


KEYS = _keys(ROWS)
if len(set(KEYS)) != len(KEYS):
    raise AssertionError("duplicate result rows")


def row_key(group: str, label: str, parent: str | None = None) -> str:
    return f"{group} | {parent} | {label}" if parent else f"{group} | {label}"


@dataclass
class ExperimentResult:
    name: str
    config: ExperimentConfig
    status: str
    objective: float | None
    gap: float | None
    wall_time: float
    plan: InvestmentPlan | None = None
    op: OperationPlan | None = None
    costs: CostBreakdown | None = None
    metrics: dict = field(default_factory=dict)
    message: str = ""

    @property
    def solved(self) -> bool:
        return self.costs is not None


def parameter_rows(config: ExperimentConfig) -> dict:
    inv = "+".join(k.value for k in (ResourceKind.BACKUP, ResourceKind.GRID, ResourceKind.STORAGE)
                   if k in config.investable)
    has_storage = ResourceKind.STORAGE in config.investable
    return {
        KEYS[0]: "Peak" if config.market_restricted else "Full",
        KEYS[1]: inv,
        KEYS[2]: config.storage_cost_per_kwh if has_storage else NA,
        KEYS[3]: config.cycle_scope,
        KEYS[4]: (config.capacity_price_per_kw_month if config.capacity_credits else NA),
    }


def _energy(values: np.ndarray, instance: PlanningInstance) -> float:
    """Average yearly energy in GWh of a ``(N, J, K)`` power array."""
    h = instance.horizon
    total = h.dt * float(np.einsum("j,njk->", h.day_weights, values))
    return total / h.n_periods / GWH


def experiment_metrics(result: ExperimentResult, instance: PlanningInstance) -> dict:
    """Every numeric row of the table for one solved experiment."""
    out = dict(parameter_rows(result.config))
    cfg = result.config
    out[row_key("Solution quality", "Total cost (M$)")] = (result.costs.total / MILLION) if result.solved else NA
    out[row_key("Solution quality", "Solve time (s)")] = result.wall_time
    out[row_key("Solution quality", "Maximum MIP gap (%)")] = None if result.gap is None else 100.0 * result.gap
    if not result.solved:
        return out
    plan, op, costs = result.plan, result.op, result.costs
    h = instance.horizon
    Tc = np.asarray(h.duration_weights)
    inv = cfg.investable

    per_c = costs.operating.sum(axis=0)
    unweighted = np.where(Tc > 0, per_c / np.where(Tc > 0, Tc, 1.0), 0.0)
    g = "Costs (M$)"
    out[row_key(g, "Total operating")] = float(per_c.sum()) / MILLION
    out[row_key(g, "base case", "Total operating")] = float(unweighted[0]) / MILLION
    out[row_key(g, "contingency", "Total operating")] = float(unweighted[1]) / MILLION if h.n_contingencies > 1 else NA
    out[row_key(g, "Total capital")] = float(costs.capital.sum()) / MILLION
    kinds = (("backup", B, ResourceKind.BACKUP), ("grid", G, ResourceKind.GRID), ("storage", S, ResourceKind.STORAGE))
    for name, r, kind in kinds:
        out[row_key(g, name, "Total capital")] = float(costs.capital[r]) / MILLION if kind in inv else NA
    keys = [k for k in KEYS if k.startswith(g)]
    pay = keys[-4:]
    if cfg.capacity_credits:
        out[pay[0]] = -float(costs.capacity_revenue.sum()) / MILLION
        out[pay[1]] = -float(costs.capacity_revenue[B]) / MILLION
        out[pay[2]] = NA
        out[pay[3]] = -float(costs.capacity_revenue[S]) / MILLION
    else:
        for k in pay:
            out[k] = NA

    g = "Investment decisions (MW)"
    keys = [k for k in KEYS if k.startswith(g)]
    terminal = plan.x_tot[:, -1, 0]
    out[keys[0]] = float(terminal.sum())
    for i, (_, r, _) in enumerate(kinds):
        out[keys[1 + i]] = float(terminal[r])
    out[keys[4]] = float(plan.x.sum())
    for i, (_, r, kind) in enumerate(kinds):
        out[keys[5 + i]] = float(plan.x[r].sum()) if kind in inv else NA

    for c, case in enumerate(("Base case", "Contingency")):
        keys = [k for k in KEYS if k.startswith(f"Operating decisions: {case}")]
        if c >= h.n_contingencies:
            for k in keys:
                out[k] = NA
            continue
        ys = op.supply[..., c]
        yd = op.demand[..., c]
        e = {name: _energy(arr, instance) for name, arr in (
            ("dg", yd[DG]), ("dl", yd[DL]), ("ds", yd[DS]), ("sb", ys[B]), ("sg", ys[G]), ("ss", ys[S]))}
        vals = [e["dg"] + e["dl"], e["dg"], e["dl"], e["ds"], e["sb"] + e["sg"], e["sb"], e["sg"], e["ss"]]
        out.update(dict(zip(keys, vals)))

    keys = [k for k in KEYS if k.startswith("Yearly discharge cycles")]
    for c in range(2):
        if c >= h.n_contingencies:
            out[keys[2 * c]] = out[keys[2 * c + 1]] = NA
            continue
        cyc = [discharge_cycles(op, instance.storage, float(plan.x_tot[S, n - 1, 0]), h, n, c)
               for n in range(1, h.n_periods + 1)]
        out[keys[2 * c]] = float(np.mean(cyc))
        out[keys[2 * c + 1]] = float(np.max(cyc))

    keys = [k for k in KEYS if k.startswith("Minimum scarcity")]
    events = instance.series.scarcity_events
    ratios = scarcity_supply_ratio(op, events, plan) if len(events) else {}
    for i, (kind, c) in enumerate(((ResourceKind.BACKUP, 0), (ResourceKind.STORAGE, 0),
                                   (ResourceKind.BACKUP, 1), (ResourceKind.STORAGE, 1))):
        val = ratios.get((kind, c))
        out[keys[i]] = NA if val is None else float(val)
    return out


def format_cell(key: str, value) -> str:
    if value is None:
        return "na"
    if isinstance(value, str):
        return value
    if isinstance(value, float) and math.isnan(value):
        return "na"
    return f"{value:.3f}"


def _plan_json(res: ExperimentResult) -> dict | None:
    if res.plan is None:
        return None
    return {"x": res.plan.x.tolist(), "z": res.plan.z.tolist(), "x_tot": res.plan.x_tot.tolist(),
            "x_max": res.plan.x_max.tolist()}


def write_results(results, path) -> tuple[Path, Path]:
    """Write ``<path>.json`` (full precision) and ``<path>.csv`` (table, 3 decimals)."""
    base = Path(path)
    if base.suffix in (".json", ".csv"):
        base = base.with_suffix("")
    base.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "rows": [list(r) for r in ROWS],
        "experiments": [
            {"name": r.name, "status": r.status, "objective": r.objective, "gap": r.gap,
             "wall_time": r.wall_time, "message": r.message,
             "metrics": {k: r.metrics.get(k) for k in KEYS}, "plan": _plan_json(r)}
            for r in results
        ],
    }
    json_path = base.with_suffix(".json")
    json_path.write_text(json.dumps(payload, indent=2, allow_nan=False) + "\n")
    csv_path = base.with_suffix(".csv")
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["group", "row"] + [r.name for r in results])
        for (group, label), key in zip(ROWS, KEYS):
            writer.writerow([group, label] + [format_cell(key, r.metrics.get(key)) for r in results])
    return json_path, csv_path


def read_results(path) -> dict[str, dict]:
    """Metrics per experiment name from a JSON written by :func:`write_results`."""
    p = Path(path)
    if p.suffix != ".json":
        p = p.with_suffix(".json")
    data = json.loads(p.read_text())
    return {e["name"]: e["metrics"] for e in data["experiments"]}
