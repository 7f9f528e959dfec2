"""Experiment harness: solve, validate, report, and derive plot data."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .dataio.case import CaseData, build_case, with_load_value
from .dataio.config import CaseConfig
from .dataio.results import KEYS, ExperimentResult, experiment_metrics, write_results
from .formulation import (
    ExperimentConfig,
    ExtractionError,
    build_experiment_model,
    default_experiments,
    extract_solution,
)
from .model.operations import check_complementarity
from .model.types import SUPPLY, PlanningInstance
from .solver import Status, get_backend, resolve_backend_name

log = logging.getLogger(__name__)

TOTAL_KEY = "Solution quality | Total cost (M$)"


@dataclass
class RunOutcome:
    result: ExperimentResult
    x: np.ndarray | None
    ok: bool
    problems: list[str]


def experiment_instance(case: CaseConfig, config: ExperimentConfig, data: CaseData | None = None) -> PlanningInstance:
    """Planning instance for ``config``; served load gets a value only when shedding is allowed."""
    data = data if data is not None else build_case(case)
    if config.load_shedding:
        return with_load_value(data.instance, case.load_value_per_mwh)
    return data.instance


def _finite(v):
    return float(v) if v is not None and np.isfinite(v) else None


def solve_experiment(instance: PlanningInstance, config: ExperimentConfig, backend: str | None = None,
                     timing: bool = True) -> RunOutcome:
    """Build, solve, extract and check one experiment; never raises on solver outcomes."""
    name = resolve_backend_name(config.backend, backend)
    model = build_experiment_model(instance, config)
    t0 = time.perf_counter()
    sol = get_backend(name).submit(model.to_problem(), config.solver)
    wall = time.perf_counter() - t0
    problems: list[str] = []
    res = ExperimentResult(config.name, config, sol.status.value, _finite(sol.objective), _finite(sol.gap),
                           wall if timing else None, message=sol.message)
    x = None
    if sol.x is not None and sol.status in (Status.OPTIMAL, Status.GAP_FEASIBLE):
        x = sol.x
        try:
            plan, op, costs = extract_solution(model, sol.x)
        except ExtractionError as exc:
            problems.append(f"validation failed: {exc}")
        else:
            res.plan, res.op, res.costs = plan, op, costs
            prices_nonneg = bool(np.all(instance.series.supply_price >= 0)
                                 and np.all(instance.series.demand_price >= 0))
            both = check_complementarity(op)
            if both and prices_nonneg:
                problems.append(f"storage charges and discharges at once in {len(both)} cells, e.g. {both[0]}")
    elif sol.status == Status.INFEASIBLE:
        problems.append("model is infeasible: load cannot be served with the available investments"
                        + ("" if config.load_shedding else "; retry with load shedding to locate the shortfall"))
    elif sol.status == Status.TIME_LIMIT:
        problems.append(f"time limit reached without a feasible solution ({config.solver.time_limit:g} s)")
    else:
        problems.append(f"solver returned {sol.status.value}: {sol.message}")
    if sol.status == Status.GAP_FEASIBLE and res.gap is not None and res.gap > config.solver.mip_gap:
        problems.append(f"stopped at gap {sol.gap:.3g} above the target {config.solver.mip_gap:.3g}")
    res.metrics = experiment_metrics(res, instance)
    return RunOutcome(res, x, not problems, problems)


def _write_vectors(outcomes, base: Path) -> Path:
    path = base.with_suffix(".npz")
    arrays = {o.result.name: o.x for o in outcomes if o.x is not None}
    np.savez_compressed(path, **arrays)
    return path


def run_experiment(config: ExperimentConfig, case: CaseConfig, out: Path | str | None = None,
                   backend: str | None = None, timing: bool = True) -> RunOutcome:
    instance = experiment_instance(case, config)
    outcome = solve_experiment(instance, config, backend, timing)
    if out is not None:
        base = Path(out)
        write_results([outcome.result], base)
        _write_vectors([outcome], base.with_suffix(""))
    return outcome


def _suite_worker(args):
    instance, config, backend, timing = args
    try:
        return solve_experiment(instance, config, backend, timing)
    except Exception as exc:  # keep the other columns
        res = ExperimentResult(config.name, config, "error", None, None, None, message=str(exc))
        res.metrics = experiment_metrics(res, instance)
        return RunOutcome(res, None, False, [f"{type(exc).__name__}: {exc}"])


def run_suite(case: CaseConfig, configs=None, out: Path | str | None = None, jobs: int = 1,
              backend: str | None = None, timing: bool = True) -> list[RunOutcome]:
    """Solve every experiment; failures are recorded, not raised."""
    configs = list(configs) if configs is not None else default_experiments()
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise ValueError("experiment names must be unique")
    data = build_case(case)
    tasks = [(experiment_instance(case, c, data), c, backend, timing) for c in configs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_suite_worker, tasks))
    else:
        outcomes = []
        for t in tasks:
            outcomes.append(_suite_worker(t))
            r = outcomes[-1].result
            log.info("%s: %s, total %s", r.name, r.status, r.metrics.get(TOTAL_KEY))
    if out is not None:
        base = Path(out)
        base.mkdir(parents=True, exist_ok=True)
        write_results([o.result for o in outcomes], base / "results")
        _write_vectors(outcomes, base / "results")
        savings_table([o.result for o in outcomes]).to_csv(base / "savings.csv", index=False)
    return outcomes


def savings_table(results, baseline: str = "exp1") -> pd.DataFrame:
    """Total cost per experiment and its saving in percent of the baseline."""
    by_name = {r.name: r for r in results}
    base = by_name.get(baseline)
    base_cost = base.metrics.get(TOTAL_KEY) if base is not None else None
    rows = []
    for r in results:
        cost = r.metrics.get(TOTAL_KEY)
        pct = None
        if cost is not None and base_cost:
            pct = 100.0 * (base_cost - cost) / base_cost
        rows.append({"experiment": r.name, "status": r.status, "total_cost_musd": cost, "savings_pct": pct})
    return pd.DataFrame(rows)


def savings_decomposition(results) -> pd.DataFrame:
    """Successive differences along exp1 -> exp2 -> exp3 -> exp4.

    Deferred investment is exp1 - exp2, arbitrage exp2 - exp3 and capacity
    market exp3 - exp4; the three add up to exp1 - exp4.
    """
    by_name = {r.name: r.metrics.get(TOTAL_KEY) for r in results}
    chain = ["exp1", "exp2", "exp3", "exp4"]
    missing = [n for n in chain if by_name.get(n) is None]
    if missing:
        raise ValueError(f"savings decomposition needs solved {', '.join(missing)}")
    c = [by_name[n] for n in chain]
    labels = ["deferred_investment", "arbitrage", "capacity_market"]
    rows = [{"component": lab, "savings_musd": c[i] - c[i + 1],
             "percent_of_exp1": 100.0 * (c[i] - c[i + 1]) / c[0] if c[0] else 0.0}
            for i, lab in enumerate(labels)]
    rows.append({"component": "total", "savings_musd": c[0] - c[3],
                 "percent_of_exp1": 100.0 * (c[0] - c[3]) / c[0] if c[0] else 0.0})
    return pd.DataFrame(rows)


def supply_heatmap(result: ExperimentResult, period: int) -> pd.DataFrame:
    """Hourly supply over installed capacity per resource and contingency (0-based period)."""
    if result.op is None:
        raise ValueError(f"{result.name} has no solution")
    op, plan = result.op, result.plan
    n_periods = op.soc.shape[0]
    if not 0 <= period < n_periods:
        raise ValueError(f"period {period} outside the horizon")
    rows = []
    _, J, K, C = op.soc.shape
    for r, kind in enumerate(SUPPLY):
        for c in range(C):
            cap = plan.x_tot[r, period, c]
            vals = op.supply[r, period, :, :, c] / cap if cap > 1e-9 else np.zeros((J, K))
            vals = np.clip(vals, 0.0, 1.0)
            for j in range(J):
                rows.append({"resource": kind.name.lower(), "contingency": c, "day": j,
                             **{f"h{k:02d}": float(vals[j, k]) for k in range(K)}})
    return pd.DataFrame(rows)


def emit_plot_data(results, out_dir, years, year: int | None = None) -> list[Path]:
    """Savings decomposition (when exp1..exp4 are present) and per-experiment heatmaps."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    years = list(years)
    year = years[-1] if year is None else year
    if year not in years:
        raise ValueError(f"year {year} outside the horizon {years[0]}-{years[-1]}")
    written = []
    names = {r.name for r in results}
    if {"exp1", "exp2", "exp3", "exp4"} <= names:
        path = out / "savings_decomposition.csv"
        savings_decomposition(results).to_csv(path, index=False)
        written.append(path)
    for r in results:
        if r.op is None:
            continue
        path = out / f"heatmap_{r.name}_{year}.csv"
        supply_heatmap(r, years.index(year)).to_csv(path, index=False)
        written.append(path)
    return written


def override_config(config: ExperimentConfig, **changes) -> ExperimentConfig:
    """Apply non-``None`` overrides; ``solver`` fields may be given by name."""
    solver_fields = {"mip_gap", "time_limit", "node_limit"}
    solver = {k: changes.pop(k) for k in list(changes) if k in solver_fields and changes[k] is not None}
    clean = {k: v for k, v in changes.items() if v is not None}
    if solver:
        clean["solver"] = replace(config.solver, **solver)
    return config.replace(**clean) if clean else config


__all__ = [
    "KEYS", "RunOutcome", "emit_plot_data", "experiment_instance", "override_config", "run_experiment",
    "run_suite", "savings_decomposition", "savings_table", "solve_experiment", "supply_heatmap",
]
