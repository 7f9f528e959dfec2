"""Command-line front end.

Verbs: ``run``, ``suite``, ``flatten``, ``export-mps``, ``validate``. Case and
solver flags override the matching config-file keys; ``GRIDSTORE_BACKEND``
picks the solver backend when ``--backend`` is not given.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .dataio.case import build_case
from .dataio.config import CaseConfig, ConfigError, build_config, read_sections
from .dataio.results import ExperimentResult, experiment_metrics, write_results
from .dataio.series import load_timeseries
from .experiments import (
    emit_plot_data,
    experiment_instance,
    override_config,
    run_experiment,
    run_suite,
    savings_table,
)
from .formulation import ExperimentConfig, ExtractionError, build_experiment_model, default_experiments, extract_solution
from .model.operations import check_complementarity
from .model.types import ResourceKind, StorageSpec
from .peakshave import storage_upper_bound
from .solver import BackendUnavailable, export_mps

log = logging.getLogger("gridstore")

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2

# flag -> CaseConfig field
_CASE_FLAGS = {
    "n_periods": int, "start_year": int, "representative_days": int, "seed": int,
    "load_csv": Path, "price_csv": Path, "peak_csv": Path, "scarcity_csv": Path,
    "storage_cost_per_kwh": float, "capacity_price_per_kw_month": float, "load_value_per_mwh": float,
    "backup_price_per_mwh": float,
}


def _add_case_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("case (override [case]/[market]/[storage] keys)")
    g.add_argument("--config", type=Path, help="INI case file; defaults apply when omitted")
    for name, kind in _CASE_FLAGS.items():
        g.add_argument("--" + name.replace("_", "-"), dest=name, type=kind, default=None, metavar=name.upper())


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver (override [solver] keys)")
    g.add_argument("--mip-gap", type=float, default=None)
    g.add_argument("--time-limit-s", type=float, default=None, dest="time_limit")
    g.add_argument("--node-limit", type=int, default=None)
    g.add_argument("--backend", default=None, help="solver backend: reference or highs (env GRIDSTORE_BACKEND)")


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("experiment (override [experiment] keys)")
    g.add_argument("--experiment", default=None,
                   help="start from a named suite column (exp1..exp9) instead of the [experiment] section")
    g.add_argument("--market-mode", choices=("peak_only", "full"), default=None)
    g.add_argument("--investable", default=None, help="resource codes, e.g. g,s or b,g,s")
    g.add_argument("--cycle-scope", choices=("yearly", "daily"), default=None)
    g.add_argument("--load-shedding", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--exp-storage-cost-per-kwh", type=float, default=None, dest="exp_storage_cost")
    g.add_argument("--exp-capacity-price-per-kw-month", type=float, default=None, dest="exp_cap_price")


def _case(args) -> tuple[ExperimentConfig, CaseConfig]:
    sections = read_sections(args.config) if args.config else {}
    config, case = build_config(sections)
    changes = {k: getattr(args, k) for k in _CASE_FLAGS if getattr(args, k, None) is not None}
    if changes:
        try:
            case = replace(case, **changes).validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return config, case


def _experiment(args, base: ExperimentConfig) -> ExperimentConfig:
    config = base
    if args.experiment:
        named = {c.name: c for c in default_experiments(base.solver)}
        if args.experiment not in named:
            raise ConfigError(f"unknown experiment {args.experiment!r}; choose from {', '.join(named)}")
        config = replace(named[args.experiment], backend=base.backend, load_shedding=base.load_shedding)
    inv = None
    if args.investable is not None:
        codes = [c.strip() for c in args.investable.replace("+", ",").split(",") if c.strip()]
        inv = frozenset(ResourceKind(c) for c in codes)
    try:
        return override_config(
            config, market_mode=args.market_mode, investable=inv, cycle_scope=args.cycle_scope,
            load_shedding=args.load_shedding, storage_cost_per_kwh=args.exp_storage_cost,
            capacity_price_per_kw_month=args.exp_cap_price, mip_gap=args.mip_gap,
            time_limit=args.time_limit, node_limit=args.node_limit,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _solver_overrides(args, config: ExperimentConfig) -> ExperimentConfig:
    return override_config(config, mip_gap=args.mip_gap, time_limit=args.time_limit, node_limit=args.node_limit)


def _report(outcome) -> None:
    r = outcome.result
    total = r.metrics.get("Solution quality | Total cost (M$)")
    cost = "na" if total is None else f"{total:.3f} M$"
    print(f"{r.name}: {r.status}, total cost {cost}")
    for problem in outcome.problems:
        print(f"  {r.name}: {problem}", file=sys.stderr)


def cmd_run(args) -> int:
    base, case = _case(args)
    config = _experiment(args, base)
    outcome = run_experiment(config, case, args.out, args.backend, timing=not args.no_timing)
    _report(outcome)
    return EXIT_OK if outcome.ok else EXIT_FAILED


def cmd_suite(args) -> int:
    base, case = _case(args)
    configs = default_experiments(base.solver)
    configs = [_solver_overrides(args, replace(c, backend=base.backend)) for c in configs]
    if args.only:
        wanted = [n.strip() for n in args.only.split(",") if n.strip()]
        known = {c.name for c in configs}
        unknown = [n for n in wanted if n not in known]
        if unknown:
            raise ConfigError(f"unknown experiments: {', '.join(unknown)}")
        configs = [c for c in configs if c.name in wanted]
    outcomes = run_suite(case, configs, args.out, args.jobs, args.backend, timing=not args.no_timing)
    for o in outcomes:
        _report(o)
    results = [o.result for o in outcomes]
    print(savings_table(results).to_string(index=False, float_format=lambda v: f"{v:.3f}"))
    if args.out is not None:
        emit_plot_data(results, Path(args.out) / "plots", case.years, args.plot_year)
    return EXIT_OK if all(o.ok for o in outcomes) else EXIT_FAILED


def cmd_flatten(args) -> int:
    storage = StorageSpec(args.charge_efficiency, args.discharge_efficiency)
    if args.csv is not None:
        series = load_timeseries(args.csv, column=args.column)
        profiles = series.values.reshape(-1, 24)
    else:
        _, case = _case(args)
        profiles = build_case(case).base_load.values.reshape(-1, 24)
    power, duration = storage_upper_bound(profiles, storage)
    mean = float(profiles.mean())
    payload = {
        "days": int(profiles.shape[0]),
        "mean_load_mw": mean,
        "power_mw": power,
        "power_share_of_mean_load": power / mean if mean > 0 else None,
        "duration_h": duration,
    }
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_export_mps(args) -> int:
    base, case = _case(args)
    config = _experiment(args, base)
    model = build_experiment_model(experiment_instance(case, config), config)
    data = export_mps(model.to_problem(names=True))
    if args.out is None or str(args.out) == "-":
        sys.stdout.buffer.write(data)
    else:
        Path(args.out).write_bytes(data)
        print(f"wrote {args.out} ({model.n_vars} columns, {model.n_rows} rows)")
    return EXIT_OK


def cmd_validate(args) -> int:
    base, case = _case(args)
    config = _experiment(args, base)
    name = args.name or config.name
    with np.load(args.solution) as saved:
        if name not in saved:
            raise ConfigError(f"{args.solution} has no solution named {name!r}; found {', '.join(saved.files)}")
        x = saved[name]
    instance = experiment_instance(case, config)
    model = build_experiment_model(instance, config)
    if x.shape != (model.n_vars,):
        print(f"{name}: solution has {x.size} entries, model has {model.n_vars}", file=sys.stderr)
        return EXIT_FAILED
    try:
        plan, op, costs = extract_solution(model, x)
    except ExtractionError as exc:
        print(f"{name}: invalid: {exc}", file=sys.stderr)
        return EXIT_FAILED
    both = check_complementarity(op)
    if both and np.all(instance.series.supply_price >= 0) and np.all(instance.series.demand_price >= 0):
        print(f"{name}: simultaneous charge and discharge in {len(both)} cells", file=sys.stderr)
        return EXIT_FAILED
    if args.out is not None:
        res = ExperimentResult(name, config, "validated", costs.total, None, None, plan, op, costs)
        res.metrics = experiment_metrics(res, instance)
        write_results([res], args.out)
    print(f"{name}: valid, total cost {costs.total / 1e6:.3f} M$")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridstore", description="Storage and grid capacity planning for distribution systems.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="solve one experiment")
    _add_case_flags(p)
    _add_experiment_flags(p)
    _add_solver_flags(p)
    p.add_argument("--out", type=Path, default=None, help="results base path (.json, .csv, .npz)")
    p.add_argument("--no-timing", action="store_true", help="leave solve times out for byte-stable reports")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("suite", help="solve the nine-experiment suite")
    _add_case_flags(p)
    _add_solver_flags(p)
    p.add_argument("--only", default=None, help="comma-separated experiment names")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("--plot-year", type=int, default=None, help="heatmap year (default: last period)")
    p.add_argument("--no-timing", action="store_true")
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("flatten", help="storage power and duration that flatten every daily profile")
    _add_case_flags(p)
    p.add_argument("--csv", type=Path, default=None, help="hourly load CSV (default: the case load)")
    p.add_argument("--column", default=None)
    p.add_argument("--charge-efficiency", type=float, default=0.913)
    p.add_argument("--discharge-efficiency", type=float, default=0.913)
    p.set_defaults(func=cmd_flatten)

    p = sub.add_parser("export-mps", help="write the experiment MILP in fixed MPS format")
    _add_case_flags(p)
    _add_experiment_flags(p)
    p.add_argument("--out", default=None, help="file path, or - for stdout")
    p.set_defaults(func=cmd_export_mps, mip_gap=None, time_limit=None, node_limit=None)

    p = sub.add_parser("validate", help="re-check a saved solution vector")
    _add_case_flags(p)
    _add_experiment_flags(p)
    p.add_argument("solution", type=Path, help=".npz written by run or suite")
    p.add_argument("--name", default=None, help="entry in the .npz (default: experiment name)")
    p.add_argument("--out", type=Path, default=None, help="rewrite the report from the saved vector")
    p.set_defaults(func=cmd_validate, mip_gap=None, time_limit=None, node_limit=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, BackendUnavailable, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
