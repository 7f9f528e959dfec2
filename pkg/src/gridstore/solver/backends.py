"""Solver backends registered by name.

``reference`` (the in-package simplex and branch and bound) is always
available. ``highs`` wraps :func:`scipy.optimize.milp`. Unknown or broken
backends raise :class:`BackendUnavailable` instead of falling back.
"""
from __future__ import annotations

import os
import time
from typing import Callable, Protocol

import numpy as np

from .branch_bound import solve_milp
from .problem import LpProblem, Solution, SolverOptions, Status, relative_gap

ENV_VAR = "GRIDSTORE_BACKEND"
DEFAULT_BACKEND = "reference"


class BackendUnavailable(RuntimeError):
    """Configuration error: the requested backend cannot be used."""


class Backend(Protocol):
    name: str

    def submit(self, problem: LpProblem, options: SolverOptions) -> Solution: ...


class ReferenceBackend:
    name = "reference"

    def submit(self, problem: LpProblem, options: SolverOptions) -> Solution:
        return solve_milp(problem, options)


class HighsBackend:
    name = "highs"

    def __init__(self):
        try:
            from scipy.optimize import milp  # noqa: F401
        except ImportError as exc:  # pragma: no cover
            raise BackendUnavailable("scipy.optimize.milp is not available") from exc

    def submit(self, problem: LpProblem, options: SolverOptions) -> Solution:
        from scipy.optimize import Bounds, LinearConstraint, milp

        t0 = time.perf_counter()
        lo, hi = problem.row_bounds()
        cons = [LinearConstraint(problem.A, lo, hi)] if problem.n_rows else []
        res = milp(
            problem.c,
            constraints=cons,
            integrality=problem.integrality.astype(int),
            bounds=Bounds(problem.lb, problem.ub),
            options={"mip_rel_gap": options.mip_gap, "time_limit": options.time_limit,
                     "disp": False},
        )
        wall = time.perf_counter() - t0
        nodes = int(getattr(res, "mip_node_count", 0) or 0)
        if res.status == 2:
            return Solution(Status.INFEASIBLE, nodes=nodes, wall_time=wall, message=res.message)
        if res.status == 3:
            return Solution(Status.UNBOUNDED, nodes=nodes, wall_time=wall, message=res.message)
        if res.x is None:
            st = Status.TIME_LIMIT if res.status == 1 else Status.NUMERICAL
            return Solution(st, nodes=nodes, wall_time=wall, message=res.message)
        x = np.asarray(res.x, dtype=float)
        x[problem.integrality] = np.round(x[problem.integrality])
        obj = problem.objective(x)
        bound = getattr(res, "mip_dual_bound", None)
        bound = obj if bound is None or not problem.is_mip else float(bound) + problem.offset
        gap = relative_gap(obj, bound)
        if res.status == 0 and gap <= options.mip_gap:
            st = Status.OPTIMAL
        else:
            st = Status.GAP_FEASIBLE
        return Solution(st, x=x, objective=obj, bound=bound, gap=gap, nodes=nodes,
                        wall_time=wall, incumbents=[obj], message=res.message)


_REGISTRY: dict[str, Callable[[], Backend]] = {}


def register_backend(name: str, factory: Callable[[], Backend]) -> None:
    _REGISTRY[name] = factory


def available_backends() -> list[str]:
    return sorted(_REGISTRY)


def resolve_backend_name(configured: str | None = None, override: str | None = None) -> str:
    """Explicit override, then the environment variable, then config, then default."""
    return override or os.environ.get(ENV_VAR) or configured or DEFAULT_BACKEND


def get_backend(name: str) -> Backend:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise BackendUnavailable(
            f"unknown solver backend {name!r}; registered: {', '.join(available_backends())}"
        ) from None
    return factory()


register_backend("reference", ReferenceBackend)
register_backend("highs", HighsBackend)
