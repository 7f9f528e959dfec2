from .backends import (
    BackendUnavailable,
    available_backends,
    get_backend,
    register_backend,
    resolve_backend_name,
)
from .branch_bound import solve_milp
from .mps import export_mps, read_mps
from .problem import LpProblem, Solution, SolverOptions, Status, relative_gap
from .simplex import solve_lp

__all__ = [
    "BackendUnavailable",
    "LpProblem",
    "Solution",
    "SolverOptions",
    "Status",
    "available_backends",
    "export_mps",
    "get_backend",
    "read_mps",
    "register_backend",
    "relative_gap",
    "resolve_backend_name",
    "solve_lp",
    "solve_milp",
]
