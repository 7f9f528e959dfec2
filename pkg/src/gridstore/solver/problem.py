"""Problem, option and solution containers shared by all backends."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

SENSES = ("L", "E", "G")


class Status(str, Enum):
    OPTIMAL = "optimal"
    GAP_FEASIBLE = "gap_feasible"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    TIME_LIMIT = "time_limit"
    NUMERICAL = "numerical_failure"


@dataclass
class LpProblem:
    """``min c @ x + offset`` s.t. ``A x (<=|=|>=) rhs`` and ``lb <= x <= ub``.

    ``integrality`` flags binary variables (bounds are clipped to [0, 1]).
    ``priority`` orders branching: higher values are branched on first.
    """

    c: np.ndarray
    A: sp.csr_matrix
    senses: np.ndarray
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integrality: np.ndarray | None = None
    priority: np.ndarray | None = None
    var_names: list[str] | None = None
    row_names: list[str] | None = None
    name: str = "PROBLEM"
    offset: float = 0.0

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        A = sp.csr_matrix(self.A, dtype=float) if self.A is not None else sp.csr_matrix((0, n))
        if A.shape[1] != n:
            raise ValueError(f"A has {A.shape[1]} columns, objective has {n}")
        A.sum_duplicates()
        A.eliminate_zeros()
        self.A = A
        m = A.shape[0]
        self.senses = np.asarray(self.senses if self.senses is not None else [], dtype="<U1").ravel()
        self.rhs = np.asarray(self.rhs if self.rhs is not None else [], dtype=float).ravel()
        if self.senses.size != m or self.rhs.size != m:
            raise ValueError("senses/rhs length must match the number of rows")
        bad = set(self.senses.tolist()) - set(SENSES)
        if bad:
            raise ValueError(f"unknown constraint senses {sorted(bad)}")
        self.lb = np.broadcast_to(np.asarray(self.lb, dtype=float), (n,)).copy()
        self.ub = np.broadcast_to(np.asarray(self.ub, dtype=float), (n,)).copy()
        if self.integrality is None:
            self.integrality = np.zeros(n, dtype=bool)
        self.integrality = np.asarray(self.integrality, dtype=bool).ravel()
        if self.integrality.size != n:
            raise ValueError("integrality length must match the number of variables")
        self.lb[self.integrality] = np.maximum(self.lb[self.integrality], 0.0)
        self.ub[self.integrality] = np.minimum(self.ub[self.integrality], 1.0)
        if self.priority is None:
            self.priority = np.zeros(n, dtype=np.int64)
        self.priority = np.asarray(self.priority, dtype=np.int64).ravel()
        if np.any(np.isnan(self.lb)) or np.any(np.isnan(self.ub)):
            raise ValueError("NaN variable bound")
        if np.any(np.isnan(self.c)) or np.any(np.isnan(self.rhs)):
            raise ValueError("NaN in objective or right-hand side")

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def is_mip(self) -> bool:
        return bool(self.integrality.any())

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Activity interval ``[lo, hi]`` for every row."""
        lo = np.where(self.senses == "L", -np.inf, self.rhs)
        hi = np.where(self.senses == "G", np.inf, self.rhs)
        return lo, hi

    def with_bounds(self, lb: np.ndarray, ub: np.ndarray) -> "LpProblem":
        return LpProblem(
            self.c, self.A, self.senses, self.rhs, lb, ub,
            integrality=self.integrality, priority=self.priority,
            var_names=self.var_names, row_names=self.row_names,
            name=self.name, offset=self.offset,
        )

    def relaxation(self) -> "LpProblem":
        p = self.with_bounds(self.lb, self.ub)
        p.integrality = np.zeros(self.n_vars, dtype=bool)
        return p

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x + self.offset)

    def max_violation(self, x: np.ndarray) -> float:
        """Largest absolute bound or row violation of ``x``."""
        x = np.asarray(x, dtype=float)
        viol = 0.0
        if x.size:
            viol = max(viol, float(np.max(np.maximum(self.lb - x, 0.0), initial=0.0)))
            viol = max(viol, float(np.max(np.maximum(x - self.ub, 0.0), initial=0.0)))
        if self.n_rows:
            act = self.A @ x
            lo, hi = self.row_bounds()
            viol = max(viol, float(np.max(np.maximum(lo - act, 0.0))))
            viol = max(viol, float(np.max(np.maximum(act - hi, 0.0))))
        return viol


@dataclass
class SolverOptions:
    mip_gap: float = 1e-5
    time_limit: float = 14400.0
    feas_tol: float = 1e-7
    int_tol: float = 1e-6
    node_limit: int | None = None
    opt_tol: float = 1e-9
    refactor_every: int = 64
    bland_after: int = 1000
    max_iter: int | None = None

    def __post_init__(self):
        for name in ("mip_gap", "time_limit", "feas_tol", "int_tol", "opt_tol"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.node_limit is not None and self.node_limit < 0:
            raise ValueError("node_limit must be nonnegative")


@dataclass
class Solution:
    status: Status
    x: np.ndarray | None = None
    objective: float = float("nan")
    bound: float = float("nan")
    gap: float = float("nan")
    nodes: int = 0
    iterations: int = 0
    wall_time: float = 0.0
    incumbents: list[float] = field(default_factory=list)
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status in (Status.OPTIMAL, Status.GAP_FEASIBLE)


def relative_gap(incumbent: float, bound: float) -> float:
    """``|incumbent - bound| / |incumbent|`` with the zero-objective case handled."""
    if not np.isfinite(incumbent):
        return float("inf")
    if not np.isfinite(bound):
        return float("inf")
    diff = max(incumbent - bound, 0.0)
    if diff == 0.0:
        return 0.0
    return diff / max(abs(incumbent), 1e-10)
