"""Best-bound-first branch and bound over binary variables.

Every node tightens bounds by activity propagation, drops fixed columns and
rows already implied by the bounds, then cold-solves the remaining LP with
the reference simplex.
"""
from __future__ import annotations

import heapq
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels as kn
from .problem import LpProblem, Solution, SolverOptions, Status, relative_gap
from .simplex import solve_lp

_PROP_ROUNDS = 50


@dataclass
class Reduced:
    problem: LpProblem
    cols: np.ndarray
    x_fixed: np.ndarray

    def expand(self, xr: np.ndarray) -> np.ndarray:
        x = self.x_fixed.copy()
        x[self.cols] = xr
        return x


def propagate(problem: LpProblem, lb: np.ndarray, ub: np.ndarray, int_tol: float = 1e-6):
    """Tighten ``[lb, ub]`` from row activities. Returns ``(lb, ub, infeasible)``."""
    A = problem.A
    rlo, rhi = problem.row_bounds()
    return kn.propagate(
        A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data,
        rlo, rhi, lb.astype(float).copy(), ub.astype(float).copy(),
        problem.integrality, int_tol, _PROP_ROUNDS,
    )


def reduce_problem(problem: LpProblem, lb: np.ndarray, ub: np.ndarray, tol: float = 1e-9) -> Reduced:
    """Remove fixed columns and rows whose activity range already satisfies them."""
    fixed = ub - lb <= tol
    x_fixed = np.where(fixed, 0.5 * (lb + ub), 0.0)
    cols = np.flatnonzero(~fixed)
    A = problem.A
    shift = A @ x_fixed
    Af = A[:, cols].tocsr()
    lbf, ubf = lb[cols], ub[cols]
    pos = Af.multiply(Af > 0).tocsr()
    neg = Af.multiply(Af < 0).tocsr()
    with np.errstate(invalid="ignore"):
        amin = _safe_dot(pos, lbf) + _safe_dot(neg, ubf)
        amax = _safe_dot(pos, ubf) + _safe_dot(neg, lbf)
    rlo, rhi = problem.row_bounds()
    rlo = rlo - shift
    rhi = rhi - shift
    scale = 1.0 + np.abs(rlo[np.isfinite(rlo)]).max(initial=0.0) if rlo.size else 1.0
    slack = tol * scale
    redundant = (amin >= rlo - slack) & (amax <= rhi + slack)
    rows = np.flatnonzero(~redundant)
    Ar = Af[rows]
    lo_r, hi_r = rlo[rows], rhi[rows]
    senses = np.where(np.isneginf(lo_r), "L", np.where(np.isposinf(hi_r), "G", "E"))
    ranged = (senses == "E") & (lo_r != hi_r)
    if ranged.any():
        # split ranged rows into a <= and a >= row
        extra = np.flatnonzero(ranged)
        Ar = sp.vstack([Ar, Ar[extra]], format="csr")
        senses = np.concatenate([np.where(ranged, "G", senses), np.full(extra.size, "L")])
        rhs = np.concatenate([np.where(senses[: rows.size] == "L", hi_r, lo_r), hi_r[extra]])
    else:
        rhs = np.where(senses == "L", hi_r, lo_r)
    c = problem.c[cols]
    red = LpProblem(c, Ar, senses, rhs, lbf, ubf, name=problem.name,
                    offset=problem.offset + float(problem.c @ x_fixed))
    return Reduced(red, cols, x_fixed)


def _safe_dot(M: sp.csr_matrix, v: np.ndarray) -> np.ndarray:
    """``M @ v`` where ``0 * inf`` counts as 0 and mixed infinities as inf."""
    if not np.all(np.isfinite(v)):
        finite = np.where(np.isfinite(v), v, 0.0)
        out = M @ finite
        inf_part = M @ np.where(np.isfinite(v), 0.0, np.sign(v))
        return np.where(inf_part > 0, np.inf, np.where(inf_part < 0, -np.inf, out))
    return M @ v


def _solve_node(problem, lb, ub, opts, deadline):
    lb, ub, infeasible = propagate(problem, lb, ub, opts.int_tol)
    if infeasible or np.any(lb > ub + opts.feas_tol):
        return Solution(Status.INFEASIBLE), lb, ub
    ub = np.maximum(ub, lb)
    red = reduce_problem(problem, lb, ub)
    sol = solve_lp(red.problem, opts, deadline)
    if sol.status == Status.OPTIMAL:
        sol.x = red.expand(sol.x)
        sol.objective = problem.objective(sol.x)
    return sol, lb, ub


def _fractional(x, is_int, tol):
    f = np.abs(x - np.round(x))
    return is_int & (f > tol), f


def _pick_branch(x, problem, lb, ub, tol):
    frac_mask, f = _fractional(x, problem.integrality, tol)
    if not frac_mask.any():
        return -1
    cand = np.flatnonzero(frac_mask)
    pr = problem.priority[cand]
    cand = cand[pr == pr.max()]
    score = -np.abs(x[cand] - 0.5)
    best = score.max()
    return int(cand[np.flatnonzero(score == best)[0]])


def _round_dive(problem, x, lb, ub, opts, deadline):
    """Fix binaries class by class to their rounded LP values and re-solve."""
    is_int = problem.integrality
    lb, ub = lb.copy(), ub.copy()
    for p in sorted(set(problem.priority[is_int].tolist()), reverse=True):
        idx = np.flatnonzero(is_int & (problem.priority == p) & (ub - lb > 0.5))
        r = np.round(x[idx])
        lb[idx] = r
        ub[idx] = r
        lb, ub, infeasible = propagate(problem, lb, ub, opts.int_tol)
        if infeasible or np.any(lb > ub + opts.feas_tol):
            return None
        ub = np.maximum(ub, lb)
    sol, _, _ = _solve_node(problem, lb, ub, opts, deadline)
    if sol.status != Status.OPTIMAL:
        return None
    frac, _ = _fractional(sol.x, is_int, opts.int_tol)
    if frac.any():
        return None
    return sol


def solve_milp(problem: LpProblem, options: SolverOptions | None = None) -> Solution:
    """Minimise ``problem`` with binaries flagged in ``problem.integrality``.

    Nodes are explored best bound first (deeper nodes, then older nodes win
    ties). Branching picks the most fractional binary of the highest
    priority class, lowest index on ties.
    """
    opts = options or SolverOptions()
    t0 = time.perf_counter()
    deadline = t0 + opts.time_limit
    is_int = problem.integrality
    if not problem.is_mip:
        sol = solve_lp(problem, opts, deadline)
        sol.incumbents = [sol.objective] if sol.ok else []
        return sol

    inc_x, inc_obj = None, np.inf
    history: list[float] = []
    nodes = 0
    iterations = 0
    lost = False
    messages = []

    def accept(sol):
        nonlocal inc_x, inc_obj
        x = sol.x.copy()
        x[is_int] = np.round(x[is_int])
        obj = problem.objective(x)
        if obj < inc_obj - 1e-12 * max(1.0, abs(obj)):
            inc_x, inc_obj = x, obj
            history.append(obj)

    heap: list[tuple] = []
    counter = 0
    heapq.heappush(heap, (-np.inf, 0, counter, problem.lb.copy(), problem.ub.copy()))
    status = None
    while heap:
        best_open = heap[0][0]
        if inc_x is not None and relative_gap(inc_obj, best_open) <= opts.mip_gap:
            break
        if time.perf_counter() > deadline:
            status = Status.TIME_LIMIT
            break
        if opts.node_limit is not None and nodes >= opts.node_limit:
            status = Status.TIME_LIMIT
            messages.append("node limit reached")
            break
        parent_bound, negdepth, _, lb, ub = heapq.heappop(heap)
        if inc_x is not None and relative_gap(inc_obj, parent_bound) <= opts.mip_gap:
            continue
        nodes += 1
        sol, lb, ub = _solve_node(problem, lb, ub, opts, deadline)
        iterations += sol.iterations
        if sol.status == Status.INFEASIBLE:
            continue
        if sol.status == Status.UNBOUNDED:
            if nodes == 1:
                return Solution(Status.UNBOUNDED, nodes=nodes, iterations=iterations,
                                wall_time=time.perf_counter() - t0)
            continue
        if sol.status == Status.TIME_LIMIT:
            status = Status.TIME_LIMIT
            heapq.heappush(heap, (parent_bound, negdepth, counter, lb, ub))
            break
        if sol.status != Status.OPTIMAL:
            lost = True
            messages.append(f"node {nodes}: {sol.status.value}")
            continue
        bound = max(sol.objective, parent_bound)
        if inc_x is not None and relative_gap(inc_obj, bound) <= opts.mip_gap:
            continue
        j = _pick_branch(sol.x, problem, lb, ub, opts.int_tol)
        if j < 0:
            accept(sol)
            continue
        if nodes == 1 or nodes % 50 == 0:
            heur = _round_dive(problem, sol.x, lb, ub, opts, deadline)
            if heur is not None:
                iterations += heur.iterations
                accept(heur)
        depth = -negdepth + 1
        for val in (0.0, 1.0) if sol.x[j] < 0.5 else (1.0, 0.0):
            clb, cub = lb.copy(), ub.copy()
            clb[j] = cub[j] = val
            counter += 1
            heapq.heappush(heap, (bound, -depth, counter, clb, cub))

    best_open = min((h[0] for h in heap), default=np.inf)
    wall = time.perf_counter() - t0
    if inc_x is None:
        if status == Status.TIME_LIMIT:
            st = Status.TIME_LIMIT
        elif lost:
            st = Status.NUMERICAL
        else:
            st = Status.INFEASIBLE
        return Solution(st, nodes=nodes, iterations=iterations, wall_time=wall,
                        bound=best_open, message="; ".join(messages))
    bound = min(best_open, inc_obj)
    gap = relative_gap(inc_obj, bound)
    if status is None and not lost:
        st = Status.OPTIMAL if gap <= opts.mip_gap else Status.GAP_FEASIBLE
    else:
        st = Status.GAP_FEASIBLE
    if lost and not heap:
        # a node could not be resolved, so the bound is unproven
        bound, gap = -np.inf, float("inf")
    return Solution(st, x=inc_x, objective=inc_obj, bound=bound, gap=gap, nodes=nodes,
                    iterations=iterations, wall_time=wall, incumbents=history,
                    message="; ".join(messages))
