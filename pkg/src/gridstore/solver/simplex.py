"""Bounded revised primal simplex.

Computational form: ``[A, -I] (x, r) = 0`` with box bounds on the
structural variables ``x`` and on the row activities ``r``. The basis is
factorised with SuperLU and updated with a product-form eta file between
refactorisations. Phase 1 minimises the sum of bound violations of the
basic variables (composite pricing), so no artificial columns are needed.
"""
from __future__ import annotations

import time

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import kernels as kn
from .problem import LpProblem, Solution, SolverOptions, Status

_PIV_TOL = 1e-9
_DROP = 1e-14


def _pow2(v):
    return np.exp2(np.round(np.log2(v)))


def _row_extrema(M: sp.csr_matrix):
    """Per-row max and min of the stored absolute entries (1 for empty rows)."""
    m = M.shape[0]
    rmax = np.ones(m)
    rmin = np.ones(m)
    nz = np.diff(M.indptr) > 0
    if M.nnz:
        starts = M.indptr[:-1][nz]
        rmax[nz] = np.maximum.reduceat(M.data, starts)
        rmin[nz] = np.minimum.reduceat(M.data, starts)
    return rmax, rmin


def geometric_scaling(A: sp.csr_matrix, passes: int = 4):
    """Row and column scale factors (powers of two) for ``diag(r) A diag(s)``."""
    m, n = A.shape
    r = np.ones(m)
    s = np.ones(n)
    if A.nnz == 0:
        return r, s
    absA = abs(A).tocsr()
    absA.eliminate_zeros()
    for _ in range(passes):
        M = sp.diags(r) @ absA @ sp.diags(s)
        rmax, rmin = _row_extrema(M.tocsr())
        r = r / np.sqrt(rmax * rmin)
        M = (sp.diags(r) @ absA @ sp.diags(s)).T.tocsr()
        cmax, cmin = _row_extrema(M)
        s = s / np.sqrt(cmax * cmin)
    M = (sp.diags(r) @ absA @ sp.diags(s)).T.tocsr()
    cmax, _ = _row_extrema(M)
    s = s / cmax
    return _pow2(r), _pow2(s)


class _Factor:
    """SuperLU factor of the basis plus an eta file of later column swaps."""

    def __init__(self, B: sp.csc_matrix, capacity: int):
        self.lu = splu(B, permc_spec="COLAMD", options={"SymmetricMode": False})
        self.piv = np.zeros(capacity, dtype=np.int64)
        self.pval = np.zeros(capacity)
        self.start = np.zeros(capacity + 1, dtype=np.int64)
        self.idx = np.zeros(1024, dtype=np.int64)
        self.val = np.zeros(1024)
        self.count = 0

    def ftran(self, v):
        w = self.lu.solve(v)
        if self.count:
            kn.eta_ftran(w, self.piv, self.pval, self.start, self.idx, self.val, self.count)
        return w

    def btran(self, v):
        w = np.array(v, dtype=float)
        if self.count:
            kn.eta_btran(w, self.piv, self.pval, self.start, self.idx, self.val, self.count)
        return self.lu.solve(w, trans="T")

    def push(self, alpha, r):
        nz = np.flatnonzero(np.abs(alpha) > _DROP)
        nz = nz[nz != r]
        e = self.count
        s = self.start[e]
        need = s + nz.size
        if need > self.idx.size:
            size = max(need, 2 * self.idx.size)
            self.idx = np.resize(self.idx, size)
            self.val = np.resize(self.val, size)
        self.idx[s:need] = nz
        self.val[s:need] = alpha[nz]
        self.piv[e] = r
        self.pval[e] = alpha[r]
        self.start[e + 1] = need
        self.count += 1


class _Simplex:
    def __init__(self, prob: LpProblem, opts: SolverOptions, deadline: float):
        self.opts = opts
        self.deadline = deadline
        A = prob.A.tocsr()
        A.eliminate_zeros()
        m, n = A.shape
        self.m, self.n = m, n
        r, s = geometric_scaling(A)
        self.rscale, self.cscale = r, s
        As = (sp.diags(r) @ A @ sp.diags(s)).tocsr()
        cs = prob.c * s
        cmax = np.max(np.abs(cs), initial=0.0)
        self.objscale = float(_pow2(1.0 / cmax)) if cmax > 0 else 1.0
        rlo, rhi = prob.row_bounds()
        with np.errstate(invalid="ignore"):
            self.lo = np.concatenate([prob.lb / s, rlo * r])
            self.up = np.concatenate([prob.ub / s, rhi * r])
        self.cost = np.concatenate([cs * self.objscale, np.zeros(m)])
        self.K = sp.hstack([As, -sp.identity(m, format="csc")], format="csc")
        self.AsT = As.T.tocsr()
        self.nt = n + m
        self.status = np.empty(self.nt, dtype=np.int8)
        self.x = np.zeros(self.nt)
        self.head = np.arange(n, n + m, dtype=np.int64)
        self.iterations = 0
        self.d = np.zeros(self.nt)
        for j in range(n):
            self.status[j] = self._rest_status(j)
        self.status[n:] = kn.BASIC

    def _rest_status(self, j):
        lo, up = self.lo[j], self.up[j]
        if lo == up:
            self.x[j] = lo
            return kn.FIXED
        if np.isfinite(lo):
            self.x[j] = lo
            return kn.AT_LOWER
        if np.isfinite(up):
            self.x[j] = up
            return kn.AT_UPPER
        self.x[j] = 0.0
        return kn.FREE

    # ---------------------------------------------------------- factor
    def _factor(self):
        B = self.K[:, self.head].tocsc()
        try:
            self.F = _Factor(B, self.opts.refactor_every + 1)
        except RuntimeError:
            self._repair_basis(B)
            self.F = _Factor(self.K[:, self.head].tocsc(), self.opts.refactor_every + 1)
        self._recompute_xb()

    def _repair_basis(self, B):
        """Swap dependent basic columns for logicals of uncovered rows."""
        if self.m > 4000:
            raise RuntimeError("singular basis")
        Bd = B.toarray()
        _, R, piv = la.qr(Bd, pivoting=True, mode="economic")
        diag = np.abs(np.diag(R))
        tol = max(Bd.shape) * np.finfo(float).eps * (diag[0] if diag.size else 1.0) * 1e3
        rank = int(np.sum(diag > tol))
        dependent = piv[rank:]
        kept = self.head[piv[:rank]]
        # rows covered by kept columns: choose logicals spanning the complement
        Kk = self.K[:, kept].toarray()
        q, _, rpiv = la.qr(Kk.T, pivoting=True, mode="economic")
        free_rows = rpiv[rank:] if rank else np.arange(self.m)
        for pos, row in zip(dependent, free_rows):
            old = self.head[pos]
            self.status[old] = self._rest_status(old)
            self.head[pos] = self.n + row
            self.status[self.n + row] = kn.BASIC

    def _recompute_xb(self):
        xn = self.x.copy()
        xn[self.head] = 0.0
        rhs = -(self.K @ xn)
        self.x[self.head] = self.F.ftran(rhs)

    def _column(self, q):
        a = np.zeros(self.m)
        s, e = self.K.indptr[q], self.K.indptr[q + 1]
        a[self.K.indices[s:e]] = self.K.data[s:e]
        return a

    # ------------------------------------------------------------ loop
    def run(self) -> Status:
        opts = self.opts
        ftol = opts.feas_tol
        max_iter = opts.max_iter or 50 * (self.nt + 10)
        self._factor()
        degenerate = 0
        bland = False
        fresh = True
        while True:
            if self.iterations >= max_iter:
                return Status.NUMERICAL
            if self.iterations % 32 == 0 and time.perf_counter() > self.deadline:
                return Status.TIME_LIMIT
            head = self.head
            xb = self.x[head]
            lob = self.lo[head]
            upb = self.up[head]
            below = xb < lob - ftol
            above = xb > upb + ftol
            phase1 = bool(below.any() or above.any())
            if phase1:
                cb = above.astype(float) - below.astype(float)
                y = self.F.btran(cb)
                self.d[: self.n] = -(self.AsT @ y)
            else:
                cb = self.cost[head]
                y = self.F.btran(cb)
                self.d[: self.n] = self.cost[: self.n] - self.AsT @ y
            self.d[self.n:] = y
            q = kn.select_entering(self.d, self.status, opts.opt_tol, bland)
            if q < 0:
                if not fresh:
                    # confirm with a fresh factorisation before concluding
                    self._factor()
                    fresh = True
                    continue
                return Status.INFEASIBLE if phase1 else Status.OPTIMAL
            alpha = self.F.ftran(self._column(q))
            direction = 1.0 if self.d[q] < 0 else -1.0
            delta = -direction * alpha
            lo_q, up_q = self.lo[q], self.up[q]
            rng = up_q - lo_q if np.isfinite(lo_q) and np.isfinite(up_q) else np.inf
            r, t, to_upper = kn.ratio_test(xb, lob, upb, delta, head, rng, ftol, _PIV_TOL, bland)
            if r < 0 and not np.isfinite(t):
                if phase1:
                    return Status.NUMERICAL
                return Status.UNBOUNDED
            self.iterations += 1
            fresh = False
            if t > 1e-12:
                degenerate = 0
                bland = False
            else:
                degenerate += 1
                if degenerate > opts.bland_after:
                    bland = True
            self.x[head] = xb + t * delta
            if r < 0:
                self.status[q] = kn.AT_UPPER if direction > 0 else kn.AT_LOWER
                self.x[q] = up_q if direction > 0 else lo_q
                continue
            self.x[q] += direction * t
            leaving = head[r]
            if to_upper:
                self.x[leaving] = self.up[leaving]
            else:
                self.x[leaving] = self.lo[leaving]
            if self.lo[leaving] == self.up[leaving]:
                self.status[leaving] = kn.FIXED
            else:
                self.status[leaving] = kn.AT_UPPER if to_upper else kn.AT_LOWER
            head[r] = q
            self.status[q] = kn.BASIC
            self.F.push(alpha, r)
            if self.F.count >= opts.refactor_every:
                self._factor()

    # --------------------------------------------------------- results
    def primal(self) -> np.ndarray:
        return self.x[: self.n] * self.cscale

    def dual_bound(self) -> float:
        """Lagrangian bound from the current reduced costs (scaled units)."""
        d = self.d.copy()
        d[self.head] = 0.0
        lo, up = self.lo, self.up
        with np.errstate(invalid="ignore"):
            contrib = np.where(d > 0, d * lo, np.where(d < 0, d * up, 0.0))
        contrib = np.where(np.abs(d) <= 1e-12, d * self.x, contrib)
        if np.any(np.isnan(contrib)):
            return -np.inf
        return float(contrib.sum()) / self.objscale


def _bounds_only(prob: LpProblem, t0: float) -> Solution:
    c, lb, ub = prob.c, prob.lb, prob.ub
    x = np.where(c > 0, lb, np.where(c < 0, ub, np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))))
    if not np.all(np.isfinite(x)):
        return Solution(Status.UNBOUNDED, wall_time=time.perf_counter() - t0)
    obj = prob.objective(x)
    return Solution(Status.OPTIMAL, x=x, objective=obj, bound=obj, gap=0.0,
                    wall_time=time.perf_counter() - t0)


def solve_lp(problem: LpProblem, options: SolverOptions | None = None,
             deadline: float | None = None) -> Solution:
    """Solve the continuous relaxation of ``problem`` with the revised simplex.

    Integrality flags are ignored. ``deadline`` is an absolute
    ``time.perf_counter()`` value overriding ``options.time_limit``.
    """
    opts = options or SolverOptions()
    t0 = time.perf_counter()
    if deadline is None:
        deadline = t0 + opts.time_limit
    if np.any(problem.lb > problem.ub + opts.feas_tol):
        return Solution(Status.INFEASIBLE, wall_time=time.perf_counter() - t0,
                        message="empty variable box")
    lo, hi = problem.row_bounds()
    if problem.n_rows == 0:
        return _bounds_only(problem, t0)
    if problem.n_vars == 0:
        ok = np.all(lo <= opts.feas_tol) and np.all(hi >= -opts.feas_tol)
        st = Status.OPTIMAL if ok else Status.INFEASIBLE
        return Solution(st, x=np.zeros(0), objective=problem.offset, bound=problem.offset,
                        gap=0.0, wall_time=time.perf_counter() - t0)
    spx = _Simplex(problem, opts, deadline)
    try:
        status = spx.run()
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        return Solution(Status.NUMERICAL, iterations=spx.iterations,
                        wall_time=time.perf_counter() - t0, message=str(exc))
    sol = Solution(status, iterations=spx.iterations, wall_time=time.perf_counter() - t0)
    if status == Status.OPTIMAL:
        x = spx.primal()
        x = np.clip(x, problem.lb, problem.ub)
        sol.x = x
        sol.objective = problem.objective(x)
        bound = spx.dual_bound() + problem.offset
        sol.bound = bound
        sol.gap = 0.0
        viol = problem.max_violation(x)
        if viol > 1e-5 * (1.0 + np.max(np.abs(problem.rhs), initial=0.0)):
            sol.message = f"primal violation {viol:.3g}"
    return sol
