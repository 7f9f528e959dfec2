"""Inner loops of the simplex and branch-and-bound code.

Every kernel exists twice: a loop version compiled with numba and a
vectorised numpy twin. ``USE_NUMBA`` (env ``GRIDSTORE_NUMBA``) selects which
pair the public names point at; both are importable for testing and
benchmarking under ``*_nb`` / ``*_np``.

Status codes for simplex variables::

    0 basic, 1 nonbasic at lower, 2 nonbasic at upper, 3 free at zero, 4 fixed
"""
import numpy as np

from .._accel import USE_NUMBA, njit

BASIC, AT_LOWER, AT_UPPER, FREE, FIXED = 0, 1, 2, 3, 4


# ---------------------------------------------------------------- pricing

@njit
def select_entering_nb(d, status, tol, bland):
    best = -1
    best_val = tol
    for j in range(d.size):
        s = status[j]
        if s == AT_LOWER:
            v = -d[j]
        elif s == AT_UPPER:
            v = d[j]
        elif s == FREE:
            v = abs(d[j])
        else:
            continue
        if v > tol:
            if bland:
                return j
            if v > best_val:
                best_val = v
                best = j
    return best


def select_entering_np(d, status, tol, bland):
    viol = np.zeros(d.size)
    lo = status == AT_LOWER
    up = status == AT_UPPER
    fr = status == FREE
    viol[lo] = -d[lo]
    viol[up] = d[up]
    viol[fr] = np.abs(d[fr])
    cand = viol > tol
    if not cand.any():
        return -1
    if bland:
        return int(np.flatnonzero(cand)[0])
    viol[~cand] = -np.inf
    return int(np.argmax(viol))


# ------------------------------------------------------------ ratio test

@njit
def ratio_test_nb(xb, lb, ub, delta, head, entering_range, feas_tol, piv_tol, bland):
    """Harris two-pass ratio test for ``x_B(t) = x_B + t * delta``.

    Returns ``(row, step, to_upper)``; ``row == -1`` means the entering
    variable hits its own opposite bound (finite step) or nothing blocks
    (infinite step). Basic variables already outside their bounds (phase 1)
    block only when they re-enter the box.
    """
    m = xb.size
    tmax = entering_range
    # pass 1: largest step with bounds relaxed by feas_tol
    for i in range(m):
        di = delta[i]
        if di < -piv_tol:
            x = xb[i]
            if x > ub[i] + feas_tol:
                t = (x - ub[i]) / -di
            elif x >= lb[i] - feas_tol:
                t = (x - lb[i] + feas_tol) / -di
            else:
                continue
            if t < tmax:
                tmax = t
        elif di > piv_tol:
            x = xb[i]
            if x < lb[i] - feas_tol:
                t = (lb[i] - x) / di
            elif x <= ub[i] + feas_tol:
                t = (ub[i] - x + feas_tol) / di
            else:
                continue
            if t < tmax:
                tmax = t
    if tmax == entering_range:
        return -1, entering_range, False
    # pass 2: among exact ratios within tmax pick the largest pivot
    row = -1
    best_piv = 0.0
    best_t = 0.0
    to_upper = False
    for i in range(m):
        di = delta[i]
        if di < -piv_tol:
            x = xb[i]
            if x > ub[i] + feas_tol:
                t = (x - ub[i]) / -di
                up = True
            elif x >= lb[i] - feas_tol:
                t = (x - lb[i]) / -di
                up = False
            else:
                continue
        elif di > piv_tol:
            x = xb[i]
            if x < lb[i] - feas_tol:
                t = (lb[i] - x) / di
                up = False
            elif x <= ub[i] + feas_tol:
                t = (ub[i] - x) / di
                up = True
            else:
                continue
        else:
            continue
        if t <= tmax:
            a = abs(di)
            if bland:
                better = row == -1 or t < best_t - 1e-12 or (abs(t - best_t) <= 1e-12 and head[i] < head[row])
            else:
                better = a > best_piv
            if better:
                best_piv = a
                best_t = t
                row = i
                to_upper = up
    if row == -1:
        return -1, tmax, False
    if best_t < 0.0:
        best_t = 0.0
    return row, best_t, to_upper


def ratio_test_np(xb, lb, ub, delta, head, entering_range, feas_tol, piv_tol, bland):
    dec = delta < -piv_tol
    inc = delta > piv_tol
    above = xb > ub + feas_tol
    below = xb < lb - feas_tol
    inside = ~above & ~below
    with np.errstate(divide="ignore", invalid="ignore"):
        # relaxed ratios
        t1 = np.full(xb.size, np.inf)
        m = dec & above
        t1[m] = (xb[m] - ub[m]) / -delta[m]
        m = dec & inside
        t1[m] = (xb[m] - lb[m] + feas_tol) / -delta[m]
        m = inc & below
        t1[m] = (lb[m] - xb[m]) / delta[m]
        m = inc & inside
        t1[m] = (ub[m] - xb[m] + feas_tol) / delta[m]
        tmax = min(entering_range, float(t1.min(initial=np.inf)))
        if tmax == entering_range:
            return -1, entering_range, False
        # exact ratios and the bound each candidate leaves at
        t2 = np.full(xb.size, np.inf)
        up = np.zeros(xb.size, dtype=bool)
        m = dec & above
        t2[m] = (xb[m] - ub[m]) / -delta[m]
        up[m] = True
        m = dec & inside
        t2[m] = (xb[m] - lb[m]) / -delta[m]
        m = inc & below
        t2[m] = (lb[m] - xb[m]) / delta[m]
        m = inc & inside
        t2[m] = (ub[m] - xb[m]) / delta[m]
        up[m] = True
    cand = np.flatnonzero(t2 <= tmax)
    if cand.size == 0:
        return -1, tmax, False
    if bland:
        tc = t2[cand]
        tmin = tc.min()
        ties = cand[tc <= tmin + 1e-12]
        row = int(ties[np.argmin(head[ties])])
    else:
        row = int(cand[np.argmax(np.abs(delta[cand]))])
    return row, max(float(t2[row]), 0.0), bool(up[row])


# ------------------------------------------------------------ eta file

@njit
def eta_ftran_nb(vec, piv, pval, start, idx, val, n_eta):
    for e in range(n_eta):
        p = piv[e]
        xp = vec[p] / pval[e]
        vec[p] = xp
        if xp != 0.0:
            for t in range(start[e], start[e + 1]):
                vec[idx[t]] -= val[t] * xp
    return vec


def eta_ftran_np(vec, piv, pval, start, idx, val, n_eta):
    for e in range(n_eta):
        p = piv[e]
        xp = vec[p] / pval[e]
        vec[p] = xp
        if xp != 0.0:
            s, t = start[e], start[e + 1]
            vec[idx[s:t]] -= val[s:t] * xp
    return vec


@njit
def eta_btran_nb(vec, piv, pval, start, idx, val, n_eta):
    for e in range(n_eta - 1, -1, -1):
        p = piv[e]
        s = vec[p]
        for t in range(start[e], start[e + 1]):
            s -= val[t] * vec[idx[t]]
        vec[p] = s / pval[e]
    return vec


def eta_btran_np(vec, piv, pval, start, idx, val, n_eta):
    for e in range(n_eta - 1, -1, -1):
        p = piv[e]
        s, t = start[e], start[e + 1]
        vec[p] = (vec[p] - val[s:t] @ vec[idx[s:t]]) / pval[e]
    return vec


# ---------------------------------------------------- bound propagation

@njit
def propagate_nb(indptr, indices, data, rlo, rhi, lb, ub, is_int, int_tol, max_rounds):
    """Activity-based bound tightening.

    Returns ``(lb, ub, infeasible)``. Integer bounds are rounded; continuous
    bounds move only on a relative improvement above 1e-9.
    """
    lb = lb.copy()
    ub = ub.copy()
    m = rlo.size
    for _ in range(max_rounds):
        changed = False
        for i in range(m):
            s, e = indptr[i], indptr[i + 1]
            minact = 0.0
            maxact = 0.0
            nmin_inf = 0
            nmax_inf = 0
            for t in range(s, e):
                a = data[t]
                j = indices[t]
                if a > 0:
                    lo_c = a * lb[j] if lb[j] > -np.inf else -np.inf
                    hi_c = a * ub[j] if ub[j] < np.inf else np.inf
                else:
                    lo_c = a * ub[j] if ub[j] < np.inf else -np.inf
                    hi_c = a * lb[j] if lb[j] > -np.inf else np.inf
                if lo_c == -np.inf:
                    nmin_inf += 1
                else:
                    minact += lo_c
                if hi_c == np.inf:
                    nmax_inf += 1
                else:
                    maxact += hi_c
            if nmin_inf == 0 and minact > rhi[i] + 1e-6 * (1.0 + abs(rhi[i])):
                return lb, ub, True
            if nmax_inf == 0 and maxact < rlo[i] - 1e-6 * (1.0 + abs(rlo[i])):
                return lb, ub, True
            if nmin_inf > 1 and nmax_inf > 1:
                continue
            # contributions use bounds as of the row start
            for t in range(s, e):
                a = data[t]
                j = indices[t]
                if a > 0:
                    lo_c = a * lb[j] if lb[j] > -np.inf else -np.inf
                    hi_c = a * ub[j] if ub[j] < np.inf else np.inf
                else:
                    lo_c = a * ub[j] if ub[j] < np.inf else -np.inf
                    hi_c = a * lb[j] if lb[j] > -np.inf else np.inf
                # residual min activity of the other entries
                if rhi[i] < np.inf:
                    if lo_c == -np.inf:
                        ok = nmin_inf == 1
                        rest = minact
                    else:
                        ok = nmin_inf == 0
                        rest = minact - lo_c
                    if ok:
                        bound = (rhi[i] - rest) / a
                        if a > 0:
                            if is_int[j]:
                                bound = np.floor(bound + int_tol)
                            if bound < ub[j] - 1e-9 * (1.0 + abs(bound)):
                                ub[j] = bound
                                changed = True
                        else:
                            if is_int[j]:
                                bound = np.ceil(bound - int_tol)
                            if bound > lb[j] + 1e-9 * (1.0 + abs(bound)):
                                lb[j] = bound
                                changed = True
                if rlo[i] > -np.inf:
                    if hi_c == np.inf:
                        ok = nmax_inf == 1
                        rest = maxact
                    else:
                        ok = nmax_inf == 0
                        rest = maxact - hi_c
                    if ok:
                        bound = (rlo[i] - rest) / a
                        if a > 0:
                            if is_int[j]:
                                bound = np.ceil(bound - int_tol)
                            if bound > lb[j] + 1e-9 * (1.0 + abs(bound)):
                                lb[j] = bound
                                changed = True
                        else:
                            if is_int[j]:
                                bound = np.floor(bound + int_tol)
                            if bound < ub[j] - 1e-9 * (1.0 + abs(bound)):
                                ub[j] = bound
                                changed = True
                if lb[j] > ub[j] + 1e-6 * (1.0 + abs(ub[j])):
                    return lb, ub, True
        if not changed:
            break
    return lb, ub, False


def propagate_np(indptr, indices, data, rlo, rhi, lb, ub, is_int, int_tol, max_rounds):
    lb = lb.copy()
    ub = ub.copy()
    m = rlo.size
    rows = np.repeat(np.arange(m), np.diff(indptr))
    pos = data > 0
    for _ in range(max_rounds):
        with np.errstate(invalid="ignore"):
            lo_c = np.where(pos, data * lb[indices], data * ub[indices])
            hi_c = np.where(pos, data * ub[indices], data * lb[indices])
        lo_c = np.nan_to_num(lo_c, nan=0.0, posinf=np.inf, neginf=-np.inf)
        hi_c = np.nan_to_num(hi_c, nan=0.0, posinf=np.inf, neginf=-np.inf)
        lo_inf = np.isneginf(lo_c)
        hi_inf = np.isposinf(hi_c)
        nmin = np.bincount(rows, weights=lo_inf, minlength=m)
        nmax = np.bincount(rows, weights=hi_inf, minlength=m)
        minact = np.bincount(rows, weights=np.where(lo_inf, 0.0, lo_c), minlength=m)
        maxact = np.bincount(rows, weights=np.where(hi_inf, 0.0, hi_c), minlength=m)
        if np.any((nmin == 0) & (minact > rhi + 1e-6 * (1.0 + np.abs(rhi)))):
            return lb, ub, True
        if np.any((nmax == 0) & (maxact < rlo - 1e-6 * (1.0 + np.abs(rlo)))):
            return lb, ub, True
        # residual activities of the other entries in each row
        rest_min = np.where(lo_inf, minact[rows], minact[rows] - np.where(lo_inf, 0.0, lo_c))
        ok_min = np.where(lo_inf, nmin[rows] == 1, nmin[rows] == 0) & np.isfinite(rhi[rows])
        rest_max = np.where(hi_inf, maxact[rows], maxact[rows] - np.where(hi_inf, 0.0, hi_c))
        ok_max = np.where(hi_inf, nmax[rows] == 1, nmax[rows] == 0) & np.isfinite(rlo[rows])
        with np.errstate(invalid="ignore", divide="ignore"):
            b_hi = np.where(ok_min, (rhi[rows] - rest_min) / data, np.nan)
            b_lo = np.where(ok_max, (rlo[rows] - rest_max) / data, np.nan)
        new_ub = np.full(lb.size, np.inf)
        new_lb = np.full(lb.size, -np.inf)
        ub_from = np.where(pos, b_hi, b_lo)
        lb_from = np.where(pos, b_lo, b_hi)
        sel = ~np.isnan(ub_from)
        np.minimum.at(new_ub, indices[sel], ub_from[sel])
        sel = ~np.isnan(lb_from)
        np.maximum.at(new_lb, indices[sel], lb_from[sel])
        new_ub[is_int] = np.floor(new_ub[is_int] + int_tol)
        new_lb[is_int] = np.ceil(new_lb[is_int] - int_tol)
        up_ch = new_ub < ub - 1e-9 * (1.0 + np.abs(new_ub))
        lo_ch = new_lb > lb + 1e-9 * (1.0 + np.abs(new_lb))
        ub[up_ch] = new_ub[up_ch]
        lb[lo_ch] = new_lb[lo_ch]
        if np.any(lb > ub + 1e-6 * (1.0 + np.abs(ub))):
            return lb, ub, True
        if not (up_ch.any() or lo_ch.any()):
            break
    return lb, ub, False


# --------------------------------------------------- flattened peak

@njit
def flattened_peak_nb(load_desc, eta):
    k = load_desc.size
    total = 0.0
    for i in range(k):
        total += load_desc[i]
    best = -np.inf
    head = 0.0
    for m in range(1, k + 1):
        head += load_desc[m - 1]
        val = (head + eta * (total - head)) / (m + (k - m) * eta)
        if val > best:
            best = val
    return best


def flattened_peak_np(load_desc, eta):
    k = load_desc.size
    head = np.cumsum(load_desc)
    m = np.arange(1, k + 1)
    return float(np.max((head + eta * (head[-1] - head)) / (m + (k - m) * eta)))


if USE_NUMBA:
    select_entering = select_entering_nb
    ratio_test = ratio_test_nb
    eta_ftran = eta_ftran_nb
    eta_btran = eta_btran_nb
    propagate = propagate_nb
    flattened_peak = flattened_peak_nb
else:
    select_entering = select_entering_np
    ratio_test = ratio_test_np
    eta_ftran = eta_ftran_np
    eta_btran = eta_btran_np
    propagate = propagate_np
    flattened_peak = flattened_peak_np
