"""Planning instance to MILP, plus the variant operations on built models.

Resources listed in ``config.investable`` get investment, commitment and
capacity variables; every other resource keeps its preinstalled fleet, whose
capacity enters as constant bounds. Operational variables always cover all
three supply and demand kinds so that solutions unpack into full arrays.
"""
from __future__ import annotations

import numpy as np

from ..model.capacity import capacity_table, largest_grid_unit, lifetime_window_start
from ..model.operations import FEAS_TOL, cost_breakdown, validate_operation
from ..model.types import (
    DL,
    DS,
    DG,
    KW_PER_MW,
    SUPPLY,
    B,
    G,
    S,
    CostBreakdown,
    ExogenousSeries,
    Horizon,
    InvestmentPlan,
    OperationPlan,
    PlanningInstance,
    ResourceKind,
    StorageSpec,
)
from ..peakshave import storage_upper_bound
from .config import BigMConstants, ExperimentConfig
from .milp import MilpModel

INT_TOL = 1e-6
OBJ_RTOL = 1e-6
MONTHS = 12


class ExtractionError(RuntimeError):
    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


def effective_specs(specs, storage: StorageSpec, config: ExperimentConfig) -> dict:
    """Apply the experiment's cost and capacity-price overrides."""
    out = {}
    for kind, spec in specs.items():
        kind = ResourceKind(kind)
        n = spec.n_periods
        if kind == ResourceKind.STORAGE and config.storage_cost_per_kwh is not None:
            spec = spec.replace(unit_cost=np.full(n, config.storage_cost_per_kwh * storage.duration))
        if kind == ResourceKind.GRID or not config.capacity_credits:
            spec = spec.replace(capacity_price=np.zeros(n))
        elif config.capacity_price_per_kw_month is not None:
            spec = spec.replace(capacity_price=np.full(n, config.capacity_price_per_kw_month * MONTHS))
        out[kind] = spec
    return out


def _window(n0: int, lifetime: int) -> range:
    """0-based investment periods live in 0-based period ``n0``."""
    return range(lifetime_window_start(n0 + 1, lifetime) - 1, n0 + 1)


def _capacity_bounds(specs, horizon: Horizon, investable) -> np.ndarray:
    """Largest attainable capacity per ``(r, n, c)``; constants for fixed fleets."""
    N, C = horizon.n_periods, horizon.n_contingencies
    out = capacity_table(np.zeros((3, N)), specs, horizon)
    for r, kind in enumerate(SUPPLY):
        if kind in investable:
            spec = specs[kind]
            for n0 in range(N):
                live = len(_window(n0, spec.lifetime))
                out[r, n0, :] = spec.preinstalled[n0].sum() + live * spec.max_invest
    return out


def build_full_model(specs, storage: StorageSpec, horizon: Horizon, series: ExogenousSeries,
                     config: ExperimentConfig) -> MilpModel:
    instance = PlanningInstance(specs, storage, horizon, series)
    for kind in config.investable:
        if kind not in instance.specs:
            raise ValueError(f"investment in {kind.name.lower()} requested but no spec given")
    specs = effective_specs(instance.specs, storage, config)
    N, J, K, C = horizon.shape
    Tc = np.asarray(horizon.duration_weights)
    w = horizon.day_weights
    dt = horizon.dt
    inv = config.investable
    m = MilpModel(config.name)
    cap_ub = _capacity_bounds(specs, horizon, inv)
    pre_cap = capacity_table(np.zeros((3, N)), specs, horizon)

    # investments
    for r, kind in enumerate(SUPPLY):
        if kind not in inv:
            continue
        spec = specs[kind]
        x = m.add_vars(f"x_{kind.value}", N, 0.0, spec.max_invest,
                       cost=spec.unit_cost * KW_PER_MW, priority=2)
        z = m.add_vars(f"z_{kind.value}", N, cost=spec.fixed_cost, binary=True, priority=2)
        m.add_constraints("coninv_lo", [(1.0, x), (-spec.min_invest, z)], ">=", np.zeros(N))
        m.add_constraints("coninv_hi", [(1.0, x), (-spec.max_invest, z)], "<=", np.zeros(N))
        pre_sum = spec.preinstalled.sum(axis=1)
        win = np.zeros((N, N))
        for n0 in range(N):
            win[n0, list(_window(n0, spec.lifetime))] = 1.0
        if kind == ResourceKind.GRID:
            P = spec.preinstalled.max(axis=1, initial=0.0)
            xmax_ub = np.maximum(P, np.where(win.sum(axis=1) > 0, spec.max_invest, 0.0))
            xmax = m.add_vars("x_max", N, P, xmax_ub)
            xt = m.add_vars("xtot_g", (N, C), 0.0, cap_ub[r])
            cvec = np.arange(C, dtype=float)
            m.add_constraints(
                "concap2",
                [(1.0, xt), (-win[:, None, :], np.broadcast_to(x, (N, C, N))),
                 (cvec[None, :], xmax[:, None])],
                "==", np.repeat(pre_sum[:, None], C, axis=1),
            )
            live = [(n0, i) for n0 in range(N) for i in _window(n0, spec.lifetime)]
            if live:
                ln, li = np.array(live).T
                m.add_constraints("conepi1", [(1.0, xmax[ln]), (-1.0, x[li])], ">=", np.zeros(len(live)))
        else:
            xt = m.add_vars(f"xtot_{kind.value}", N, 0.0, cap_ub[r, :, 0],
                            cost=-spec.capacity_price * KW_PER_MW)
            m.add_constraints("concap1", [(1.0, xt), (-win, np.broadcast_to(x, (N, N)))], "==", pre_sum)
    for r, kind in enumerate(SUPPLY):
        if kind not in inv and kind in specs and kind != ResourceKind.GRID:
            m.offset -= float(specs[kind].capacity_price @ pre_cap[r, :, 0]) * KW_PER_MW

    # operations
    wt = (Tc[None, None, None, :] * w[None, :, None, None])  # (1, J, 1, C)
    ys_cost = wt[None] * series.supply_price[..., None]
    yd_cost = -wt[None] * series.demand_price[..., None]
    shape = (3, N, J, K, C)
    ys_ub = np.broadcast_to(cap_ub[:, :, None, None, :], shape).copy()
    yd_ub = np.broadcast_to(cap_ub[[G, G, S], :, None, None, :], shape).copy()
    yd_ub[DL] = np.broadcast_to(series.load[..., None], (N, J, K, C))
    ys = m.add_vars("ys", shape, 0.0, ys_ub, cost=ys_cost)
    yd = m.add_vars("yd", shape, 0.0, yd_ub, cost=yd_cost)
    e_ub = storage.duration * cap_ub[S, :, 0]
    soc = m.add_vars("soc", (N, J, K, C), 0.0, e_ub[:, None, None, None])
    soc0 = m.add_vars("soc0", N, 0.0, e_ub)

    m.add_constraints("balance", [(1.0, np.moveaxis(ys, 0, -1)), (-1.0, np.moveaxis(yd, 0, -1))],
                      "==", np.zeros((N, J, K, C)))
    cell = np.zeros((N, J, K, C))
    for r, fam in ((B, "consup_b"), (G, "consup_g"), (S, "consup_s")):
        if SUPPLY[r] in inv:
            xt = m.blocks[f"xtot_{SUPPLY[r].value}"]
            xt_b = xt[:, None, None, :] if xt.ndim == 2 else xt[:, None, None, None]
            m.add_constraints(fam, [(1.0, ys[r]), (-1.0, xt_b)], "<=", cell)
            if r == G:
                m.add_constraints("congrid", [(1.0, yd[DG]), (-1.0, xt_b)], "<=", cell)
            if r == S:
                m.add_constraints("condem_s", [(1.0, yd[DS]), (-1.0, xt_b)], "<=", cell)
                m.add_constraints("cony0", [(1.0, soc), (-storage.duration, xt_b)], "<=", cell)
                m.add_constraints("cony0_target", [(1.0, soc0), (-storage.duration, xt)], "<=", np.zeros(N))

    # state of charge: soc_k - soc_{k-1} - dt*eta_c*yd_s + dt/eta_d*ys_s = 0
    flow = [(-dt * storage.eta_c, yd[DS]), (dt / storage.eta_d, ys[S])]
    first = [(1.0, soc[:, :, 0, :]), (-1.0, np.broadcast_to(soc0[:, None, None], (N, J, C)))]
    first += [(coef, ids[:, :, 0, :]) for coef, ids in flow]
    m.add_constraints("cony1", first, "==", np.zeros((N, J, C)))
    if K > 1:
        nxt = [(1.0, soc[:, :, 1:, :]), (-1.0, soc[:, :, :-1, :])]
        nxt += [(coef, ids[:, :, 1:, :]) for coef, ids in flow]
        m.add_constraints("cony+", nxt, "==", np.zeros((N, J, K - 1, C)))
    m.add_constraints("conter", [(1.0, soc[:, :, -1, :]), (-1.0, np.broadcast_to(soc0[:, None, None], (N, J, C)))],
                      "==", np.zeros((N, J, C)))

    # cycle budget
    storage_var = ResourceKind.STORAGE in inv
    budget = storage.cycle_limit * storage.duration
    lhs_coef = dt / storage.eta_d
    if config.cycle_scope == "yearly":
        ids = np.transpose(ys[S], (0, 3, 1, 2))  # (N, C, J, K)
        terms = [(lhs_coef * w[None, None, :, None], ids)]
        if storage_var:
            terms.append((-budget, m.blocks["xtot_s"][:, None]))
            rhs = np.zeros((N, C))
        else:
            rhs = budget * np.broadcast_to(pre_cap[S, :, :1], (N, C)).copy()
        m.add_constraints("cycle", terms, "<=", rhs)
    else:
        per_day = budget / horizon.days_represented
        ids = np.transpose(ys[S], (0, 1, 3, 2))  # (N, J, C, K)
        terms = [(lhs_coef, ids)]
        if storage_var:
            terms.append((-per_day, m.blocks["xtot_s"][:, None, None]))
            rhs = np.zeros((N, J, C))
        else:
            rhs = per_day * np.broadcast_to(pre_cap[S, :, None, :1], (N, J, C)).copy()
        m.add_constraints("cycle_daily", terms, "<=", rhs)

    m.meta.update(
        instance=instance, specs=specs, storage=storage, horizon=horizon, series=series, config=config,
        load_shedding=True, market_participation=False, cycle_scope=config.cycle_scope,
        fixed_capacity=pre_cap,
    )
    return m


def add_no_load_shedding(model: MilpModel) -> MilpModel:
    """Served load equals demand everywhere (applying twice changes nothing)."""
    out = model.copy()
    load = out.meta["series"].load
    ids = out.blocks["yd"][DL]
    vals = np.broadcast_to(load[..., None], ids.shape)
    out.set_bounds(ids, lb=vals, ub=vals)
    out.meta["load_shedding"] = False
    return out


def compute_bigM(specs, horizon: Horizon, series: ExogenousSeries,
                 storage: StorageSpec | None = None) -> BigMConstants:
    """Big-M constants; with ``storage`` also the storage buildout bound (MW)."""
    specs = {ResourceKind(k): v for k, v in specs.items()}
    grid = specs.get(ResourceKind.GRID)
    xbar_g = grid.max_invest if grid is not None else 0.0
    load = series.load
    lower = -(float(load.max(initial=0.0)) + 2.0 * xbar_g)
    # widened when preinstalled capacity alone exceeds that reach
    full = np.zeros((3, horizon.n_periods))
    full[G] = xbar_g
    reach = capacity_table(full, specs, horizon)[G].max(axis=1)
    lower = min(lower, float((load - reach[:, None, None]).min(initial=0.0)))
    base = capacity_table(np.zeros((3, horizon.n_periods)), specs, horizon)[G]  # (N, C)
    upper1 = load[..., None] - base[:, None, None, :]
    buildout = None
    st = specs.get(ResourceKind.STORAGE)
    if storage is not None and st is not None:
        power, _ = storage_upper_bound(load, storage, horizon.dt)
        buildout = power + st.max_invest
    return BigMConstants(lower, lower, upper1, load.copy(), buildout)


def _grid_capacity_terms(model: MilpModel):
    """``x^tot_g`` broadcast over cells as ``(ids or None, constant)``."""
    N, J, K, C = model.meta["horizon"].shape
    if model.has("xtot_g"):
        return np.broadcast_to(model.blocks["xtot_g"][:, None, None, :], (N, J, K, C)), 0.0
    return None, np.broadcast_to(model.meta["fixed_capacity"][G][:, None, None, :], (N, J, K, C))


def _add_xmax_selection(m: MilpModel) -> None:
    """Pin ``x^max`` to the largest live grid unit instead of just bounding it below.

    Without this, raising ``x^max`` lowers post-contingency grid capacity and
    loosens the market-participation limit.
    """
    if not m.has("x_max") or m.meta["horizon"].n_contingencies < 2:
        return
    spec = m.meta["specs"][ResourceKind.GRID]
    N = m.meta["horizon"].n_periods
    x, z, xmax = m.blocks["x_g"], m.blocks["z_g"], m.blocks["x_max"]
    P = spec.preinstalled.max(axis=1, initial=0.0)
    big = np.maximum(spec.max_invest - P, 0.0)
    if spec.min_invest == spec.max_invest:
        v = m.add_vars("xmax_on", N, 0.0, 1.0)
        m.add_constraints("xmax_sel", [(1.0, xmax), (-big, v)], "<=", P)
        for n0 in range(N):
            win = list(_window(n0, spec.lifetime))
            m.add_constraints("xmax_live", [(1.0, v[n0:n0 + 1]), (-1.0, z[win][None, :])], "<=", np.zeros(1))
        return
    L = max(len(_window(n0, spec.lifetime)) for n0 in range(N))
    u0 = m.add_vars("xmax_pre", N, binary=True, priority=2)
    u = m.add_vars("xmax_pick", (N, L), binary=True, priority=2)
    for n0 in range(N):
        win = list(_window(n0, spec.lifetime))
        m.set_bounds(u[n0, len(win):], ub=0.0)
        m.add_constraints("xmax_one", [(1.0, u0[n0:n0 + 1]), (1.0, u[n0][None, :])], "==", np.ones(1))
        m.add_constraints("xmax_sel", [(1.0, xmax[n0:n0 + 1]), (big[n0], u0[n0:n0 + 1])], "<=",
                          np.array([P[n0] + big[n0]]))
        for slot, i in enumerate(win):
            m.add_constraints("xmax_inv", [(1.0, xmax[n0:n0 + 1]), (-1.0, x[i:i + 1]),
                                           (spec.max_invest, u[n0, slot:slot + 1])],
                              "<=", np.array([spec.max_invest]))
            m.add_constraints("xmax_pick_z", [(1.0, u[n0, slot:slot + 1]), (-1.0, z[i:i + 1])], "<=", np.zeros(1))


def add_market_participation(model: MilpModel, bigM: BigMConstants) -> MilpModel:
    """Backup and storage may only cover the grid shortfall (disjunctive form)."""
    m = model.copy()
    if m.meta["market_participation"]:
        return m
    N, J, K, C = m.meta["horizon"].shape
    if bigM.upper1.shape != (N, J, K, C) or bigM.upper2.shape != (N, J, K):
        raise ValueError("big-M constants do not match the model horizon")
    ys, yd = m.blocks["ys"], m.blocks["yd"]
    zm = m.add_vars("zM", (N, J, K, C), binary=True, priority=0)
    xt, const = _grid_capacity_terms(m)
    M1, M2 = bigM.lower1, bigM.lower2
    U1 = bigM.upper1
    U2 = np.broadcast_to(bigM.upper2[..., None], (N, J, K, C))
    d_terms = [(1.0, yd[DL])] + ([(-1.0, xt)] if xt is not None else [])
    neg_d = [(-1.0, yd[DL])] + ([(1.0, xt)] if xt is not None else [])
    s_terms = [(1.0, ys[B]), (1.0, ys[S])]
    zero = np.zeros((N, J, K, C))
    m.add_constraints("mkt_short_lo", d_terms + [(M1, zm)], ">=", zero + M1 + const)
    m.add_constraints("mkt_short_hi", d_terms + [(-U1, zm)], "<=", zero + const)
    m.add_constraints("mkt_cover", s_terms + neg_d + [(-M2, zm)], "<=", zero - M2 - const)
    m.add_constraints("mkt_off", s_terms + [(-U2, zm)], "<=", zero)
    _add_xmax_selection(m)
    m.meta["market_participation"] = True
    return m


def add_market_participation_fixed_grid(model: MilpModel, grid_capacity, series: ExogenousSeries) -> MilpModel:
    """Linear market-participation limit for a known grid capacity ``(N, C)``."""
    N, J, K, C = model.meta["horizon"].shape
    if model.has("xtot_g"):
        lb, ub = model.lb, model.ub
        ids = model.blocks["xtot_g"].ravel()
        if np.any(ub[ids] - lb[ids] > 0):
            raise ValueError("grid investment is not fixed; use add_market_participation")
    if model.meta["load_shedding"]:
        raise ValueError("the linear form needs load shedding disabled")
    cap = np.asarray(grid_capacity, dtype=float).reshape(N, C)
    m = model.copy()
    ys = m.blocks["ys"]
    rhs = np.maximum(series.load[..., None] - cap[:, None, None, :], 0.0)
    m.add_constraints("mkt_fixed", [(1.0, ys[B]), (1.0, ys[S])], "<=", rhs)
    m.meta["market_participation"] = True
    return m


def _selection_values(spec, x_g: np.ndarray, n0: int):
    win = list(_window(n0, spec.lifetime))
    P = spec.preinstalled[n0].max(initial=0.0)
    live = x_g[win]
    if live.size == 0 or P >= live.max():
        return 1.0, np.zeros(len(win))
    pick = np.zeros(len(win))
    pick[int(np.argmax(live))] = 1.0
    return 0.0, pick


def fix_investments(model: MilpModel, plan: InvestmentPlan) -> MilpModel:
    """Pin every investment-side variable to ``plan``; what remains is dispatch."""
    specs = model.meta["specs"]
    horizon = model.meta["horizon"]
    N, C = horizon.n_periods, horizon.n_contingencies
    x = np.array(plan.x, dtype=float).reshape(3, N)
    z = np.array(plan.z, dtype=float).reshape(3, N)
    m = model.copy()
    for r, kind in enumerate(SUPPLY):
        if not m.has(f"x_{kind.value}"):
            if np.any(np.abs(x[r]) > INT_TOL):
                raise ValueError(f"plan invests in {kind.name.lower()}, which is not investable here")
            continue
        spec = specs[kind]
        if np.any(np.minimum(np.abs(z[r]), np.abs(z[r] - 1)) > INT_TOL):
            raise ValueError("commitment values must be binary")
        zr = np.round(z[r])
        if np.any(x[r] < spec.min_invest * zr - INT_TOL) or np.any(x[r] > spec.max_invest * zr + INT_TOL):
            raise ValueError(f"{kind.name.lower()} investments violate their bounds")
        xr = np.clip(x[r], 0.0, spec.max_invest * zr)
        x[r] = xr
        m.set_bounds(m.blocks[f"x_{kind.value}"], lb=xr, ub=xr)
        m.set_bounds(m.blocks[f"z_{kind.value}"], lb=zr, ub=zr)
    table = capacity_table(x, specs, horizon)
    for r, kind in enumerate(SUPPLY):
        role = f"xtot_{kind.value}"
        if m.has(role):
            vals = table[r] if kind == ResourceKind.GRID else table[r, :, 0]
            m.set_bounds(m.blocks[role], lb=vals, ub=vals)
    if m.has("x_max"):
        spec = specs[ResourceKind.GRID]
        xm = np.array([largest_grid_unit(x[G], spec, n) for n in range(1, N + 1)])
        m.set_bounds(m.blocks["x_max"], lb=xm, ub=xm)
        if m.has("xmax_on"):
            on = np.array([float(any(z[G, i] > 0.5 for i in _window(n0, spec.lifetime))) for n0 in range(N)])
            m.set_bounds(m.blocks["xmax_on"], lb=on, ub=on)
        if m.has("xmax_pre"):
            u0, u = m.blocks["xmax_pre"], m.blocks["xmax_pick"]
            for n0 in range(N):
                pre, pick = _selection_values(spec, x[G], n0)
                vals = np.zeros(u.shape[1])
                vals[: pick.size] = pick
                m.set_bounds(u0[n0:n0 + 1], lb=pre, ub=pre)
                m.set_bounds(u[n0], lb=vals, ub=vals)
    m.meta["fixed_plan"] = x
    return m


def extract_solution(model: MilpModel, x) -> tuple[InvestmentPlan, OperationPlan, CostBreakdown]:
    """Unpack a solver vector, re-derive every quantity and cross-check it."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != model.n_vars:
        raise ExtractionError(f"solution has {x.size} entries, model has {model.n_vars}")
    for role in ("ys", "yd", "soc", "soc0"):
        if not model.has(role):
            raise ExtractionError(f"model lacks variable role {role!r}")
    bins = model.binary
    frac = np.abs(x[bins] - np.round(x[bins]))
    if frac.size and frac.max() > INT_TOL:
        raise ExtractionError(f"binary value off by {frac.max():.3g} from integrality")
    x = x.copy()
    x[bins] = np.round(x[bins])
    specs, horizon = model.meta["specs"], model.meta["horizon"]
    storage, series = model.meta["storage"], model.meta["series"]
    N, C = horizon.n_periods, horizon.n_contingencies
    inv = np.zeros((3, N))
    com = np.zeros((3, N))
    for r, kind in enumerate(SUPPLY):
        if model.has(f"x_{kind.value}"):
            inv[r] = x[model.blocks[f"x_{kind.value}"]]
            com[r] = x[model.blocks[f"z_{kind.value}"]]
    inv[np.abs(inv) <= INT_TOL] = 0.0
    # x^max is only bounded below unless market participation pins it, so the
    # model may understate post-contingency grid capacity; report true values
    x_tot = capacity_table(inv, specs, horizon)
    grid = specs.get(ResourceKind.GRID)
    x_max = np.array([largest_grid_unit(inv[G], grid, n) if grid else 0.0 for n in range(1, N + 1)])
    plan = InvestmentPlan(inv, com, x_tot, x_max)
    op = OperationPlan(x[model.blocks["ys"]], x[model.blocks["yd"]], x[model.blocks["soc"]], x[model.blocks["soc0"]])
    violations = validate_operation(
        op, plan, specs, storage, horizon, series,
        load_shedding=model.meta["load_shedding"], market_participation=model.meta["market_participation"],
        cycle_scope=model.meta["cycle_scope"], tol=FEAS_TOL,
    )
    if violations:
        head = ", ".join(f"{v.constraint}{v.index}={v.residual:.3g}" for v in violations[:5])
        raise ExtractionError(f"{len(violations)} constraint violations: {head}", violations)
    costs = cost_breakdown(plan, op, specs, horizon, series)
    objective = float(model.cost @ x + model.offset)
    if abs(costs.total - objective) > OBJ_RTOL * max(1.0, abs(objective)):
        raise ExtractionError(f"recomputed cost {costs.total:.9g} differs from objective {objective:.9g}")
    return plan, op, costs


def build_experiment_model(instance: PlanningInstance, config: ExperimentConfig) -> MilpModel:
    """Full model with the experiment's shedding and market-participation variants, finalized."""
    m = build_full_model(instance.specs, instance.storage, instance.horizon, instance.series, config)
    if not config.load_shedding:
        m = add_no_load_shedding(m)
    if config.market_restricted:
        m = add_market_participation(m, compute_bigM(m.meta["specs"], instance.horizon, instance.series))
    return m.finalize()
