import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridstore.formulation import (
    ExperimentConfig,
    ExtractionError,
    add_market_participation,
    add_market_participation_fixed_grid,
    add_no_load_shedding,
    build_experiment_model,
    build_full_model,
    compute_bigM,
    extract_solution,
    fix_investments,
)
from gridstore.model import ExogenousSeries, Horizon, PlanningInstance, ResourceKind, StorageSpec, make_plan
from gridstore.model.types import B, DL, G, S
from gridstore.solver import LpProblem, SolverOptions, Status, solve_lp, solve_milp

from instances import random_instance, resource
from oracles import highs_lp, market_disjunction_enumeration

EXACT = SolverOptions(mip_gap=0.0)
GRID_ONLY = frozenset({ResourceKind.GRID})
NOTHING = frozenset()


def instance(load, price, caps=(0.0, 10.0, 0.0), C=1, storage=None, load_value=0.0, grid_hi=20.0,
             grid_fixed=0.0, grid_unit=0.1, backup_price=305.0, day_weights=None):
    load = np.asarray(load, dtype=float)
    N, J, K = load.shape
    b, g, s = caps
    specs = {
        ResourceKind.BACKUP: resource("b", [b], 0.0, 10.0, 0.2, 1.0, n=N),
        ResourceKind.GRID: resource("g", np.atleast_1d(g), 0.0, grid_hi, grid_unit, grid_fixed, n=N),
        ResourceKind.STORAGE: resource("s", [s], 0.0, 10.0, 0.3, 1.0, n=N),
    }
    tw = (1.0,) if C == 1 else (0.9, 0.1)
    horizon = Horizon(N, J, K, duration_weights=tw, day_weights=day_weights)
    series = ExogenousSeries.from_prices(load, price, backup_price=backup_price, load_value=load_value)
    return PlanningInstance(specs, storage or StorageSpec(1.0, 1.0, 2.0, 10.0), horizon, series)


def solve_model(model):
    prob = model.to_problem()
    sol = solve_milp(prob, EXACT) if prob.integrality.any() else solve_lp(prob)
    return sol


def operating(inst, market=False, shedding=False):
    """g*(x) (or the market-restricted version) for the preinstalled fleet, by (n, c)."""
    cfg = ExperimentConfig(investable=NOTHING, load_shedding=shedding)
    m = build_full_model(inst.specs, inst.storage, inst.horizon, inst.series, cfg)
    if not shedding:
        m = add_no_load_shedding(m)
    if market:
        m = add_market_participation_fixed_grid(m, m.meta["fixed_capacity"][G], inst.series)
    m = m.finalize()
    sol = solve_lp(m.to_problem())
    if sol.status == Status.INFEASIBLE:
        return None
    assert sol.status == Status.OPTIMAL
    return extract_solution(m, sol.x)[2].operating


def expected_var_count(N, J, K, C, inv):
    n = 0
    for kind in inv:
        n += 2 * N
        n += N * C + N if kind == ResourceKind.GRID else N
    return n + 7 * N * J * K * C + N


# ------------------------------------------------------------ structure

@pytest.mark.parametrize("shape", [(1, 1, 2, 1), (2, 3, 4, 2), (3, 1, 5, 1)])
@pytest.mark.parametrize("inv", [GRID_ONLY, frozenset({ResourceKind.GRID, ResourceKind.STORAGE}),
                                 frozenset(ResourceKind)])
def test_variable_count(shape, inv):
    N, J, K, C = shape
    inst = random_instance(np.random.default_rng(0), N=N, J=J, K=K, C=C)
    m = build_full_model(inst.specs, inst.storage, inst.horizon, inst.series, ExperimentConfig(investable=inv))
    assert m.n_vars == expected_var_count(N, J, K, C, inv)


def test_grid_only_single_day_count_by_hand():
    inst = instance(np.ones((1, 1, 2)), 10.0)
    m = build_full_model(inst.specs, inst.storage, inst.horizon, inst.series, ExperimentConfig(investable=GRID_ONLY))
    # x_g, z_g, x_max, x_tot_g, 6 supply, 6 demand, 2 SoC, 1 initial SoC
    assert m.n_vars == 19


def test_registry_is_bijective():
    inst = random_instance(np.random.default_rng(1), N=2, J=2, K=3, C=2)
    m = build_experiment_model(inst, ExperimentConfig(market_mode="peak_only"))
    seen = {m.lookup(i) for i in range(m.n_vars)}
    assert len(seen) == m.n_vars
    for i in range(0, m.n_vars, 7):
        role, idx = m.lookup(i)
        assert m.var_id(role, idx) == i
    lb, ub = m.lb[m.binary], m.ub[m.binary]
    assert np.all(lb >= 0) and np.all(ub <= 1)


@pytest.mark.parametrize("C", [1, 2])
def test_binary_count(C):
    N, J, K = 2, 2, 3
    inst = random_instance(np.random.default_rng(2), N=N, J=J, K=K, C=C)
    for inv in (GRID_ONLY, frozenset(ResourceKind)):
        full = build_experiment_model(inst, ExperimentConfig(investable=inv))
        assert int(full.binary.sum()) == len(inv) * N
        peak = build_experiment_model(inst, ExperimentConfig(investable=inv, market_mode="peak_only"))
        extra = 0
        if C >= 2 and peak.has("xmax_pick"):
            # largest-unit selection binaries added with the contingency fix
            extra = peak.blocks["xmax_pick"].size + peak.blocks["xmax_pre"].size
        assert int(peak.binary.sum()) == len(inv) * N + N * J * K * C + extra


def test_missing_spec_is_rejected():
    inst = random_instance(np.random.default_rng(3), N=1, J=1, K=2, C=1)
    specs = {k: v for k, v in inst.specs.items() if k != ResourceKind.BACKUP}
    with pytest.raises(ValueError):
        build_full_model(specs, inst.storage, inst.horizon, inst.series, ExperimentConfig())


# --------------------------------------------------------- small solves

def test_zero_instance_is_free():
    inst = instance(np.zeros((1, 1, 3)), 40.0, caps=(0.0, 0.0, 0.0))
    m = build_experiment_model(inst, ExperimentConfig(investable=GRID_ONLY))
    sol = solve_model(m)
    assert sol.objective == pytest.approx(0.0, abs=1e-9)
    zero = np.zeros(m.n_vars)
    plan, op, costs = extract_solution(m, zero)
    assert costs.total == 0.0
    assert not plan.x.any() and not op.supply.any()


def test_experiment1_toy_forces_grid_build():
    # two 4 MW cables; losing one leaves 4 MW against a 6 MW second-period peak
    load = np.array([[[3.0, 3.5]], [[5.0, 6.0]]])
    inst = instance(load, 30.0, caps=(0.0, [4.0, 4.0], 0.0), C=2, grid_hi=10.0)
    cfg = ExperimentConfig(name="exp1", market_mode="peak_only", investable=GRID_ONLY)
    m = build_experiment_model(inst, cfg)
    sol = solve_model(m)
    assert sol.status == Status.OPTIMAL
    plan, _, _ = extract_solution(m, sol.x)
    assert plan.z[G].sum() >= 1
    idle = fix_investments(m, make_plan(np.zeros((3, 2)), inst.specs, inst.horizon))
    assert solve_model(idle).status == Status.INFEASIBLE


def test_no_shedding_bounds_and_idempotence():
    inst = random_instance(np.random.default_rng(4), N=1, J=2, K=3, C=1)
    m = build_full_model(inst.specs, inst.storage, inst.horizon, inst.series, ExperimentConfig(load_shedding=True))
    once = add_no_load_shedding(m)
    twice = add_no_load_shedding(once)
    ids = once.blocks["yd"][DL]
    load = np.broadcast_to(inst.series.load[..., None], ids.shape)
    np.testing.assert_array_equal(once.lb[ids], load)
    np.testing.assert_array_equal(once.ub[ids], load)
    np.testing.assert_array_equal(once.lb, twice.lb)
    np.testing.assert_array_equal(once.ub, twice.ub)


def test_shedding_lowers_cost_at_high_load_value():
    # a 1 MW one-hour overload either buys a 5 M$ grid build or is shed at 9,337 $/MWh
    load = np.array([[[4.0, 6.0, 5.0]]])
    inst = instance(load, 30.0, caps=(0.0, 5.0, 0.0), load_value=9337.0, grid_fixed=5e6)
    strict = ExperimentConfig(investable=GRID_ONLY, load_shedding=False)
    loose = ExperimentConfig(investable=GRID_ONLY, load_shedding=True)
    a = solve_model(build_experiment_model(inst, strict))
    b = solve_model(build_experiment_model(inst, loose))
    assert b.objective < a.objective - 1.0
    # shedding 1 MWh forgoes 9,337 $ of value and saves 30 $ of energy
    assert b.objective - a.objective == pytest.approx(9337.0 - 30.0 - 5e6 - 0.1 * 1e3 * 1.0, abs=1e-6)


def test_zero_load_same_with_or_without_shedding():
    inst = instance(np.zeros((1, 2, 3)), [10.0, 40.0, 20.0], caps=(1.0, 5.0, 1.0))
    for inv in (GRID_ONLY, frozenset(ResourceKind)):
        a = solve_model(build_experiment_model(inst, ExperimentConfig(investable=inv, load_shedding=False)))
        b = solve_model(build_experiment_model(inst, ExperimentConfig(investable=inv, load_shedding=True)))
        assert a.objective == pytest.approx(b.objective, abs=1e-9)


# ----------------------------------------------------------------- big-M

def test_bigM_lower_constants():
    load = np.full((1, 1, 3), 60.0)
    load[0, 0, 1] = 98.0
    inst = instance(load, 30.0, grid_hi=40.0)
    bm = compute_bigM(inst.specs, inst.horizon, inst.series)
    assert bm.lower1 == bm.lower2 == -178.0


def test_bigM_upper_constants():
    load = np.array([[[57.0, 80.0]]])
    inst = instance(load, 30.0, caps=(0.0, [37.0, 37.0], 0.0), C=2, grid_hi=40.0)
    bm = compute_bigM(inst.specs, inst.horizon, inst.series)
    assert bm.upper1[0, 0, 0, 0] == -17.0
    assert bm.upper1[0, 0, 0, 1] == 57.0 - 37.0
    assert bm.upper2[0, 0, 0] == 57.0


def test_ample_preinstalled_grid_stays_feasible():
    # 50 MW already exceeds max load + 2 * x_bar_g = 22 MW
    inst = instance(np.array([[[5.0, 6.0, 4.0]]]), 30.0, caps=(0.0, 50.0, 0.0), grid_hi=8.0)
    bm = compute_bigM(inst.specs, inst.horizon, inst.series)
    assert bm.lower1 <= 4.0 - 58.0
    m = build_experiment_model(inst, ExperimentConfig(market_mode="peak_only", investable=GRID_ONLY))
    sol = solve_model(m)
    assert sol.status == Status.OPTIMAL
    assert sol.objective == pytest.approx(market_disjunction_enumeration(m), abs=1e-7)
    assert sol.objective == pytest.approx(450.0, abs=1e-7)


def test_bigM_exposes_storage_buildout():
    inst = instance(np.array([[[1.0, 3.0, 1.0, 3.0]]]), 30.0)
    bm = compute_bigM(inst.specs, inst.horizon, inst.series, inst.storage)
    assert bm.storage_buildout == pytest.approx(1.0 + 10.0)


def _market_instance(seed, K=3):
    rng = np.random.default_rng(seed)
    load = rng.uniform(2.0, 9.0, size=(1, 1, K))
    price = rng.uniform(5.0, 80.0, size=(1, 1, K))
    caps = (float(rng.uniform(0, 3)), float(rng.uniform(0, 6)), float(rng.uniform(0, 2)))
    return instance(load, price, caps=caps, grid_hi=8.0, grid_fixed=float(rng.uniform(0, 100)),
                    grid_unit=float(rng.uniform(0.01, 0.5)), backup_price=float(rng.uniform(20, 120)),
                    storage=StorageSpec(0.95, 0.95, 2.0, float(rng.uniform(0.2, 2.0))))


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("inv", [GRID_ONLY, frozenset({ResourceKind.GRID, ResourceKind.STORAGE})])
def test_bigM_matches_disjunction_enumeration(seed, inv):
    inst = _market_instance(seed)
    m = build_experiment_model(inst, ExperimentConfig(market_mode="peak_only", investable=inv))
    sol = solve_model(m)
    ref = market_disjunction_enumeration(m)
    if ref is None:
        assert sol.status == Status.INFEASIBLE
    else:
        assert sol.status == Status.OPTIMAL
        assert sol.objective == pytest.approx(ref, rel=1e-9, abs=1e-6)


def test_market_branches():
    inst = instance(np.array([[[6.0, 3.0]]]), 30.0, caps=(5.0, 4.0, 0.0))
    cfg = ExperimentConfig(market_mode="peak_only", investable=NOTHING)
    m = build_experiment_model(inst, cfg)
    sol = solve_model(m)
    _, op, _ = extract_solution(m, sol.x)
    # hour 0 is short by 2 MW and backup may cover at most that; hour 1 has no shortfall
    assert op.supply[B, 0, 0, 0, 0] <= 2.0 + 1e-9
    assert op.supply[B, 0, 0, 1, 0] == pytest.approx(0.0, abs=1e-9)


def test_fixed_grid_linear_form():
    inst = instance(np.array([[[6.0, 3.0]]]), 30.0, caps=(5.0, 4.0, 1.0))
    cfg = ExperimentConfig(investable=NOTHING)
    m = add_no_load_shedding(build_full_model(inst.specs, inst.storage, inst.horizon, inst.series, cfg))
    lin = add_market_participation_fixed_grid(m, np.array([[4.0]]), inst.series)
    rows = np.asarray(lin.families["mkt_fixed"]).ravel()
    np.testing.assert_allclose(lin.to_problem().rhs[rows], [2.0, 0.0])
    with pytest.raises(ValueError):
        add_market_participation_fixed_grid(build_full_model(inst.specs, inst.storage, inst.horizon, inst.series,
                                                             cfg), np.array([[4.0]]), inst.series)
    free = add_no_load_shedding(build_full_model(inst.specs, inst.storage, inst.horizon, inst.series,
                                                 ExperimentConfig(investable=GRID_ONLY)))
    with pytest.raises(ValueError):
        add_market_participation_fixed_grid(free, np.array([[4.0]]), inst.series)


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("C", [1, 2])
def test_fixed_grid_equivalence(seed, C):
    rng = np.random.default_rng(100 + seed)
    J, K = 2, 3
    load = rng.uniform(2.0, 9.0, size=(1, J, K))
    grid = [float(rng.uniform(1, 5)), float(rng.uniform(1, 5))] if C == 2 else [float(rng.uniform(2, 8))]
    inst = instance(load, rng.uniform(5, 80, size=(1, J, K)), caps=(2.0, grid, 1.0), C=C,
                    backup_price=float(rng.uniform(20, 120)))
    cfg = ExperimentConfig(market_mode="peak_only", investable=frozenset({ResourceKind.BACKUP, ResourceKind.STORAGE}))
    big = build_experiment_model(inst, cfg)
    base = add_no_load_shedding(build_full_model(inst.specs, inst.storage, inst.horizon, inst.series, cfg))
    lin = add_market_participation_fixed_grid(base, base.meta["fixed_capacity"][G], inst.series).finalize()
    a, b = solve_model(big), solve_model(lin)
    assert a.status == b.status
    if a.status == Status.OPTIMAL:
        assert a.objective == pytest.approx(b.objective, rel=1e-6)


# ---------------------------------------------------- fix and extract

def test_fix_zero_plan_with_enough_preinstalled():
    inst = instance(np.array([[[4.0, 6.0, 5.0]]]), 30.0, caps=(0.0, 10.0, 0.0))
    m = build_experiment_model(inst, ExperimentConfig(investable=frozenset(ResourceKind)))
    fixed = fix_investments(m, make_plan(np.zeros((3, 1)), inst.specs, inst.horizon))
    sol = solve_model(fixed)
    assert sol.status == Status.OPTIMAL
    assert sol.objective == pytest.approx(30.0 * 15.0)


def test_three_hour_dispatch_by_hand():
    # 1 MW / 2 MWh lossless storage: charge 1 MWh at 20, discharge it at 50
    inst = instance(np.array([[[4.0, 6.0, 5.0]]]), np.array([[[20.0, 50.0, 30.0]]]), caps=(0.0, 10.0, 1.0))
    g = operating(inst)
    assert g[0, 0] == pytest.approx(4 * 20 + 1 * 20 + 5 * 50 + 5 * 30, abs=1e-7)
    # storage may only cover grid shortfall, and there is none
    assert operating(inst, market=True)[0, 0] == pytest.approx(4 * 20 + 6 * 50 + 5 * 30, abs=1e-7)


def test_fix_rejects_inadmissible_plan():
    inst = instance(np.ones((1, 1, 2)), 30.0)
    m = build_experiment_model(inst, ExperimentConfig(investable=GRID_ONLY))
    plan = make_plan(np.array([[0.0], [25.0], [0.0]]), inst.specs, inst.horizon)
    with pytest.raises(ValueError):
        fix_investments(m, plan)
    only_grid = make_plan(np.array([[1.0], [0.0], [0.0]]), inst.specs, inst.horizon)
    with pytest.raises(ValueError):
        fix_investments(m, only_grid)


def test_binary_rounding_at_extraction():
    inst = random_instance(np.random.default_rng(7), N=1, J=1, K=2, C=1)
    m = build_experiment_model(inst, ExperimentConfig())
    sol = solve_model(m)
    x = sol.x.copy()
    bins = np.flatnonzero(m.binary)
    x[bins] += np.where(x[bins] > 0.5, -5e-7, 5e-7)
    plan, _, _ = extract_solution(m, x)
    assert set(np.unique(plan.z)) <= {0.0, 1.0}
    x[bins[0]] = 0.01
    with pytest.raises(ExtractionError):
        extract_solution(m, x)
    with pytest.raises(ExtractionError):
        extract_solution(m, x[:-1])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["full", "peak_only"]), st.booleans())
def test_random_solutions_extract_and_recompute(seed, mode, shed):
    inst = random_instance(np.random.default_rng(seed), K=3, equal_grid=True)
    m = build_experiment_model(inst, ExperimentConfig(market_mode=mode, load_shedding=shed))
    sol = solve_model(m)
    if sol.status == Status.INFEASIBLE:
        return
    assert sol.status == Status.OPTIMAL
    _, _, costs = extract_solution(m, sol.x)
    assert costs.total == pytest.approx(sol.objective, rel=1e-6, abs=1e-6)


# ------------------------------------------------ operating-cost shape

def _caps_instance(seed, caps, C=1):
    rng = np.random.default_rng(seed)
    load = rng.uniform(1.0, 6.0, size=(1, 2, 4))
    price = rng.uniform(5.0, 90.0, size=(1, 2, 4))
    return instance(load, price, caps=caps, C=C, load_value=300.0, backup_price=60.0,
                    storage=StorageSpec(0.9, 0.95, 2.0, 1.0), day_weights=np.array([2.0, 1.0]))


capacity = st.floats(0.0, 6.0, allow_nan=False)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000), st.tuples(capacity, capacity, capacity), st.integers(0, 2), st.floats(0.0, 3.0))
def test_operating_cost_nonincreasing_in_capacity(seed, caps, r, delta):
    more = list(caps)
    more[r] += delta
    a = operating(_caps_instance(seed, caps), shedding=True)
    b = operating(_caps_instance(seed, tuple(more)), shedding=True)
    assert b.sum() <= a.sum() + 1e-6


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000), st.tuples(capacity, capacity, capacity), st.tuples(capacity, capacity, capacity))
def test_operating_cost_midpoint_convex(seed, a, b):
    mid = tuple(0.5 * (u + v) for u, v in zip(a, b))
    ga = operating(_caps_instance(seed, a), shedding=True).sum()
    gb = operating(_caps_instance(seed, b), shedding=True).sum()
    gm = operating(_caps_instance(seed, mid), shedding=True).sum()
    assert gm <= 0.5 * (ga + gb) + 1e-6 * max(1.0, abs(ga) + abs(gb))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000), st.tuples(capacity, capacity, capacity), st.sampled_from([1, 2]))
def test_market_restriction_never_lowers_cost(seed, caps, C):
    grid = caps[1] + 4.0
    inst = _caps_instance(seed, (caps[0], [grid, grid / 2] if C == 2 else grid, caps[2]), C=C)
    g = operating(inst)
    gbar = operating(inst, market=True)
    if g is None:
        assert gbar is None
        return
    if gbar is None:
        return
    assert np.all(gbar >= g - 1e-6)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000), st.tuples(capacity, capacity, capacity), st.sampled_from([B, S]), st.floats(0.0, 3.0))
def test_restricted_cost_nonincreasing_in_backup_and_storage(seed, caps, r, delta):
    caps = (caps[0], caps[1] + 4.0, caps[2])
    more = list(caps)
    more[r] += delta
    a = operating(_caps_instance(seed, caps), market=True)
    b = operating(_caps_instance(seed, tuple(more)), market=True)
    if a is None:
        return
    assert b is not None
    assert b.sum() <= a.sum() + 1e-6


def _max_nongrid_supply(inst, grid, cell):
    """Largest backup plus storage output in one hour when grid capacity is ``grid``."""
    caps = (2.0, grid, 1.5)
    inst = instance(inst.series.load, 30.0, caps=caps)
    m = add_no_load_shedding(build_full_model(inst.specs, inst.storage, inst.horizon, inst.series,
                                              ExperimentConfig(investable=NOTHING)))
    m = add_market_participation_fixed_grid(m, m.meta["fixed_capacity"][G], inst.series).finalize()
    p = m.to_problem()
    c = np.zeros(p.n_vars)
    c[m.blocks["ys"][B][cell]] = -1.0
    c[m.blocks["ys"][S][cell]] = -1.0
    probe = LpProblem(c, p.A, p.senses, p.rhs, p.lb, p.ub)
    val = highs_lp(probe)
    return None if val is None else -val


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000), st.floats(0.0, 8.0), st.floats(0.0, 4.0), st.integers(0, 3))
def test_nongrid_limit_shrinks_with_grid(seed, grid, delta, k):
    inst = _caps_instance(seed, (0.0, 0.0, 0.0))
    cell = (0, 0, k, 0)
    lo = _max_nongrid_supply(inst, grid, cell)
    hi = _max_nongrid_supply(inst, grid + delta, cell)
    if lo is None or hi is None:
        return
    assert hi <= lo + 1e-7
