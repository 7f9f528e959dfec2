import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from gridstore.solver import (
    BackendUnavailable,
    LpProblem,
    Solution,
    SolverOptions,
    Status,
    available_backends,
    get_backend,
    register_backend,
    resolve_backend_name,
    solve_lp,
    solve_milp,
)
from gridstore.solver import kernels

from oracles import enumerate_milp, highs_lp, random_lp, random_milp, vertex_enumeration


def lp(c, A, senses, rhs, lb=0.0, ub=np.inf, integ=None):
    c = np.atleast_1d(np.asarray(c, dtype=float))
    return LpProblem(c, sp.csr_matrix(np.atleast_2d(A)), np.array(senses), np.array(rhs, dtype=float),
                     lb, ub, integrality=integ)


def test_lower_bound_lp():
    sol = solve_lp(lp([1.0], [[1.0]], ["G"], [3.0], lb=-np.inf))
    assert sol.status == Status.OPTIMAL
    assert sol.objective == pytest.approx(3.0)


def test_max_via_negation():
    sol = solve_lp(lp([-1.0], [[1.0]], ["L"], [2.0]))
    assert sol.objective == pytest.approx(-2.0)


def test_infeasible_lp():
    sol = solve_lp(lp([1.0, 1.0], [[1.0, 1.0], [1.0, 1.0]], ["L", "G"], [1.0, 2.0]))
    assert sol.status == Status.INFEASIBLE


def test_unbounded_lp():
    sol = solve_lp(lp([-1.0, 0.0], [[1.0, -1.0]], ["L"], [1.0]))
    assert sol.status == Status.UNBOUNDED


def test_binaries_fixed_by_bounds_match_lp():
    rng = np.random.default_rng(3)
    p = random_milp(rng, n_bin=4, n_cont=3)
    bits = np.array([1.0, 0.0, 1.0, 1.0])
    lb, ub = p.lb.copy(), p.ub.copy()
    lb[:4] = ub[:4] = bits
    fixed = p.with_bounds(lb, ub)
    a = solve_milp(fixed)
    b = solve_lp(fixed.relaxation())
    assert a.status == b.status
    if a.ok:
        assert a.objective == pytest.approx(b.objective, abs=1e-9)


def test_integer_infeasible():
    p = lp([1.0, 1.0], [[1.0, 1.0]], ["E"], [1.5], ub=1.0, integ=np.array([True, True]))
    assert solve_milp(p).status == Status.INFEASIBLE


def test_lp_matches_vertex_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(40):
        p = random_lp(rng)
        ref = vertex_enumeration(p)
        sol = solve_lp(p)
        assert ref is not None
        assert sol.status == Status.OPTIMAL
        assert sol.objective == pytest.approx(ref, abs=1e-7)
        assert p.max_violation(sol.x) <= 1e-7


def test_twenty_variable_lps_match_highs():
    rng = np.random.default_rng(12)
    for _ in range(20):
        p = random_lp(rng, n=20, m=int(rng.integers(5, 15)))
        sol = solve_lp(p)
        assert sol.objective == pytest.approx(highs_lp(p), abs=1e-7)


def test_milp_matches_enumeration():
    rng = np.random.default_rng(21)
    for _ in range(15):
        p = random_milp(rng, n_bin=int(rng.integers(1, 7)))
        ref = enumerate_milp(p)
        sol = solve_milp(p, SolverOptions(mip_gap=0.0))
        assert sol.status == Status.OPTIMAL
        assert sol.objective == pytest.approx(ref, abs=1e-7)
        assert sol.gap <= 1e-5


def test_weak_duality_and_incumbent_history():
    rng = np.random.default_rng(31)
    for _ in range(10):
        p = random_milp(rng, n_bin=8, n_cont=3, m=4)
        sol = solve_milp(p, SolverOptions(mip_gap=0.0))
        assert sol.objective >= sol.bound - 1e-7
        inc = sol.incumbents
        assert all(b <= a + 1e-12 for a, b in zip(inc, inc[1:]))


def test_deterministic():
    rng = np.random.default_rng(41)
    p = random_milp(rng, n_bin=9, n_cont=2, m=5)
    a, b = solve_milp(p), solve_milp(p)
    assert a.status == b.status and a.nodes == b.nodes
    assert np.array_equal(a.x, b.x) and a.objective == b.objective


def test_node_limit_reports_gap():
    rng = np.random.default_rng(51)
    p = random_milp(rng, n_bin=10, n_cont=0, m=5)
    sol = solve_milp(p, SolverOptions(mip_gap=0.0, node_limit=1))
    assert sol.status in (Status.GAP_FEASIBLE, Status.OPTIMAL, Status.TIME_LIMIT)
    if sol.status == Status.GAP_FEASIBLE:
        assert np.isfinite(sol.gap)


def test_solver_options_validate():
    with pytest.raises(ValueError):
        SolverOptions(mip_gap=-1)
    assert SolverOptions().mip_gap == 1e-5 and SolverOptions().time_limit == 14400


def test_backend_registry():
    assert "reference" in available_backends()
    assert resolve_backend_name() in available_backends()
    with pytest.raises(BackendUnavailable):
        get_backend("no-such-solver")


def test_backend_env_and_override(monkeypatch):
    monkeypatch.setenv("GRIDSTORE_BACKEND", "highs")
    assert resolve_backend_name("reference") == "highs"
    assert resolve_backend_name("reference", "reference") == "reference"
    monkeypatch.delenv("GRIDSTORE_BACKEND")
    assert resolve_backend_name("highs") == "highs"
    assert resolve_backend_name() == "reference"


def test_reference_and_highs_agree():
    rng = np.random.default_rng(61)
    ref, hi = get_backend("reference"), get_backend("highs")
    for _ in range(15):
        p = random_milp(rng, n_bin=6, n_cont=3)
        a = ref.submit(p, SolverOptions(mip_gap=1e-9))
        b = hi.submit(p, SolverOptions(mip_gap=1e-9))
        assert a.status == b.status
        assert a.objective == pytest.approx(b.objective, rel=1e-6, abs=1e-9)


def test_mock_backend_solution_is_used_unchanged():
    from gridstore.experiments import solve_experiment
    from gridstore.formulation import ExperimentConfig, build_experiment_model
    from instances import random_instance

    inst = random_instance(np.random.default_rng(5), N=1, J=1, K=2, C=1)
    config = ExperimentConfig(name="mock", backend="mock")
    model = build_experiment_model(inst, config)
    true = get_backend("highs").submit(model.to_problem(), config.solver)

    class Mock:
        def submit(self, problem, options):
            return Solution(Status.OPTIMAL, x=true.x.copy(), objective=true.objective, bound=true.objective, gap=0.0)

    register_backend("mock", Mock)
    out = solve_experiment(inst, config)
    assert out.ok
    assert np.array_equal(out.x, true.x)
    assert out.result.objective == true.objective


# --------------------------------------------------------- kernel twins

@settings(max_examples=80)
@given(st.integers(1, 30), st.integers(0, 2**32 - 1), st.booleans())
def test_select_entering_twins(n, seed, bland):
    rng = np.random.default_rng(seed)
    d = rng.normal(size=n)
    status = rng.integers(0, 5, size=n).astype(np.int64)
    assert kernels.select_entering_nb(d, status, 1e-9, bland) == kernels.select_entering_np(d, status, 1e-9, bland)


@settings(max_examples=80)
@given(st.integers(1, 30), st.integers(0, 2**32 - 1), st.booleans())
def test_ratio_test_twins(m, seed, bland):
    rng = np.random.default_rng(seed)
    lb = rng.uniform(-5, 0, size=m)
    ub = lb + rng.uniform(0, 10, size=m)
    ub[rng.random(m) < 0.2] = np.inf
    xb = rng.uniform(-6, 12, size=m)
    delta = rng.normal(size=m)
    delta[rng.random(m) < 0.3] = 0.0
    head = rng.permutation(m).astype(np.int64)
    rng_ent = float(rng.choice([np.inf, rng.uniform(0, 5)]))
    a = kernels.ratio_test_nb(xb, lb, ub, delta, head, rng_ent, 1e-7, 1e-9, bland)
    b = kernels.ratio_test_np(xb, lb, ub, delta, head, rng_ent, 1e-7, 1e-9, bland)
    assert a[0] == b[0] and a[2] == b[2]
    assert a[1] == pytest.approx(b[1], rel=1e-12, abs=1e-12) or (np.isinf(a[1]) and np.isinf(b[1]))


def _eta_file(rng, m, n_eta):
    piv = rng.integers(0, m, size=n_eta).astype(np.int64)
    pval = rng.uniform(0.5, 2.0, size=n_eta) * rng.choice([-1, 1], size=n_eta)
    counts = rng.integers(0, m, size=n_eta)
    parts = [np.zeros(0, np.int64)]
    parts += [rng.choice(np.delete(np.arange(m), p), size=c, replace=False) for p, c in zip(piv, counts)]
    idx = np.concatenate(parts).astype(np.int64)
    start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    val = rng.normal(size=idx.size)
    return piv, pval, start, idx, val


@settings(max_examples=60)
@given(st.integers(2, 20), st.integers(0, 8), st.integers(0, 2**32 - 1))
def test_eta_twins(m, n_eta, seed):
    rng = np.random.default_rng(seed)
    file = _eta_file(rng, m, n_eta)
    v = rng.normal(size=m)
    for nb, npf in ((kernels.eta_ftran_nb, kernels.eta_ftran_np), (kernels.eta_btran_nb, kernels.eta_btran_np)):
        a = nb(v.copy(), *file, n_eta)
        b = npf(v.copy(), *file, n_eta)
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_propagate_twins(seed):
    rng = np.random.default_rng(seed)
    p = random_milp(rng)
    lo, hi = p.row_bounds()
    A = p.A.tocsr()
    args = (A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data, lo, hi)
    a = kernels.propagate_nb(*args, p.lb.copy(), p.ub.copy(), p.integrality, 1e-6, 20)
    b = kernels.propagate_np(*args, p.lb.copy(), p.ub.copy(), p.integrality, 1e-6, 20)
    assert a[2] == b[2]
    if not a[2]:
        np.testing.assert_allclose(a[0], b[0], rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(a[1], b[1], rtol=1e-9, atol=1e-9)


_SCRIPT = """
import numpy as np, sys
sys.path.insert(0, {tests!r})
from oracles import random_milp
from gridstore.solver import solve_milp, SolverOptions
from gridstore import _accel
rng = np.random.default_rng(7)
out = [_accel.USE_NUMBA]
for _ in range(8):
    s = solve_milp(random_milp(rng, n_bin=7, n_cont=3), SolverOptions(mip_gap=0.0))
    out.append(round(s.objective, 9))
print(out)
"""


def test_numba_and_numpy_paths_agree():
    tests = os.path.dirname(__file__)
    results = {}
    for flag in ("1", "0"):
        env = dict(os.environ, GRIDSTORE_NUMBA=flag)
        run = subprocess.run([sys.executable, "-c", _SCRIPT.format(tests=tests)], env=env,
                             capture_output=True, text=True, check=True)
        results[flag] = eval(run.stdout.strip())
    assert results["1"][0] is True and results["0"][0] is False
    assert results["1"][1:] == results["0"][1:]
