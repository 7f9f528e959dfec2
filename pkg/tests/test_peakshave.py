import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from gridstore.model import StorageSpec
from gridstore.peakshave import flatten_load, flattened_peak_closed_form, storage_upper_bound
from gridstore.solver import kernels

profiles = st.lists(st.floats(0.0, 100.0, allow_nan=False), min_size=1, max_size=24)
etas = st.floats(0.0, 1.0, allow_nan=False)


def scipy_peak(load, eta):
    """FL solved by HiGHS as an independent oracle."""
    y = np.asarray(load, dtype=float)
    K = y.size
    c = np.zeros(2 * K + 1)
    c[-1] = 1.0
    eye = np.eye(K)
    A = np.vstack([np.hstack([-eye, eye, -np.ones((K, 1))]),
                   np.concatenate([np.ones(K), -eta * np.ones(K), [0.0]])[None, :]])
    b = np.concatenate([-y, [0.0]])
    bounds = [(0, None)] * (2 * K) + [(None, None)]
    res = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
    assert res.status == 0
    return res.fun


def test_constant_load_needs_no_storage():
    res = flatten_load([5, 5, 5, 5], 0.7)
    assert res.flattened_peak == pytest.approx(5.0, abs=1e-9)
    assert np.all(res.charge == 0) and np.all(res.discharge == 0)
    assert res.required_power == 0 and res.duration is None


def test_lossless_two_hours_reach_mean():
    assert flatten_load([0, 2], 1.0).flattened_peak == pytest.approx(1.0, abs=1e-9)


def test_lossy_two_hours():
    assert flattened_peak_closed_form([4, 2], 0.25) == pytest.approx(3.6, abs=1e-12)
    assert flatten_load([4, 2], 0.25).flattened_peak == pytest.approx(3.6, abs=1e-9)


def test_optimum_below_eta_k():
    # m = 1 is optimal although eta * K = 9
    load = [10.0] + [0.0] * 9
    assert flattened_peak_closed_form(load, 0.9) == pytest.approx(1.0989010989010988, abs=1e-12)
    assert flatten_load(load, 0.9).flattened_peak == pytest.approx(1.0989010989010988, abs=1e-8)


@given(profiles)
def test_endpoints(load):
    assert flattened_peak_closed_form(load, 0.0) == pytest.approx(max(load), abs=1e-9)
    assert flattened_peak_closed_form(load, 1.0) == pytest.approx(float(np.mean(load)), abs=1e-9)


@given(profiles, etas, etas)
def test_nonincreasing_in_efficiency(load, a, b):
    lo, hi = min(a, b), max(a, b)
    assert flattened_peak_closed_form(load, lo) >= flattened_peak_closed_form(load, hi) - 1e-9


@given(profiles, etas, etas)
def test_convex_in_efficiency(load, a, b):
    mid = flattened_peak_closed_form(load, 0.5 * (a + b))
    avg = 0.5 * (flattened_peak_closed_form(load, a) + flattened_peak_closed_form(load, b))
    assert mid <= avg + 1e-9 * max(1.0, max(load))


@given(profiles, etas, st.randoms(use_true_random=False))
def test_permutation_invariant(load, eta, rnd):
    shuffled = list(load)
    rnd.shuffle(shuffled)
    assert flattened_peak_closed_form(shuffled, eta) == pytest.approx(
        flattened_peak_closed_form(load, eta), abs=1e-12, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(profiles, etas)
def test_closed_form_matches_lp(load, eta):
    phi = flattened_peak_closed_form(load, eta)
    res = flatten_load(load, eta)
    assert res.flattened_peak == pytest.approx(phi, abs=1e-7)
    assert phi == pytest.approx(scipy_peak(load, eta), abs=1e-7)
    assert float(np.mean(load)) - 1e-9 <= res.flattened_peak <= max(load) + 1e-9


@settings(max_examples=60, deadline=None)
@given(profiles, st.floats(0.05, 1.0), st.floats(0.25, 2.0))
def test_flatten_result_invariants(load, eta, dt):
    res = flatten_load(load, eta, dt=dt)
    assert np.all(res.charge >= 0) and np.all(res.discharge >= 0)
    # energy balance: what comes out is at most eta times what goes in
    assert res.discharge.sum() <= eta * res.charge.sum() + 1e-7 * (1 + res.charge.sum())
    net = np.asarray(load) - res.discharge + res.charge
    assert net.max() <= res.flattened_peak + 1e-6
    if res.duration is not None:
        assert res.duration <= len(load) * dt + 1e-9


def test_storage_upper_bound_flat_and_repeated():
    storage = StorageSpec(0.9, 0.9)
    assert storage_upper_bound(np.full((3, 24), 4.0), storage) == (0.0, None)
    day = np.r_[np.full(12, 1.0), np.full(12, 3.0)]
    power, duration = storage_upper_bound(np.stack([day, day, 0.5 * day]), storage)
    single = flatten_load(day, storage.roundtrip, eta_c=storage.eta_c)
    assert power == pytest.approx(single.required_power)
    assert duration == pytest.approx(single.duration)


def test_storage_upper_bound_rejects_empty():
    with pytest.raises(ValueError):
        storage_upper_bound(np.zeros((0, 24)), StorageSpec())


@given(profiles, etas)
def test_kernel_paths_agree(load, eta):
    y = np.sort(np.asarray(load, dtype=float))[::-1].copy()
    assert kernels.flattened_peak_nb(y, eta) == pytest.approx(kernels.flattened_peak_np(y, eta), rel=1e-12, abs=1e-12)
