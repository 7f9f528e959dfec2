"""Load flattening with ideal storage and the resulting storage sizing.

An unconstrained battery may shift energy within one day subject only to a
roundtrip loss. The smallest achievable daily peak has a closed form via
the LP dual: with the load sorted in descending order ``y_1 >= ... >= y_K``

    phi = max_m (sum_{i<=m} y_i + eta * sum_{i>m} y_i) / (m + (K - m) * eta)

for ``m = 1..K``. Every ``m`` yields a dual-feasible point, so taking the
maximum over all of them is exact; the optimum can sit at an ``m`` below
``eta * K`` (load ``[10, 0, ..., 0]``), so the range is not narrowed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model.types import StorageSpec
from .solver import kernels
from .solver.problem import LpProblem, SolverOptions, Status
from .solver.simplex import solve_lp

_PEAK_SLACK = 1e-9


@dataclass(frozen=True)
class FlattenResult:
    flattened_peak: float
    charge: np.ndarray
    discharge: np.ndarray
    required_power: float
    required_energy: float

    @property
    def duration(self) -> float | None:
        """Energy-to-power ratio in hours; ``None`` when no power is needed."""
        if self.required_power <= 0:
            return None
        return self.required_energy / self.required_power


def flattened_peak_closed_form(load, eta_rt: float) -> float:
    y = np.sort(np.asarray(load, dtype=float).ravel())[::-1].copy()
    if y.size == 0:
        raise ValueError("empty load profile")
    if not 0 <= eta_rt <= 1:
        raise ValueError("roundtrip efficiency must lie in [0, 1]")
    return float(kernels.flattened_peak(y, float(eta_rt)))


def _split_efficiency(eta_rt, eta_c):
    if eta_c is None:
        eta_c = float(np.sqrt(eta_rt))
    eta_d = eta_rt / eta_c if eta_c > 0 else 0.0
    return eta_c, eta_d


def flatten_load(load, eta_rt: float, dt: float = 1.0, eta_c: float | None = None) -> FlattenResult:
    """Solve the flattening LP, then pick the schedule with least throughput.

    The second stage keeps the peak at its optimum (plus 1e-9 relative slack)
    and minimises total charge plus discharge, which makes the schedules and
    therefore the sizing reproducible. ``eta_c`` splits the roundtrip
    efficiency for the energy bookkeeping (default: symmetric split).

    Sizing: power is the largest charge or discharge rate; energy is the
    range of the ``dt``-scaled cumulative state of charge, starting from 0.
    """
    y = np.asarray(load, dtype=float).ravel()
    K = y.size
    if K == 0:
        raise ValueError("empty load profile")
    if np.any(y < 0):
        raise ValueError("load must be nonnegative")
    if not 0 <= eta_rt <= 1:
        raise ValueError("roundtrip efficiency must lie in [0, 1]")
    # columns: discharge s_k, charge d_k, peak t
    eye = sp.identity(K, format="csr")
    peak_rows = sp.hstack([-eye, eye, -np.ones((K, 1))], format="csr")  # y - s + d - t <= 0
    energy_row = sp.csr_matrix(np.concatenate([-np.ones(K), np.full(K, eta_rt), [0.0]])[None, :])
    A = sp.vstack([peak_rows, energy_row], format="csr")
    senses = np.array(["L"] * K + ["G"])
    rhs = np.concatenate([-y, [0.0]])
    lb = np.zeros(2 * K + 1)
    ub = np.full(2 * K + 1, np.inf)
    lb[-1] = -np.inf
    opts = SolverOptions()
    c1 = np.zeros(2 * K + 1)
    c1[-1] = 1.0
    first = solve_lp(LpProblem(c1, A, senses, rhs, lb, ub), opts)
    if first.status != Status.OPTIMAL:
        raise RuntimeError(f"flattening LP failed: {first.status.value}")
    peak = first.objective
    ub2 = ub.copy()
    ub2[-1] = peak + _PEAK_SLACK * (1.0 + abs(peak))
    c2 = np.concatenate([np.ones(2 * K), [0.0]])
    second = solve_lp(LpProblem(c2, A, senses, rhs, lb, ub2), opts)
    if second.status != Status.OPTIMAL:
        raise RuntimeError(f"throughput LP failed: {second.status.value}")
    s = second.x[:K]
    d = second.x[K: 2 * K]
    ec, ed = _split_efficiency(eta_rt, eta_c)
    flow = ec * d - (s / ed if ed > 0 else 0.0 * s)
    soc = dt * np.concatenate([[0.0], np.cumsum(flow)])
    power = float(max(s.max(initial=0.0), d.max(initial=0.0)))
    energy = float(soc.max() - soc.min())
    if power <= 1e-9:
        power, energy = 0.0, 0.0
        s = np.zeros(K)
        d = np.zeros(K)
    return FlattenResult(peak, d, s, power, energy)


def storage_upper_bound(profiles, storage: StorageSpec, dt: float = 1.0) -> tuple[float, float | None]:
    """Power (MW) and duration (h) needed to flatten every daily profile.

    ``profiles`` has the subperiods on its last axis. Duration is the largest
    energy need divided by the largest power need, ``None`` for flat input.
    """
    arr = np.asarray(profiles, dtype=float)
    if arr.size == 0:
        raise ValueError("no load profiles")
    days = arr.reshape(-1, arr.shape[-1])
    power = 0.0
    energy = 0.0
    cache: dict[bytes, FlattenResult] = {}
    for day in days:
        key = day.tobytes()
        res = cache.get(key)
        if res is None:
            res = flatten_load(day, storage.roundtrip, dt, eta_c=storage.eta_c)
            cache[key] = res
        power = max(power, res.required_power)
        energy = max(energy, res.required_energy)
    if power <= 0:
        return 0.0, None
    return power, energy / power
