"""Solver-agnostic MILP container with a ``(role, index) -> id`` registry."""
from __future__ import annotations

import copy

import numpy as np
import scipy.sparse as sp

from ..solver.problem import LpProblem

SENSE = {"<=": "L", "==": "E", ">=": "G", "L": "L", "E": "E", "G": "G"}


class MilpModel:
    """Variables come in named blocks; constraints come in named families.

    Every variable id belongs to exactly one ``(role, index)`` pair, so the
    registry is a bijection. ``finalize`` freezes the model; the variant
    operations in :mod:`gridstore.formulation.builder` return modified copies.
    """

    def __init__(self, name: str = "gridstore"):
        self.name = name
        self.blocks: dict[str, np.ndarray] = {}
        self.families: dict[str, np.ndarray] = {}
        self.meta: dict = {}
        self.offset = 0.0
        self._lb: list[np.ndarray] = []
        self._ub: list[np.ndarray] = []
        self._cost: list[np.ndarray] = []
        self._binary: list[np.ndarray] = []
        self._priority: list[np.ndarray] = []
        self._rows: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        self._sense: list[np.ndarray] = []
        self._rhs: list[np.ndarray] = []
        self.n_vars = 0
        self.n_rows = 0
        self._frozen = False
        self._problem: LpProblem | None = None
        self._owner: list[str] = []

    # ------------------------------------------------------------ variables
    def add_vars(self, role: str, shape, lb=0.0, ub=np.inf, cost=0.0, binary=False, priority=0) -> np.ndarray:
        self._check_mutable()
        if role in self.blocks:
            raise ValueError(f"variable role {role!r} already exists")
        shape = tuple(int(s) for s in np.atleast_1d(shape)) if np.ndim(shape) else (int(shape),)
        size = int(np.prod(shape))
        ids = np.arange(self.n_vars, self.n_vars + size).reshape(shape)
        self.blocks[role] = ids
        lb = np.broadcast_to(np.asarray(lb, dtype=float), shape).ravel().copy()
        ub = np.broadcast_to(np.asarray(ub, dtype=float), shape).ravel().copy()
        if binary:
            lb = np.maximum(lb, 0.0)
            ub = np.minimum(ub, 1.0)
        self._lb.append(lb)
        self._ub.append(ub)
        self._cost.append(np.broadcast_to(np.asarray(cost, dtype=float), shape).ravel().copy())
        self._binary.append(np.full(size, bool(binary)))
        self._priority.append(np.full(size, int(priority), dtype=np.int64))
        self._owner.append(role)
        self.n_vars += size
        return ids

    def has(self, role: str) -> bool:
        return role in self.blocks

    def var_id(self, role: str, index=()) -> int:
        return int(self.blocks[role][tuple(index)])

    def lookup(self, var: int) -> tuple[str, tuple]:
        """Inverse registry: variable id to ``(role, index)``."""
        for role, ids in self.blocks.items():
            start = ids.flat[0] if ids.size else -1
            if ids.size and start <= var < start + ids.size:
                return role, tuple(int(i) for i in np.unravel_index(var - start, ids.shape))
        raise KeyError(var)

    # ---------------------------------------------------------- constraints
    def add_constraints(self, family: str, terms, sense: str, rhs) -> np.ndarray:
        """Add rows ``sum(coef * var) sense rhs``, one per entry of ``rhs``.

        ``terms`` is a list of ``(coef, ids)``. ``ids`` has shape
        ``rhs.shape + extra``; trailing ``extra`` axes are summed into each row.
        """
        self._check_mutable()
        rhs = np.asarray(rhs, dtype=float)
        shape = rhs.shape
        m = rhs.size
        row_base = np.arange(self.n_rows, self.n_rows + m).reshape(shape)
        ri, ci, vv = [], [], []
        for coef, ids in terms:
            ids = np.asarray(ids)
            ids = np.broadcast_to(ids, shape + ids.shape[len(shape):])
            extra = ids.ndim - len(shape)
            rows = np.broadcast_to(row_base.reshape(shape + (1,) * extra), ids.shape)
            coef = np.broadcast_to(np.asarray(coef, dtype=float), ids.shape)
            ri.append(rows.ravel())
            ci.append(ids.ravel())
            vv.append(coef.ravel())
        if ri:
            self._rows.append((np.concatenate(ri), np.concatenate(ci), np.concatenate(vv)))
        self._sense.append(np.full(m, SENSE[sense]))
        self._rhs.append(rhs.ravel().copy())
        if family in self.families:
            self.families[family] = np.concatenate([self.families[family].ravel(), row_base.ravel()])
        else:
            self.families[family] = row_base
        self.n_rows += m
        return row_base

    # ------------------------------------------------------------ objective
    def add_cost(self, ids, coef) -> None:
        self._check_mutable()
        ids = np.asarray(ids).ravel()
        coef = np.broadcast_to(np.asarray(coef, dtype=float), np.asarray(ids).shape).ravel()
        cost = self.cost
        np.add.at(cost, ids, coef)
        self._set_flat("_cost", cost)

    # --------------------------------------------------------------- access
    @property
    def lb(self) -> np.ndarray:
        return np.concatenate(self._lb) if self._lb else np.zeros(0)

    @property
    def ub(self) -> np.ndarray:
        return np.concatenate(self._ub) if self._ub else np.zeros(0)

    @property
    def cost(self) -> np.ndarray:
        return np.concatenate(self._cost) if self._cost else np.zeros(0)

    @property
    def binary(self) -> np.ndarray:
        return np.concatenate(self._binary) if self._binary else np.zeros(0, dtype=bool)

    @property
    def priority(self) -> np.ndarray:
        return np.concatenate(self._priority) if self._priority else np.zeros(0, dtype=np.int64)

    def _set_flat(self, attr: str, values: np.ndarray) -> None:
        setattr(self, attr, [values.copy()])

    def set_bounds(self, ids, lb=None, ub=None) -> None:
        self._check_mutable()
        ids = np.asarray(ids)
        flat = ids.ravel()
        if lb is not None:
            arr = self.lb
            arr[flat] = np.broadcast_to(np.asarray(lb, dtype=float), ids.shape).ravel()
            self._set_flat("_lb", arr)
        if ub is not None:
            arr = self.ub
            arr[flat] = np.broadcast_to(np.asarray(ub, dtype=float), ids.shape).ravel()
            self._set_flat("_ub", arr)

    def variable_names(self) -> list[str]:
        names = []
        for role, ids in self.blocks.items():
            for idx in np.ndindex(ids.shape):
                names.append(role + "".join(f"_{i}" for i in idx))
        return names

    def row_names(self) -> list[str]:
        names = [""] * self.n_rows
        for fam, rows in self.families.items():
            rows = np.asarray(rows)
            for idx in np.ndindex(rows.shape):
                names[int(rows[idx])] = fam + "".join(f"_{i}" for i in idx)
        return names

    # ------------------------------------------------------------ lifecycle
    def _check_mutable(self):
        if self._frozen:
            raise RuntimeError("model is finalized; use a copy")

    def finalize(self) -> "MilpModel":
        self._frozen = True
        return self

    @property
    def finalized(self) -> bool:
        return self._frozen

    def copy(self) -> "MilpModel":
        new = copy.copy(self)
        new.blocks = dict(self.blocks)
        new.families = dict(self.families)
        new.meta = dict(self.meta)
        for attr in ("_lb", "_ub", "_cost", "_binary", "_priority", "_rows", "_sense", "_rhs", "_owner"):
            setattr(new, attr, list(getattr(self, attr)))
        new._lb = [self.lb]
        new._ub = [self.ub]
        new._cost = [self.cost]
        new._frozen = False
        new._problem = None
        return new

    def to_problem(self, names: bool = False) -> LpProblem:
        if self._problem is not None and not names:
            return self._problem
        if self._rows:
            ri = np.concatenate([r[0] for r in self._rows])
            ci = np.concatenate([r[1] for r in self._rows])
            vv = np.concatenate([r[2] for r in self._rows])
        else:
            ri = ci = np.zeros(0, dtype=np.int64)
            vv = np.zeros(0)
        A = sp.csr_matrix((vv, (ri, ci)), shape=(self.n_rows, self.n_vars))
        senses = np.concatenate(self._sense) if self._sense else np.zeros(0, dtype="<U1")
        rhs = np.concatenate(self._rhs) if self._rhs else np.zeros(0)
        prob = LpProblem(
            self.cost, A, senses, rhs, self.lb, self.ub,
            integrality=self.binary, priority=self.priority,
            var_names=self.variable_names() if names else None,
            row_names=self.row_names() if names else None,
            name=self.name[:8].upper(), offset=self.offset,
        )
        if self._frozen and not names:
            self._problem = prob
        return prob

    def summary(self) -> dict:
        return {
            "variables": self.n_vars,
            "binaries": int(self.binary.sum()),
            "constraints": self.n_rows,
            "roles": {r: int(ids.size) for r, ids in self.blocks.items()},
            "families": {f: int(np.asarray(rows).size) for f, rows in self.families.items()},
        }
