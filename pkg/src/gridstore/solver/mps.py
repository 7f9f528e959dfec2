"""Fixed-format MPS writer and a matching reader.

Names are cut to 8 characters. When two names collide after the cut, the
later one becomes ``<prefix>~<n>`` with the smallest free counter ``n``.
Binary columns get a ``BV`` bound; the objective constant is written as the
negated right-hand side of the cost row.
"""
from __future__ import annotations

import io

import numpy as np
import scipy.sparse as sp

from .problem import LpProblem

OBJ_ROW = "COST"
_WIDTH = 12


def _compact(s: str) -> str:
    # 1.5e+07 -> 1.5e7, 2e-05 -> 2e-5
    if "e" not in s:
        return s
    mant, exp = s.split("e")
    return f"{mant}e{int(exp)}"


def format_number(v: float) -> str:
    """Shortest round-trip text that fits a 12-character MPS field."""
    v = float(v)
    if v == 0.0:
        return "0.0"
    if not np.isfinite(v):
        raise ValueError("cannot write a non-finite number to MPS")
    s = repr(v)
    if len(s) <= _WIDTH:
        return s
    for p in range(15, 0, -1):
        s = _compact(f"{v:.{p}g}")
        if len(s) <= _WIDTH:
            r = repr(float(s))
            return r if len(r) <= _WIDTH else s
    raise ValueError(f"cannot fit {v!r} into {_WIDTH} characters")


def unique_names(names, reserved=()) -> list[str]:
    """Truncate to 8 characters and disambiguate deterministically."""
    used = set(reserved)
    out = []
    for raw in names:
        base = "".join(ch if 33 <= ord(ch) < 127 else "_" for ch in str(raw)) or "_"
        name = base[:8]
        n = 1
        while name in used:
            suffix = f"~{n}"
            name = base[: 8 - len(suffix)] + suffix
            n += 1
        used.add(name)
        out.append(name)
    return out


def _line(*fields) -> str:
    # field starts: 2, 5, 15, 25, 40, 50 (1-based)
    starts = (1, 4, 14, 24, 39, 49)
    buf = ""
    for start, f in zip(starts, fields):
        if not f:
            continue
        buf = buf.ljust(start) + f
    return buf.rstrip() + "\n"


def _pairs(header, entries):
    """Two (name, value) entries per line, grouped by header field."""
    out = []
    for i in range(0, len(entries), 2):
        chunk = entries[i: i + 2]
        if len(chunk) == 2:
            out.append(_line("", header, chunk[0][0], format_number(chunk[0][1]),
                             chunk[1][0], format_number(chunk[1][1])))
        else:
            out.append(_line("", header, chunk[0][0], format_number(chunk[0][1])))
    return out


def export_mps(problem: LpProblem) -> bytes:
    n, m = problem.n_vars, problem.n_rows
    vnames = unique_names(problem.var_names or [f"C{j}" for j in range(n)])
    rnames = unique_names(problem.row_names or [f"R{i}" for i in range(m)], reserved=(OBJ_ROW,))
    out = io.StringIO()
    out.write(f"NAME          {problem.name[:8] or 'PROBLEM'}\n")
    out.write("ROWS\n")
    out.write(_line("N", OBJ_ROW))
    for i in range(m):
        out.write(_line(problem.senses[i], rnames[i]))
    out.write("COLUMNS\n")
    A = problem.A.tocsc()
    A.sort_indices()
    for j in range(n):
        entries = []
        if problem.c[j] != 0.0:
            entries.append((OBJ_ROW, problem.c[j]))
        s, e = A.indptr[j], A.indptr[j + 1]
        entries += [(rnames[i], v) for i, v in zip(A.indices[s:e], A.data[s:e]) if v != 0.0]
        if not entries:
            # keep empty columns visible to readers
            entries.append((OBJ_ROW, 0.0))
        for line in _pairs(vnames[j], entries):
            out.write(line)
    out.write("RHS\n")
    rhs_entries = []
    if problem.offset != 0.0:
        rhs_entries.append((OBJ_ROW, -problem.offset))
    rhs_entries += [(rnames[i], problem.rhs[i]) for i in range(m) if problem.rhs[i] != 0.0]
    for line in _pairs("RHS", rhs_entries):
        out.write(line)
    out.write("RANGES\n")
    out.write("BOUNDS\n")
    for j in range(n):
        lo, up, name = problem.lb[j], problem.ub[j], vnames[j]
        if problem.integrality[j] and lo == 0.0 and up == 1.0:
            out.write(_line("BV", "BND", name))
            continue
        if lo == up:
            out.write(_line("FX", "BND", name, format_number(lo)))
            continue
        if np.isneginf(lo) and np.isposinf(up):
            out.write(_line("FR", "BND", name))
            continue
        if np.isneginf(lo):
            out.write(_line("MI", "BND", name))
        elif lo != 0.0 or up < 0.0:
            out.write(_line("LO", "BND", name, format_number(lo)))
        if np.isfinite(up):
            out.write(_line("UP", "BND", name, format_number(up)))
    out.write("ENDATA\n")
    return out.getvalue().encode("ascii")


def read_mps(data: bytes | str) -> LpProblem:
    """Parse MPS text (fixed or whitespace-separated fields) into an ``LpProblem``."""
    text = data.decode("ascii") if isinstance(data, bytes) else data
    name = "PROBLEM"
    section = None
    obj_row = None
    row_names: list[str] = []
    senses: list[str] = []
    row_index: dict[str, int] = {}
    col_index: dict[str, int] = {}
    col_names: list[str] = []
    cost: dict[int, float] = {}
    trip_r, trip_c, trip_v = [], [], []
    rhs: dict[int, float] = {}
    ranges: dict[int, float] = {}
    offset = 0.0
    bounds: dict[int, list] = {}
    binary: set[int] = set()

    def col(nm):
        if nm not in col_index:
            col_index[nm] = len(col_names)
            col_names.append(nm)
        return col_index[nm]

    for raw in text.splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            head = raw.split()
            section = head[0].upper()
            if section == "NAME" and len(head) > 1:
                name = head[1]
            if section == "ENDATA":
                break
            continue
        f = raw.split()
        if section == "ROWS":
            kind, rn = f[0].upper(), f[1]
            if kind == "N":
                if obj_row is None:
                    obj_row = rn
                continue
            row_index[rn] = len(row_names)
            row_names.append(rn)
            senses.append(kind)
        elif section == "COLUMNS":
            if len(f) >= 3 and f[1] == "'MARKER'":
                continue
            j = col(f[0])
            for rn, val in zip(f[1::2], f[2::2]):
                v = float(val)
                if rn == obj_row:
                    cost[j] = cost.get(j, 0.0) + v
                elif rn in row_index:
                    trip_r.append(row_index[rn])
                    trip_c.append(j)
                    trip_v.append(v)
                else:
                    raise ValueError(f"unknown row {rn!r} in COLUMNS")
        elif section in ("RHS", "RANGES"):
            pairs = f[1:] if len(f) % 2 == 1 else f
            for rn, val in zip(pairs[0::2], pairs[1::2]):
                v = float(val)
                if section == "RHS":
                    if rn == obj_row:
                        offset = -v
                    else:
                        rhs[row_index[rn]] = v
                else:
                    ranges[row_index[rn]] = v
        elif section == "BOUNDS":
            kind, cn = f[0].upper(), f[2]
            j = col(cn)
            val = float(f[3]) if len(f) > 3 else None
            b = bounds.setdefault(j, [0.0, np.inf])
            if kind == "UP":
                if val < 0 and b[0] == 0.0:
                    b[0] = -np.inf
                b[1] = val
            elif kind == "LO":
                b[0] = val
            elif kind == "FX":
                b[0] = b[1] = val
            elif kind == "FR":
                b[0], b[1] = -np.inf, np.inf
            elif kind == "MI":
                b[0] = -np.inf
            elif kind == "PL":
                b[1] = np.inf
            elif kind == "BV":
                b[0], b[1] = 0.0, 1.0
                binary.add(j)
            else:
                raise ValueError(f"unsupported bound type {kind}")

    n, m = len(col_names), len(row_names)
    A = sp.csr_matrix((trip_v, (trip_r, trip_c)), shape=(m, n))
    senses_a = np.array(senses, dtype="<U1")
    rhs_a = np.array([rhs.get(i, 0.0) for i in range(m)])
    if ranges:
        # ranged rows become two one-sided rows
        extra_rows, extra_rhs, extra_names = [], [], []
        for i, r in sorted(ranges.items()):
            s, b = senses_a[i], rhs_a[i]
            if s == "L":
                lo, hi = b - abs(r), b
            elif s == "G":
                lo, hi = b, b + abs(r)
            else:
                lo, hi = (b, b + r) if r >= 0 else (b + r, b)
            senses_a[i], rhs_a[i] = "G", lo
            extra_rows.append(i)
            extra_rhs.append(hi)
            extra_names.append(row_names[i] + "_R")
        A = sp.vstack([A, A[extra_rows]], format="csr")
        senses_a = np.concatenate([senses_a, np.full(len(extra_rows), "L")])
        rhs_a = np.concatenate([rhs_a, extra_rhs])
        row_names = row_names + extra_names
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    for j, (lo, up) in bounds.items():
        lb[j], ub[j] = lo, up
    integ = np.zeros(n, dtype=bool)
    integ[list(binary)] = True
    c = np.array([cost.get(j, 0.0) for j in range(n)])
    return LpProblem(c, A, senses_a, rhs_a, lb, ub, integrality=integ,
                     var_names=col_names, row_names=row_names, name=name, offset=offset)
