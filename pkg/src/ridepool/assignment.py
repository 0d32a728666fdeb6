"""Maximum-weight one-to-one assignment with deterministic tie-breaking.

The matcher's second step assigns candidate pairs to idle vehicles by
maximizing total travel-time savings, each pair and vehicle used at most once
and rows allowed to stay unmatched. Because the row/column budgets are
inequalities, a maximizer never selects a cell with non-positive weight, so
absent cells and non-positive weights are equivalent and simply never appear
in the result.

Among equal-value optima the lexicographically smallest set of
``(row_key, col_key)`` tuples is returned (compared as a sorted sequence).
A consequence worth knowing: a zero-weight match never enters the result,
since leaving it out gives an equally valued but lexicographically smaller
set. The inner solver is scipy's Jonker-Volgonant implementation; uniqueness
is probed by re-solving with each chosen cell forbidden, and only when
alternate optima exist does the (exact, slower) lexicographic fixing pass run.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

_REL_TOL = 1e-9


def _tol(value: float) -> float:
    return _REL_TOL * max(1.0, abs(value))


def _optimal_value(m: np.ndarray):
    """Best total weight over partial matchings of the positive cells of ``m``.

    ``m`` holds 0.0 for skippable (absent or non-positive) cells; a full
    assignment of the short side therefore always exists and zero-cost cells
    act as "leave unmatched". Returns (value, [(i, j), ...] of positive cells).
    """
    r, c = m.shape
    if r == 0 or c == 0:
        return 0.0, []
    if r <= c:
        rows, cols = linear_sum_assignment(-m)
        chosen = [(int(i), int(j)) for i, j in zip(rows, cols) if m[i, j] > 0.0]
    else:
        rows, cols = linear_sum_assignment(-m.T)
        chosen = [(int(j), int(i)) for i, j in zip(rows, cols) if m[j, i] > 0.0]
    value = float(sum(m[i, j] for i, j in chosen))
    return value, chosen


def _lexi_smallest(m: np.ndarray, target: float):
    """Exact lexicographically-smallest optimum by greedy cell fixing.

    Scans positive cells in index order; a cell is fixed iff some optimum of
    the remaining problem contains it. Costs one inner solve per scanned
    cell, so this only runs when the optimum is not unique.
    """
    work = m.copy()
    fixed = []
    rows_used = set()
    cols_used = set()
    cells = sorted(zip(*np.nonzero(work > 0.0)))
    for i, j in cells:
        if target <= _tol(target):
            break
        if i in rows_used or j in cols_used or work[i, j] <= 0.0:
            continue
        rest = work.copy()
        rest[i, :] = 0.0
        rest[:, j] = 0.0
        v_rest, _ = _optimal_value(rest)
        if work[i, j] + v_rest >= target - _tol(target):
            fixed.append((int(i), int(j)))
            rows_used.add(i)
            cols_used.add(j)
            work = rest
            target = v_rest
    return fixed


def hungarian_assign(weights: dict) -> list:
    """Solve the pair-to-vehicle matching over a sparse weight table.

    ``weights`` maps ``(row_key, col_key)`` to a float; missing cells are
    inadmissible. Rows and columns may differ in count, rows may stay
    unmatched, and cells with weight <= 0 are never selected. Returns the
    chosen ``(row_key, col_key)`` tuples sorted ascending; among equal-value
    optima the lexicographically smallest such set is returned.
    """
    if not weights:
        return []
    row_keys = sorted({r for r, _ in weights})
    col_keys = sorted({c for _, c in weights})
    r_index = {k: i for i, k in enumerate(row_keys)}
    c_index = {k: i for i, k in enumerate(col_keys)}
    m = np.zeros((len(row_keys), len(col_keys)))
    for (rk, ck), w in weights.items():
        if w > 0.0:
            m[r_index[rk], c_index[ck]] = w

    opt, chosen = _optimal_value(m)
    if opt <= 0.0:
        return []
    unique = True
    for i, j in chosen:
        probe = m.copy()
        probe[i, j] = 0.0
        v, _ = _optimal_value(probe)
        if v >= opt - _tol(opt):
            unique = False
            break
    if not unique:
        chosen = _lexi_smallest(m, opt)
    return sorted((row_keys[i], col_keys[j]) for i, j in chosen)


def assign_min_cost(costs: dict) -> list:
    """Serve as many rows as possible at minimum total cost.

    ``costs`` maps ``(row_key, col_key)`` to a finite non-negative cost
    (infeasible cells are simply absent). Cardinality dominates cost, then the
    usual lexicographic tie rule applies. Used by the leftover-rider pass,
    where cost is time-to-pickup.
    """
    if not costs:
        return []
    for cell, c in costs.items():
        if not np.isfinite(c) or c < 0:
            raise ValueError(f"cost for {cell} must be finite and >= 0, got {c}")
    big = float(sum(costs.values())) + 1.0
    return hungarian_assign({cell: big - c for cell, c in costs.items()})
