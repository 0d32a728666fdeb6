"""Assignment solver vs independent DP and full-enumeration oracles."""

import itertools

import numpy as np
import pytest

from ridepool.assignment import assign_min_cost, hungarian_assign


# -- oracles -------------------------------------------------------------

def dp_max_value(weights: dict) -> float:
    """Optimal total weight by bitmask DP over columns (rows may skip)."""
    rows = sorted({r for r, _ in weights})
    cols = sorted({c for _, c in weights})
    w = {(rows.index(r), cols.index(c)): v for (r, c), v in weights.items()}
    n_c = len(cols)
    dp = {0: 0.0}
    for i in range(len(rows)):
        nxt = dict(dp)  # row i left unmatched
        for mask, val in dp.items():
            for j in range(n_c):
                if mask & (1 << j):
                    continue
                cell = w.get((i, j))
                if cell is None or cell <= 0.0:
                    continue
                m2 = mask | (1 << j)
                if val + cell > nxt.get(m2, -1.0):
                    nxt[m2] = val + cell
        dp = nxt
    return max(dp.values())


def enumerate_assignments(weights: dict):
    """Every partial matching over the positive cells (small inputs only)."""
    rows = sorted({r for r, _ in weights})
    cols = sorted({c for _, c in weights})

    def rec(i, used):
        if i == len(rows):
            yield []
            return
        for rest in rec(i + 1, used):
            yield rest
        for c in cols:
            if c in used:
                continue
            wv = weights.get((rows[i], c))
            if wv is None or wv <= 0.0:
                continue
            for rest in rec(i + 1, used | {c}):
                yield [(rows[i], c)] + rest

    yield from rec(0, frozenset())


def best_by_enumeration(weights: dict) -> list:
    """Max value, then lexicographically smallest sorted cell set."""
    best_val, best_set = 0.0, []
    for sel in enumerate_assignments(weights):
        val = sum(weights[c] for c in sel)
        key = sorted(sel)
        if val > best_val + 1e-12 or (abs(val - best_val) <= 1e-12
                                      and key < best_set):
            best_val, best_set = val, key
    return best_set


# -- value exactness -------------------------------------------------------

def random_weight_table(rng) -> dict:
    r = int(rng.integers(1, 8))
    c = int(rng.integers(1, 8))
    table = {}
    for i in range(r):
        for j in range(c):
            if rng.random() < 0.75:
                table[(i, j)] = float(rng.integers(1, 50))
    return table


def test_objective_matches_dp_on_random_integer_tables():
    rng = np.random.default_rng(7)
    for _ in range(120):
        weights = random_weight_table(rng)
        if not weights:
            continue
        got = hungarian_assign(weights)
        value = sum(weights[cell] for cell in got)
        assert value == dp_max_value(weights)  # integer weights: exact
        assert len({r for r, _ in got}) == len(got)
        assert len({c for _, c in got}) == len(got)


def test_lexicographic_choice_matches_enumeration():
    rng = np.random.default_rng(8)
    for _ in range(150):
        r = int(rng.integers(1, 5))
        c = int(rng.integers(1, 5))
        weights = {}
        for i in range(r):
            for j in range(c):
                if rng.random() < 0.8:
                    # tiny integer range forces plenty of ties
                    weights[(i, j)] = float(rng.integers(0, 4))
        assert hungarian_assign(weights) == best_by_enumeration(weights)


def test_result_independent_of_insertion_order():
    rng = np.random.default_rng(9)
    weights = {(i, j): float(rng.integers(1, 6)) for i in range(4)
               for j in range(4)}
    want = hungarian_assign(weights)
    items = list(weights.items())
    for _ in range(10):
        rng.shuffle(items)
        assert hungarian_assign(dict(items)) == want


# -- hand cases ------------------------------------------------------------

def test_three_by_three_hand_case():
    weights = {(f"p{i}", f"v{j}"): w
               for i, row in enumerate([[7, 5, 3], [4, 8, 2], [1, 6, 9]])
               for j, w in enumerate(row)}
    got = hungarian_assign(weights)
    assert got == [("p0", "v0"), ("p1", "v1"), ("p2", "v2")]
    assert sum(weights[c] for c in got) == 24


def test_single_pair_two_vehicles_takes_heavier():
    assert hungarian_assign({("p", "a"): 3.0, ("p", "b"): 5.0}) == [("p", "b")]


def test_rectangular_more_rows_than_columns():
    weights = {(i, 0): float(w) for i, w in enumerate([2, 9, 4])}
    assert hungarian_assign(weights) == [(1, 0)]


def test_zero_and_negative_weights_never_selected():
    assert hungarian_assign({(0, 0): 0.0, (1, 1): -3.0}) == []
    got = hungarian_assign({(0, 0): 0.0, (0, 1): 2.0, (1, 0): -1.0})
    assert got == [(0, 1)]


def test_empty_input():
    assert hungarian_assign({}) == []
    assert assign_min_cost({}) == []


def test_equal_optima_pick_smallest_cell_set():
    weights = {(0, 0): 1.0, (0, 1): 1.0, (1, 0): 1.0, (1, 1): 1.0}
    assert hungarian_assign(weights) == [(0, 0), (1, 1)]


# -- min-cost leftover pass ---------------------------------------------------

def test_min_cost_prefers_cardinality_over_cost():
    # serving both riders costs 11, serving one costs 0; both must be served
    costs = {("r1", "a"): 0.0, ("r2", "a"): 1.0, ("r1", "b"): 10.0}
    assert assign_min_cost(costs) == [("r1", "b"), ("r2", "a")]


def test_min_cost_minimizes_total_cost():
    costs = {("r1", "a"): 5.0, ("r1", "b"): 1.0,
             ("r2", "a"): 2.0, ("r2", "b"): 6.0}
    assert assign_min_cost(costs) == [("r1", "b"), ("r2", "a")]


def test_min_cost_matches_enumeration_on_random_tables():
    rng = np.random.default_rng(11)
    for _ in range(80):
        r = int(rng.integers(1, 5))
        c = int(rng.integers(1, 5))
        costs = {}
        for i in range(r):
            for j in range(c):
                if rng.random() < 0.7:
                    costs[(i, j)] = float(rng.integers(0, 9))
        if not costs:
            continue
        got = assign_min_cost(costs)
        best_cells, best_n, best_cost = [], -1, None
        for sel in enumerate_assignments({k: 1.0 for k in costs}):
            n, cost, key = len(sel), sum(costs[c] for c in sel), sorted(sel)
            better = (n > best_n
                      or (n == best_n and cost < best_cost - 1e-12)
                      or (n == best_n and abs(cost - best_cost) <= 1e-12
                          and key < best_cells))
            if better:
                best_cells, best_n, best_cost = key, n, cost
        assert got == best_cells, (costs, got, best_cells)


def test_min_cost_validates_inputs():
    with pytest.raises(ValueError):
        assign_min_cost({(0, 0): -1.0})
    with pytest.raises(ValueError):
        assign_min_cost({(0, 0): float("inf")})


def test_runtime_budget_on_seven_by_seven():
    import time
    rng = np.random.default_rng(12)
    t0 = time.perf_counter()
    for _ in range(200):
        weights = {(i, j): float(rng.integers(1, 100))
                   for i in range(7) for j in range(7)}
        hungarian_assign(weights)
    assert time.perf_counter() - t0 < 5.0
