"""Road network: parsing, Greenshields speeds, shortest paths vs a brute oracle."""

import math

import numpy as np
import pytest

from conftest import build_network
from ridepool import network
from ridepool.network import (
    Link, NetworkFormatError, NetworkValidationError, RoadNetwork,
    TravelTimeOracle, generate_grid, load_network, nearest_node,
    neighbors_khop, shortest_path, travel_time, write_network,
)


# -- independent oracle -------------------------------------------------------

def brute_force_best_path(links, speeds, src, dst):
    """Min-time path by exhaustive DFS over simple paths.

    ``links`` are (link_id, from, to, length_m) tuples and ``speeds`` a dict
    of link_id -> current speed. Returns (time, node_tuple) where the node
    tuple is the lexicographically smallest among all minimum-time paths
    (comparing the per-hop link id after the node, mirroring the production
    tie rule), or (inf, None) when unreachable.
    """
    out = {}
    for lid, a, b, length in links:
        out.setdefault(a, []).append((lid, b, length / speeds[lid]))

    best = [math.inf, None]

    def walk(node, seen, t, trace):
        if t > best[0] + 1e-12:
            return
        if node == dst:
            key = tuple(x for pair in trace for x in pair)
            if t < best[0] - 1e-12 or (abs(t - best[0]) <= 1e-12
                                       and (best[1] is None or key < best[1])):
                best[0], best[1] = t, key
            return
        for lid, b, dt in out.get(node, ()):
            if b in seen:
                continue
            walk(b, seen | {b}, t + dt, trace + [(b, lid)])

    if src == dst:
        return 0.0, (src,)
    walk(src, {src}, 0.0, [])
    if best[1] is None:
        return math.inf, None
    return best[0], (src,) + best[1][::2]


def random_graph(rng, n_nodes):
    links = []
    lid = 0
    for a in range(n_nodes):
        for b in range(n_nodes):
            if a != b and rng.random() < 0.45:
                links.append((lid, a, b, float(rng.integers(50, 400))))
                lid += 1
    # occasional parallel duplicate to exercise the per-pair collapse
    if links and rng.random() < 0.5:
        _, a, b, _ = links[rng.integers(len(links))]
        links.append((lid, a, b, float(rng.integers(50, 400))))
    return links


def test_shortest_paths_match_brute_force_on_random_graphs():
    rng = np.random.default_rng(42)
    for trial in range(40):
        n = int(rng.integers(4, 9))
        raw = random_graph(rng, n)
        if not raw:
            continue
        net = build_network({i: (float(i), 0.0) for i in range(n)},
                            [(lid, a, b, ln, 10.0) for lid, a, b, ln in raw])
        speeds = {lid: 10.0 for lid, *_ in raw}
        for src in range(n):
            for dst in range(n):
                want_t, want_nodes = brute_force_best_path(raw, speeds, src, dst)
                got_t = travel_time(net, src, dst)
                assert got_t == pytest.approx(want_t, abs=1e-9) or (
                    math.isinf(want_t) and math.isinf(got_t))
                path = shortest_path(net, src, dst)
                if math.isinf(want_t):
                    assert path is None
                else:
                    assert path.nodes == want_nodes, (trial, src, dst)
                    assert path.time_s == pytest.approx(want_t, abs=1e-9)


def test_triangle_prefers_dogleg(triangle):
    assert travel_time(triangle, 0, 2) == pytest.approx(60.0)
    assert shortest_path(triangle, 0, 2).nodes == (0, 1, 2)
    assert travel_time(triangle, 0, 0) == 0.0


def test_path_links_are_consistent(triangle):
    p = shortest_path(triangle, 0, 2)
    assert p.links == (0, 1)
    hop_total = sum(triangle.link(l).length_m / triangle.link_speed(l)
                    for l in p.links)
    assert p.time_s == pytest.approx(hop_total)


def test_parallel_links_take_cheaper_then_smaller_id():
    net = build_network({0: (0, 0), 1: (100, 0)},
                        [(5, 0, 1, 200.0, 10.0), (9, 0, 1, 100.0, 10.0)])
    assert travel_time(net, 0, 1) == pytest.approx(10.0)
    assert shortest_path(net, 0, 1).links == (9,)
    tie = build_network({0: (0, 0), 1: (100, 0)},
                        [(5, 0, 1, 100.0, 10.0), (9, 0, 1, 100.0, 10.0)])
    assert shortest_path(tie, 0, 1).links == (5,)


class TestGrid:
    def test_grid_10x10_shape(self, grid10):
        assert len(grid10.node_ids) == 100
        assert len(grid10.links) == 360  # 2 * 2 * 9 * 10 directed links

    def test_corner_to_corner_freeflow(self, grid10):
        # 18 hops of 250 m at 10 m/s
        assert travel_time(grid10, 0, 99) == pytest.approx(450.0)

    def test_lexicographic_route_choice(self, grid4):
        # all east, then all south is the smallest node sequence among ties
        assert shortest_path(grid4, 0, 15).nodes == (0, 1, 2, 3, 7, 11, 15)

    def test_node_ids_row_major(self, grid4):
        assert grid4.node_xy(0) == (0.0, 0.0)
        assert grid4.node_xy(5) == (250.0, 250.0)


def test_khop_neighborhoods(grid10):
    center = 44  # interior node
    assert neighbors_khop(grid10, center, 0) == {44}
    assert len(neighbors_khop(grid10, center, 1)) == 5
    assert len(neighbors_khop(grid10, center, 2)) == 13
    assert len(neighbors_khop(grid10, center, 3)) == 25
    assert neighbors_khop(grid10, 0, 1) == {0, 1, 10}
    with pytest.raises(ValueError):
        neighbors_khop(grid10, 0, -1)


def test_nearest_node_breaks_ties_by_id(grid4):
    assert nearest_node(grid4, 10.0, 0.0) == 0
    assert nearest_node(grid4, 125.0, 0.0) == 0  # equidistant from 0 and 1
    assert nearest_node(grid4, 240.0, 260.0) == 5


class TestGreenshields:
    def test_speed_drops_linearly_with_density(self):
        link = Link(0, 0, 1, 1000.0, 20.0, 0.1)
        assert network.greenshields_speed(link, 0) == pytest.approx(20.0)
        # density 0.05 veh/m is half of jam density
        assert network.greenshields_speed(link, 50) == pytest.approx(10.0)

    def test_floor_at_v_min(self):
        link = Link(0, 0, 1, 100.0, 20.0, 0.1)
        assert network.greenshields_speed(link, 10) == pytest.approx(1.0)
        assert network.greenshields_speed(link, 500, v_min=2.5) == 2.5

    def test_refresh_only_bumps_version_on_change(self, corridor):
        v0 = corridor.speed_version
        assert corridor.refresh_speeds(np.zeros(len(corridor.links))) is False
        assert corridor.speed_version == v0
        occ = np.zeros(len(corridor.links))
        occ[0] = 9.0
        assert corridor.refresh_speeds(occ) is True
        assert corridor.speed_version != v0
        assert corridor.link_speed(0) < 10.0
        assert corridor.link_speed(1) == pytest.approx(10.0)

    def test_congestion_changes_route_and_time(self, triangle):
        occ = np.zeros(len(triangle.links))
        occ[0] = 33.0  # jam 0.12 * 300 m = 36 vehicles; near-jam on link 0
        triangle.refresh_speeds(occ)
        assert travel_time(triangle, 0, 2) == pytest.approx(100.0)
        assert shortest_path(triangle, 0, 2).nodes == (0, 2)


def test_travel_time_from_midlink(corridor):
    # 40 m into the 100 m link 0 (node 0 -> 1): 6 s to finish, then 10 s on
    assert corridor.travel_time_from((0, 40.0), 2) == pytest.approx(16.0)
    assert corridor.travel_time_from(1, 2) == pytest.approx(10.0)


def test_travel_time_oracle_counts_queries(corridor):
    tt = TravelTimeOracle(corridor)
    tt.travel_time(0, 3)
    tt.time_from((0, 50.0), 2)
    tt.time_from(1, 3)
    assert tt.queries == 3


class TestFileFormat:
    def test_round_trip(self, tmp_path, triangle):
        path = tmp_path / "net.txt"
        write_network(triangle, path)
        again = load_network(path)
        assert again.node_ids == triangle.node_ids
        assert [(l.id, l.from_node, l.to_node) for l in again.links] == \
            [(l.id, l.from_node, l.to_node) for l in triangle.links]
        assert travel_time(again, 0, 2) == pytest.approx(60.0)

    def test_comments_and_blank_lines(self, tmp_path):
        p = tmp_path / "n.txt"
        p.write_text("# hello\n\nNODE 0 0 0\nNODE 1 10 0\n"
                     "LINK 0 0 1 100 10 0.12\n")
        net = load_network(p)
        assert len(net.links) == 1

    @pytest.mark.parametrize("body,fragment", [
        ("NODE 0 0\n", "NODE"),
        ("FROG 1 2 3\n", "record type"),
        ("NODE 0 0 0\nLINK 0 0 7 100 10 0.12\n", "unknown node"),
        ("NODE 0 0 0\nNODE 1 1 0\nLINK 0 0 1 -5 10 0.12\n", "length"),
        ("NODE 0 0 0\nNODE 0 1 0\n", "duplicate"),
    ])
    def test_bad_files_rejected(self, tmp_path, body, fragment):
        p = tmp_path / "bad.txt"
        p.write_text(body)
        with pytest.raises((NetworkFormatError, NetworkValidationError)) as e:
            load_network(p)
        assert fragment.lower() in str(e.value).lower()


def test_unreachable_pair_reports_inf():
    net = build_network({0: (0, 0), 1: (1, 0)}, [(0, 0, 1, 100.0, 10.0)])
    assert travel_time(net, 0, 1) == pytest.approx(10.0)
    assert math.isinf(travel_time(net, 1, 0))
    assert shortest_path(net, 1, 0) is None
