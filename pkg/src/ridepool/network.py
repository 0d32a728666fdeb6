"""Directed road network with per-link congestion state and frozen-speed shortest paths.

The network is a plain directed graph in planar meter coordinates. Every link
carries a static free-flow speed and jam density plus a mutable traffic state
(occupancy count and space-mean speed, Greenshields relation). All travel-time
and path queries are answered under the speeds in effect when the query is
made; callers that need a consistent view across many queries simply avoid
mutating speeds in between (the simulator only updates speeds once per tick).

Unreachable destinations yield ``float('inf')`` from :func:`travel_time` and
``None`` from :func:`shortest_path`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

DEFAULT_JAM_DENSITY = 0.12  # veh/m, ~120 veh/km single-lane jam


class NetworkFormatError(ValueError):
    """Raised when a network file cannot be parsed."""


class NetworkValidationError(ValueError):
    """Raised when a parsed network is structurally invalid."""


@dataclass(frozen=True)
class Link:
    id: int
    from_node: int
    to_node: int
    length_m: float
    ffspeed_mps: float
    jam_density_vpm: float


@dataclass
class LinkState:
    """Mutable traffic state of one link."""

    occupancy: int = 0
    space_mean_speed: float = 0.0


@dataclass(frozen=True)
class Path:
    nodes: tuple
    links: tuple
    time_s: float


def greenshields_speed(link: Link, occupancy: int, v_min: float = 1.0) -> float:
    """Space-mean speed for a link holding ``occupancy`` vehicles.

    Linear Greenshields relation, floored at ``v_min`` so links never stall
    completely: v = max(v_min, ffs * (1 - density / jam_density)).
    """
    density = occupancy / link.length_m
    return max(v_min, link.ffspeed_mps * (1.0 - density / link.jam_density_vpm))


def update_link_speed(state: LinkState, link: Link, occupancy: int, v_min: float = 1.0) -> float:
    """Set ``state`` to the given occupancy and refresh its speed; returns the speed."""
    state.occupancy = occupancy
    state.space_mean_speed = greenshields_speed(link, occupancy, v_min)
    return state.space_mean_speed


class RoadNetwork:
    """Directed graph of nodes and links with a mutable per-link speed field.

    Node coordinates are planar meters. Link travel time is length divided by
    the link's current space-mean speed. Shortest paths break ties by the
    lexicographically smallest node-id sequence (then smallest link id among
    parallel links).
    """

    def __init__(self, nodes: dict, links: list, v_min_mps: float = 1.0):
        if not nodes:
            raise NetworkValidationError("network has no nodes")
        self.node_ids = sorted(nodes)
        self._index = {nid: i for i, nid in enumerate(self.node_ids)}
        self.xy = np.array([nodes[nid] for nid in self.node_ids], dtype=float)
        self.links = list(links)
        self.link_ids = [lk.id for lk in self.links]
        self._link_index = {}
        for i, lk in enumerate(self.links):
            if lk.id in self._link_index:
                raise NetworkValidationError(f"duplicate link id {lk.id}")
            self._link_index[lk.id] = i
        self.v_min_mps = float(v_min_mps)

        n = len(self.node_ids)
        self._from_idx = np.empty(len(links), dtype=np.int64)
        self._to_idx = np.empty(len(links), dtype=np.int64)
        for i, lk in enumerate(self.links):
            if lk.from_node not in self._index:
                raise NetworkValidationError(
                    f"link {lk.id} references unknown node {lk.from_node}")
            if lk.to_node not in self._index:
                raise NetworkValidationError(
                    f"link {lk.id} references unknown node {lk.to_node}")
            if lk.length_m <= 0:
                raise NetworkValidationError(f"link {lk.id} has non-positive length")
            if lk.ffspeed_mps <= 0:
                raise NetworkValidationError(f"link {lk.id} has non-positive speed")
            if lk.jam_density_vpm <= 0:
                raise NetworkValidationError(f"link {lk.id} has non-positive jam density")
            self._from_idx[i] = self._index[lk.from_node]
            self._to_idx[i] = self._index[lk.to_node]

        self.length = np.array([lk.length_m for lk in self.links])
        self.ffspeed = np.array([lk.ffspeed_mps for lk in self.links])
        self.jam_density = np.array([lk.jam_density_vpm for lk in self.links])
        self.speed = self.ffspeed.copy()
        self.occupancy = np.zeros(len(self.links), dtype=np.int64)

        # adjacency, ordered for deterministic path walks
        self.out_links = [[] for _ in range(n)]
        self.in_links = [[] for _ in range(n)]
        for i, lk in enumerate(self.links):
            self.out_links[self._from_idx[i]].append(i)
            self.in_links[self._to_idx[i]].append(i)
        for u in range(n):
            self.out_links[u].sort(key=lambda i: (self.links[i].to_node, self.links[i].id))
            self.in_links[u].sort(key=lambda i: (self.links[i].from_node, self.links[i].id))
        self._neighbors = [set() for _ in range(n)]
        for i in range(len(self.links)):
            self._neighbors[self._from_idx[i]].add(int(self._to_idx[i]))
            self._neighbors[self._to_idx[i]].add(int(self._from_idx[i]))

        # unique (from, to) pairs so parallel links collapse to their fastest one
        if len(self.links):
            pairs = np.stack([self._from_idx, self._to_idx])
            upairs, self._pair_inverse = np.unique(pairs, axis=1, return_inverse=True)
            self._pair_from, self._pair_to = upairs[0], upairs[1]
        else:
            self._pair_inverse = np.zeros(0, dtype=np.int64)
            self._pair_from = np.zeros(0, dtype=np.int64)
            self._pair_to = np.zeros(0, dtype=np.int64)

        self.speed_version = 0
        self._graph_cache = {}
        self._row_cache = {}

    # -- basic accessors -------------------------------------------------

    def __len__(self):
        return len(self.node_ids)

    @property
    def n_links(self):
        return len(self.links)

    def has_node(self, node_id) -> bool:
        return node_id in self._index

    def link(self, link_id) -> Link:
        return self.links[self._link_index[link_id]]

    def link_index(self, link_id) -> int:
        """Position of a link id in the length/speed/occupancy arrays."""
        return self._link_index[link_id]

    def link_state(self, link_id) -> LinkState:
        i = self._link_index[link_id]
        return LinkState(int(self.occupancy[i]), float(self.speed[i]))

    def link_speed(self, link_id) -> float:
        return float(self.speed[self._link_index[link_id]])

    def node_xy(self, node_id):
        return tuple(self.xy[self._index[node_id]])

    # -- traffic state ---------------------------------------------------

    def set_occupancy(self, link_id, occupancy: int) -> float:
        """Point update of one link's occupancy and speed. Returns the new speed."""
        i = self._link_index[link_id]
        self.occupancy[i] = occupancy
        new = greenshields_speed(self.links[i], occupancy, self.v_min_mps)
        if new != self.speed[i]:
            self.speed[i] = new
            self._bump_version()
        return new

    def override_speeds(self, speeds) -> None:
        """Pin every link speed directly (replay and commit audits)."""
        self.speed[:] = speeds
        self._bump_version()

    def refresh_speeds(self, occupancy=None) -> bool:
        """Recompute all link speeds from occupancy (vectorized Greenshields).

        Returns True when any speed actually changed (the version is bumped
        only then, so query caches survive uncongested stretches).
        """
        if occupancy is not None:
            self.occupancy[:] = occupancy
        density = self.occupancy / self.length
        new = np.maximum(self.v_min_mps, self.ffspeed * (1.0 - density / self.jam_density))
        if np.array_equal(new, self.speed):
            return False
        self.speed[:] = new
        self._bump_version()
        return True

    def _bump_version(self):
        self.speed_version += 1
        self._graph_cache.clear()
        self._row_cache.clear()

    # -- shortest paths --------------------------------------------------

    def _graphs(self):
        """CSR adjacency (forward, reverse) under current speeds."""
        g = self._graph_cache.get("g")
        if g is None:
            n = len(self.node_ids)
            w_link = self.length / self.speed
            w_pair = np.full(len(self._pair_from), np.inf)
            np.minimum.at(w_pair, self._pair_inverse, w_link)
            fwd = csr_matrix((w_pair, (self._pair_from, self._pair_to)), shape=(n, n))
            g = (fwd, fwd.T.tocsr())
            self._graph_cache["g"] = g
        return g

    def _dist_row(self, node_id, reverse=False):
        key = (node_id, reverse)
        row = self._row_cache.get(key)
        if row is None:
            fwd, rev = self._graphs()
            graph = rev if reverse else fwd
            row = _csgraph_dijkstra(graph, directed=True, indices=self._index[node_id])
            self._row_cache[key] = row
        return row

    def travel_time(self, from_node, to_node, depart: float | None = None) -> float:
        """Shortest travel time in seconds under current speeds; inf if unreachable.

        ``depart`` is accepted for interface symmetry; evaluation always uses
        the speed field in effect at call time (the caller's "now").
        """
        if from_node == to_node:
            return 0.0
        return float(self._dist_row(from_node)[self._index[to_node]])

    def travel_time_from(self, position, to_node) -> float:
        """Travel time from a position (node id, or ``(link_id, offset_m)`` mid-link).

        A mid-link vehicle first finishes its current link at that link's
        current speed, then continues from the link's downstream node.
        """
        if not isinstance(position, tuple):
            return self.travel_time(position, to_node)
        link_id, offset = position
        i = self._link_index[link_id]
        head = max(0.0, self.length[i] - offset) / self.speed[i]
        return head + self.travel_time(self.links[i].to_node, to_node)

    def shortest_path(self, from_node, to_node, depart: float | None = None):
        """Least-time path under current speeds, or None if unreachable.

        Among equal-cost paths the lexicographically smallest node-id sequence
        is returned; parallel links tie-break on the smaller link id.
        """
        rev = self._dist_row(to_node, reverse=True)
        src = self._index[from_node]
        total = float(rev[src])
        if math.isinf(total):
            return None
        if from_node == to_node:
            return Path((from_node,), (), 0.0)
        nodes = [from_node]
        links = []
        u = src
        tgt = self._index[to_node]
        while u != tgt:
            best = None
            need = rev[u]
            for li in self.out_links[u]:
                v = self._to_idx[li]
                w = self.length[li] / self.speed[li]
                if w + rev[v] <= need + 1e-9 * max(1.0, need):
                    key = (self.links[li].to_node, self.links[li].id)
                    if best is None or key < best[0]:
                        best = (key, li, v)
            if best is None:  # numerically stuck; should not happen on valid graphs
                raise RuntimeError(f"path reconstruction failed at node {self.node_ids[u]}")
            _, li, v = best
            links.append(self.links[li].id)
            nodes.append(self.links[li].to_node)
            u = int(v)
        return Path(tuple(nodes), tuple(links), total)


class TravelTimeOracle:
    """Thin counting facade over a network's travel-time queries.

    Matching code charges its lookups here so per-epoch work can be accounted
    deterministically. The underlying network must not have its speeds mutated
    while an oracle is in use (the dispatcher runs between simulation ticks,
    which guarantees that).
    """

    def __init__(self, net: RoadNetwork):
        self.net = net
        self.queries = 0

    def travel_time(self, a, b) -> float:
        self.queries += 1
        return self.net.travel_time(a, b)

    def time_from(self, position, b) -> float:
        self.queries += 1
        return self.net.travel_time_from(position, b)


# -- module-level query helpers (thin wrappers kept for a functional API) --

def travel_time(net: RoadNetwork, from_node, to_node, depart: float | None = None) -> float:
    return net.travel_time(from_node, to_node, depart)


def shortest_path(net: RoadNetwork, from_node, to_node, depart: float | None = None):
    return net.shortest_path(from_node, to_node, depart)


def nearest_node(net: RoadNetwork, x: float, y: float):
    """Node id closest in Euclidean distance; ties go to the smallest id."""
    d2 = (net.xy[:, 0] - x) ** 2 + (net.xy[:, 1] - y) ** 2
    best = np.min(d2)
    ties = np.nonzero(d2 <= best)[0]
    return net.node_ids[int(ties.min())]


def neighbors_khop(net: RoadNetwork, node_id, k: int) -> set:
    """All node ids within undirected hop distance <= k (includes the node itself)."""
    if k < 0:
        raise ValueError("hop count must be >= 0")
    start = net._index[node_id]
    seen = {start}
    frontier = [start]
    for _ in range(k):
        nxt = []
        for u in frontier:
            for v in net._neighbors[u]:
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    return {net.node_ids[i] for i in seen}


# -- file I/O and generators -------------------------------------------------

def load_network(path, v_min_mps: float = 1.0) -> RoadNetwork:
    """Parse a network text file.

    Format: one record per line, ``NODE id x y`` then
    ``LINK id from to length_m ffspeed_mps jam_density_vpm``. Blank lines and
    ``#`` comments are ignored.
    """
    nodes = {}
    links = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            try:
                if tok[0] == "NODE":
                    if len(tok) != 4:
                        raise ValueError("expected NODE id x y")
                    nid = int(tok[1])
                    if nid in nodes:
                        raise ValueError(f"duplicate node id {nid}")
                    nodes[nid] = (float(tok[2]), float(tok[3]))
                elif tok[0] == "LINK":
                    if len(tok) != 7:
                        raise ValueError("expected LINK id from to length_m ffspeed_mps jam_density_vpm")
                    links.append(Link(int(tok[1]), int(tok[2]), int(tok[3]),
                                      float(tok[4]), float(tok[5]), float(tok[6])))
                else:
                    raise ValueError(f"unknown record type {tok[0]!r}")
            except ValueError as exc:
                raise NetworkFormatError(f"{path}:{lineno}: {exc}") from None
    try:
        return RoadNetwork(nodes, links, v_min_mps=v_min_mps)
    except NetworkValidationError as exc:
        raise NetworkValidationError(f"{path}: {exc}") from None


def write_network(net: RoadNetwork, path):
    with open(path, "w") as fh:
        fh.write("# ridepool network\n")
        for nid in net.node_ids:
            x, y = net.node_xy(nid)
            fh.write(f"NODE {nid} {x:g} {y:g}\n")
        for lk in net.links:
            fh.write(f"LINK {lk.id} {lk.from_node} {lk.to_node} "
                     f"{lk.length_m:g} {lk.ffspeed_mps:g} {lk.jam_density_vpm:g}\n")


def generate_grid(rows: int, cols: int, cell_m: float, ffspeed_mps: float,
                  jam_density_vpm: float = DEFAULT_JAM_DENSITY,
                  v_min_mps: float = 1.0) -> RoadNetwork:
    """Regular rows x cols grid; every adjacent node pair gets both directed links.

    Node id is row-major (``r * cols + c``); link ids are sequential in the
    same sweep. Interior nodes therefore have exactly four inbound links.
    """
    if rows < 1 or cols < 1:
        raise ValueError("grid needs at least one row and column")
    nodes = {}
    for r in range(rows):
        for c in range(cols):
            nodes[r * cols + c] = (c * cell_m, r * cell_m)
    links = []

    def _add(a, b):
        links.append(Link(len(links), a, b, cell_m, ffspeed_mps, jam_density_vpm))

    for r in range(rows):
        for c in range(cols):
            n = r * cols + c
            if c + 1 < cols:
                _add(n, n + 1)
                _add(n + 1, n)
            if r + 1 < rows:
                _add(n, n + cols)
                _add(n + cols, n)
    return RoadNetwork(nodes, links, v_min_mps=v_min_mps)
