"""Shared fixtures: tiny hand-built networks and scenario input writers."""

import numpy as np
import pytest

from ridepool import demand, network
from ridepool.config import ScenarioConfig


def build_network(nodes, links, v_min_mps=1.0):
    """nodes: {id: (x, y)}; links: (id, from, to, length_m, ffspeed_mps[, jam])."""
    link_objs = []
    for spec in links:
        jam = spec[5] if len(spec) > 5 else network.DEFAULT_JAM_DENSITY
        link_objs.append(network.Link(spec[0], spec[1], spec[2],
                                      float(spec[3]), float(spec[4]), jam))
    return network.RoadNetwork(dict(nodes), link_objs, v_min_mps=v_min_mps)


@pytest.fixture
def triangle():
    """Three nodes; going 0->2 direct (100 s) loses to the 0->1->2 dogleg (60 s)."""
    return build_network(
        {0: (0, 0), 1: (500, 0), 2: (500, 500)},
        [(0, 0, 1, 300.0, 10.0),
         (1, 1, 2, 300.0, 10.0),
         (2, 0, 2, 1000.0, 10.0),
         (3, 1, 0, 300.0, 10.0),
         (4, 2, 1, 300.0, 10.0),
         (5, 2, 0, 1000.0, 10.0)])


@pytest.fixture
def corridor():
    """Four nodes in a row, 100 m links at 10 m/s, both directions."""
    nodes = {i: (i * 100.0, 0.0) for i in range(4)}
    links = []
    lid = 0
    for a in range(3):
        links.append((lid, a, a + 1, 100.0, 10.0)); lid += 1
        links.append((lid, a + 1, a, 100.0, 10.0)); lid += 1
    return build_network(nodes, links)


@pytest.fixture
def grid4():
    return network.generate_grid(4, 4, 250.0, 10.0)


@pytest.fixture
def grid10():
    return network.generate_grid(10, 10, 250.0, 10.0)


def make_rider(rid, origin, destination, request_time=0.0, shared=True,
               flexibility_s=300.0, net=None, direct_s=None):
    """Rider with windows already derived (from net, or an explicit direct time)."""
    r = demand.Rider(id=rid, origin=origin, destination=destination,
                     request_time=request_time, shared=shared)
    if net is not None:
        assert demand.derive_time_windows(r, flexibility_s, net)
    elif direct_s is not None:
        r.earliest_departure = request_time
        r.latest_departure = request_time + flexibility_s
        r.latest_arrival = r.latest_departure + direct_s
        r.direct_time_s = direct_s
    return r


def scattered_od(side, total, out_path, seed=7, n_records=25,
                 t_end=900.0):
    """OD records between random node pairs, expectation ``total`` in all."""
    rng = np.random.default_rng(seed)
    recs = []
    for _ in range(n_records):
        o, d = rng.choice(side * side, size=2, replace=False)
        recs.append(demand.ODRecord(int(o), int(d), 0.0, t_end,
                                    total / n_records))
    demand.write_od_file(recs, out_path)
    return recs


def write_scenario(dir_path, side=6, total=40.0, fleet_size=10, share=0.8,
                   t_end=600.0, od_seed=7, **cfg_kw):
    """Grid + scattered OD + config on disk; returns the ScenarioConfig."""
    net_path = str(dir_path / "net.txt")
    od_path = str(dir_path / "od.txt")
    network.write_network(network.generate_grid(side, side, 250.0, 10.0),
                          net_path)
    scattered_od(side, total, od_path, seed=od_seed, t_end=t_end)
    base = dict(network=net_path, demand=od_path, fleet_size=fleet_size,
                share=share, name="t")
    base.update(cfg_kw)
    return ScenarioConfig(**base).validate()
