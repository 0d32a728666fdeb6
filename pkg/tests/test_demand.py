"""Demand realization, time windows, fleet seeding, request lifecycle."""

import numpy as np
import pytest

from conftest import build_network, make_rider
from ridepool import demand
from ridepool.demand import (
    DemandFormatError, ODRecord, Rider, Vehicle, derive_time_windows,
    expire_requests, generate_demand, load_od_file, seed_fleet, write_od_file,
)


class TestGenerateDemand:
    def test_deterministic_per_seed(self):
        recs = [ODRecord(0, 5, 0.0, 900.0, 30.0)]
        a = generate_demand(recs, 0.5, seed=3)
        b = generate_demand(recs, 0.5, seed=3)
        assert [(r.id, r.request_time, r.shared) for r in a] == \
            [(r.id, r.request_time, r.shared) for r in b]
        c = generate_demand(recs, 0.5, seed=4)
        assert [(r.request_time) for r in a] != [(r.request_time) for r in c]

    def test_poisson_mean_matches_expectation(self):
        # E[count] = 20; the seed-averaged realization should sit close.
        recs = [ODRecord(0, 1, 0.0, 600.0, 20.0)]
        counts = [len(generate_demand(recs, 1.0, seed=s)) for s in range(300)]
        assert np.mean(counts) == pytest.approx(20.0, abs=1.0)

    def test_load_period_clips_and_scales(self):
        # truncating 600 s of demand at 450 s leaves 3/4 of the expectation
        recs = [ODRecord(0, 1, 0.0, 600.0, 24.0)]
        counts, latest = [], 0.0
        for s in range(300):
            riders = generate_demand(recs, 1.0, seed=s, load_period_s=450.0)
            counts.append(len(riders))
            if riders:
                latest = max(latest, max(r.request_time for r in riders))
        assert np.mean(counts) == pytest.approx(18.0, abs=1.0)
        assert latest < 450.0

    def test_ids_are_chronological(self):
        recs = [ODRecord(0, 1, 0.0, 900.0, 15.0), ODRecord(2, 3, 0.0, 900.0, 15.0)]
        riders = generate_demand(recs, 0.5, seed=11)
        times = [r.request_time for r in riders]
        assert times == sorted(times)
        assert [r.id for r in riders] == list(range(len(riders)))

    @pytest.mark.parametrize("share,want", [(0.0, 0), (1.0, 1)])
    def test_share_extremes(self, share, want):
        recs = [ODRecord(0, 1, 0.0, 900.0, 40.0)]
        riders = generate_demand(recs, share, seed=0)
        assert riders
        assert all(int(r.shared) == want for r in riders)

    def test_share_fraction_midrange(self):
        recs = [ODRecord(0, 1, 0.0, 900.0, 40.0)]
        flags = []
        for s in range(200):
            flags += [r.shared for r in generate_demand(recs, 0.3, seed=s)]
        assert np.mean(flags) == pytest.approx(0.3, abs=0.03)

    def test_bad_share_rejected(self):
        with pytest.raises(ValueError):
            generate_demand([], 1.5, seed=0)


class TestTimeWindows:
    def test_window_identities(self, corridor):
        r = Rider(id=0, origin=0, destination=3, request_time=42.0, shared=True)
        assert derive_time_windows(r, 300.0, corridor) is True
        assert r.earliest_departure == 42.0
        assert r.latest_departure == 342.0
        assert r.direct_time_s == pytest.approx(30.0)
        assert r.latest_arrival == pytest.approx(372.0)

    def test_unreachable_destination_rejected(self):
        net = build_network({0: (0, 0), 1: (1, 0)}, [(0, 0, 1, 100.0, 10.0)])
        r = Rider(id=0, origin=1, destination=0, request_time=0.0, shared=True)
        assert derive_time_windows(r, 300.0, net) is False
        assert r.latest_departure is None

    def test_windows_freeze_current_speeds(self, corridor):
        occ = np.zeros(len(corridor.links))
        occ[0] = 9.0
        corridor.refresh_speeds(occ)
        r = make_rider(0, 0, 1, net=corridor)
        assert r.direct_time_s > 10.0  # congested at request entry


class TestExpiry:
    def test_boundary_is_strict(self, corridor):
        r = make_rider(0, 0, 3, request_time=0.0, net=corridor)  # q = 300
        assert expire_requests([r], 300.0) == []
        assert r.status == demand.PENDING
        assert expire_requests([r], 300.0 + 1e-9) == [r]
        assert r.status == demand.EXPIRED

    def test_only_pending_shared_expire(self, corridor):
        a = make_rider(0, 0, 3, net=corridor)
        b = make_rider(1, 0, 3, shared=False, net=corridor)
        a.finalize(7)
        assert expire_requests([a, b], 1e6) == []


class TestLifecycle:
    def test_finalize_then_expire_raises(self):
        r = Rider(id=0, origin=0, destination=1, request_time=0.0, shared=True)
        r.finalize(3)
        assert r.vehicle == 3 and r.status == demand.FINALIZED
        with pytest.raises(RuntimeError):
            r.expire()

    def test_expire_then_finalize_raises(self):
        r = Rider(id=0, origin=0, destination=1, request_time=0.0, shared=True)
        r.expire()
        with pytest.raises(RuntimeError):
            r.finalize(1)

    def test_double_finalize_raises(self):
        r = Rider(id=0, origin=0, destination=1, request_time=0.0, shared=True)
        r.finalize(1)
        with pytest.raises(RuntimeError):
            r.finalize(2)


class TestVehicle:
    def test_position_and_idle(self):
        v = Vehicle(id=0, node=4)
        assert v.position == 4 and v.idle
        v.link, v.offset_m = 9, 30.0
        assert v.position == (9, 30.0) and not v.idle

    def test_seats_free(self):
        v = Vehicle(id=0, node=0)
        assert v.seats_free == 2
        v.assigned.append(5)
        assert v.seats_free == 1


class TestSeedFleet:
    def test_proportional_to_shared_origins(self, grid4):
        riders = [make_rider(i, 3, 0, direct_s=100.0) for i in range(30)]
        riders += [make_rider(100, 7, 0, direct_s=100.0)]
        fleet = seed_fleet(grid4, riders, 40, seed=1)
        at3 = sum(1 for v in fleet if v.node == 3)
        assert at3 >= 30  # 30/31 of the weight sits on node 3
        assert {v.node for v in fleet} <= {3, 7}
        assert [v.id for v in fleet] == list(range(40))

    def test_uniform_fallback_without_shared_demand(self, grid4):
        fleet = seed_fleet(grid4, [], 200, seed=2)
        assert len({v.node for v in fleet}) > 8
        assert all(v.node in grid4.node_ids for v in fleet)

    def test_deterministic(self, grid4):
        riders = [make_rider(i, i % 16, 0, direct_s=50.0) for i in range(20)]
        a = seed_fleet(grid4, riders, 10, seed=5)
        b = seed_fleet(grid4, riders, 10, seed=5)
        assert [v.node for v in a] == [v.node for v in b]


class TestODFile:
    def test_round_trip(self, tmp_path):
        recs = [ODRecord(0, 9, 0.0, 600.0, 12.5), ODRecord(4, 2, 60.0, 900.0, 3.0)]
        p = tmp_path / "od.txt"
        write_od_file(recs, p)
        assert load_od_file(p) == recs

    @pytest.mark.parametrize("line", [
        "OD 0 1 0 600",                 # missing count
        "XX 0 1 0 600 5",               # wrong tag
        "OD 0 1 600 600 5",             # empty interval
        "OD 0 1 0 600 -2",              # negative count
    ])
    def test_bad_lines_rejected(self, tmp_path, line):
        p = tmp_path / "od.txt"
        p.write_text(line + "\n")
        with pytest.raises(DemandFormatError):
            load_od_file(p)
