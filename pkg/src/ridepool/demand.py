"""Trip demand, rider time windows, and fleet state.

Demand comes from an OD table (text records ``OD from to t_start_s t_end_s
expected_count``). Each record's horizon is cut into 5-minute buckets; the
realized trip count per bucket is Poisson with mean proportional to the
bucket's share of the record's expectation, and arrival instants are uniform
within the bucket. A configurable fraction of trips is flagged as shared-ride
requests; the rest become background private-vehicle trips.

A shared rider's time windows are frozen when the request enters the system:
earliest departure e = request time, latest departure q = e + flexibility,
latest arrival l = q + direct travel time under the speeds current at request
time. A rider still pending strictly after q expires.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

BUCKET_S = 300.0  # demand is bucketed in 5-minute slices

PENDING = "pending"
FINALIZED = "finalized"
EXPIRED = "expired"

PRIVATE_VEHICLE_ID_BASE = 1_000_000  # keeps private vehicle ids clear of the fleet's


class DemandFormatError(ValueError):
    """Raised when an OD file cannot be parsed."""


@dataclass(frozen=True)
class ODRecord:
    origin: int
    destination: int
    t_start_s: float
    t_end_s: float
    expected_count: float


@dataclass
class Rider:
    """One trip request. Private (background) trips reuse the same record shape."""

    id: int
    origin: int
    destination: int
    request_time: float
    shared: bool
    # windows, frozen at request entry by derive_time_windows()
    earliest_departure: float | None = None
    latest_departure: float | None = None   # q: latest acceptable pickup
    latest_arrival: float | None = None     # l: latest acceptable dropoff
    direct_time_s: float | None = None      # direct travel estimate at request time
    status: str = PENDING
    vehicle: int | None = None
    pickup_time: float | None = None
    dropoff_time: float | None = None

    def finalize(self, vehicle_id: int):
        if self.status != PENDING:
            raise RuntimeError(f"rider {self.id}: illegal transition {self.status} -> finalized")
        self.status = FINALIZED
        self.vehicle = vehicle_id

    def expire(self):
        if self.status != PENDING:
            raise RuntimeError(f"rider {self.id}: illegal transition {self.status} -> expired")
        self.status = EXPIRED

    @property
    def served(self) -> bool:
        return self.dropoff_time is not None

    @property
    def onboard(self) -> bool:
        return self.pickup_time is not None and self.dropoff_time is None


@dataclass
class Vehicle:
    """Fleet vehicle (or a transient private vehicle when kind == 'private').

    ``node`` is the current node while parked or between links; while
    traversing a link, ``link``/``offset_m`` give the position instead.
    ``assigned`` holds rider ids committed to this vehicle and not yet dropped
    off; ``schedule`` is the committed stop order (list of scheduling.Stop).
    """

    id: int
    node: int | None
    capacity: int = 2
    kind: str = "shared"
    link: int | None = None
    offset_m: float = 0.0
    assigned: list = field(default_factory=list)
    onboard: list = field(default_factory=list)
    schedule: list = field(default_factory=list)
    route: list = field(default_factory=list)  # queued link ids toward next stop
    destination: int | None = None             # private trips only
    odometer_m: float = 0.0
    moving_s: float = 0.0
    n_assignments: int = 0
    arrived_at: float | None = None  # sub-tick time the vehicle last went idle

    @property
    def position(self):
        """Node id, or ``(link_id, offset_m)`` while mid-link."""
        if self.link is not None:
            return (self.link, self.offset_m)
        return self.node

    @property
    def seats_free(self) -> int:
        return self.capacity - len(self.assigned)

    @property
    def idle(self) -> bool:
        return self.kind == "shared" and not self.schedule and self.link is None

    @property
    def occupancy(self) -> int:
        return len(self.onboard)


def load_od_file(path) -> list:
    """Parse OD records from text (``OD from to t_start_s t_end_s expected_count``)."""
    records = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            try:
                if tok[0] != "OD" or len(tok) != 6:
                    raise ValueError("expected OD from to t_start_s t_end_s expected_count")
                rec = ODRecord(int(tok[1]), int(tok[2]), float(tok[3]), float(tok[4]),
                               float(tok[5]))
                if rec.t_end_s <= rec.t_start_s:
                    raise ValueError("t_end_s must exceed t_start_s")
                if rec.expected_count < 0:
                    raise ValueError("expected_count must be >= 0")
                records.append(rec)
            except ValueError as exc:
                raise DemandFormatError(f"{path}:{lineno}: {exc}") from None
    return records


def write_od_file(records, path):
    with open(path, "w") as fh:
        fh.write("# ridepool demand\n")
        for r in records:
            fh.write(f"OD {r.origin} {r.destination} {r.t_start_s:g} {r.t_end_s:g} "
                     f"{r.expected_count:g}\n")


def generate_demand(records, share: float, seed: int,
                    load_period_s: float | None = None) -> list:
    """Realize riders from OD records; deterministic in ``seed``.

    Trips are sorted by arrival instant before ids are assigned, so rider ids
    are chronological. ``load_period_s`` (when given) clips demand to
    [0, load_period_s).
    """
    if not 0.0 <= share <= 1.0:
        raise ValueError("share must be in [0, 1]")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xD17]))
    trips = []
    for ri, rec in enumerate(records):
        t0, t1 = rec.t_start_s, rec.t_end_s
        if load_period_s is not None:
            t1 = min(t1, load_period_s)
            if t1 <= t0:
                continue
        span = rec.t_end_s - rec.t_start_s
        t = t0
        while t < t1:
            b_end = min(t + BUCKET_S, t1)
            mean = rec.expected_count * (b_end - t) / span
            count = int(rng.poisson(mean))
            instants = np.sort(rng.uniform(t, b_end, size=count))
            for inst in instants:
                trips.append((float(inst), ri, rec))
            t = b_end
    trips.sort(key=lambda x: (x[0], x[1]))
    riders = []
    if trips:
        shared_flags = rng.random(len(trips)) < share
        for i, (inst, _, rec) in enumerate(trips):
            riders.append(Rider(id=i, origin=rec.origin, destination=rec.destination,
                                request_time=inst, shared=bool(shared_flags[i])))
    log.debug("generated %d trips (%d shared) from %d OD records",
              len(riders), sum(r.shared for r in riders), len(records))
    return riders


def derive_time_windows(rider: Rider, flexibility_s: float, net) -> bool:
    """Freeze the rider's windows under the network's current speeds.

    Returns False (leaving the rider untouched) when the destination is
    unreachable; such requests are rejected at entry.
    """
    direct = net.travel_time(rider.origin, rider.destination)
    if direct == float("inf"):
        return False
    rider.earliest_departure = rider.request_time
    rider.latest_departure = rider.request_time + flexibility_s
    rider.latest_arrival = rider.latest_departure + direct
    rider.direct_time_s = direct
    return True


def seed_fleet(net, riders, fleet_size: int, seed: int, capacity: int = 2) -> list:
    """Park ``fleet_size`` vehicles at nodes drawn proportionally to shared demand.

    Weights are per-node shared request counts; with no shared demand at all
    the draw falls back to uniform over nodes. Deterministic in ``seed``.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xF1EE7]))
    counts = {}
    for r in riders:
        if r.shared:
            counts[r.origin] = counts.get(r.origin, 0) + 1
    nodes = sorted(counts) if counts else list(net.node_ids)
    weights = np.array([counts[n] for n in nodes], dtype=float) if counts else \
        np.ones(len(nodes))
    weights = weights / weights.sum()
    picks = rng.choice(len(nodes), size=fleet_size, p=weights)
    return [Vehicle(id=i, node=nodes[int(k)], capacity=capacity)
            for i, k in enumerate(picks)]


def expire_requests(riders, now: float) -> list:
    """Expire pending shared riders strictly past their latest departure.

    A rider with q exactly equal to ``now`` is still matchable this epoch.
    Returns the newly expired riders.
    """
    out = []
    for r in riders:
        if r.shared and r.status == PENDING and r.latest_departure is not None \
                and now > r.latest_departure:
            r.expire()
            out.append(r)
    return out
