"""Second-resolution traffic loop around the rolling-horizon dispatcher.

The world advances in fixed ticks (default 1 s). Each tick, in order: newly
arrived requests are injected (shared requests join the pending pool with
time windows frozen under current speeds; private requests spawn a private
vehicle that drives itself), link speeds are refreshed from occupancy via
Greenshields, a matching epoch runs if the tick lands on a ``delta_s``
boundary, and every vehicle advances along its links with whatever time
budget the tick gives it, possibly crossing several short links and serving
several stops in one tick.

Stops take zero dwell time. A shared vehicle re-resolves its shortest path to
the next stop every time it leaves a stop, so a route planned under free-flow
speeds adapts once congestion builds; committed time windows are *not*
re-checked here — a late pickup or dropoff is recorded as a violation event
and the ride continues. Private vehicles re-pick their next link at every
intersection.

The run drains after the demand window closes: epochs keep firing while
anyone is pending, and the loop ends once every shared vehicle is idle and
every private vehicle has arrived.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import demand, dispatch
from .config import ScenarioConfig
from .network import RoadNetwork, load_network, shortest_path, travel_time

log = logging.getLogger(__name__)

# Safety valve: give up draining this long after the demand window closes.
MAX_DRAIN_S = 4 * 3600.0

_LATE_TOL_S = 1e-6


@dataclass(frozen=True)
class SimEvent:
    t: float
    kind: str
    vehicle: int | None = None
    user: int | None = None
    node: int | None = None
    link: int | None = None
    value: float | None = None


@dataclass
class RunResult:
    cfg: ScenarioConfig
    net: RoadNetwork
    riders: list
    fleet: list                      # shared vehicles
    private: list                    # private vehicles (id offset by rider id)
    events: list
    messages: list
    epochs: list
    audits: list
    end_s: float
    wall_s: float

    @property
    def riders_by_id(self) -> dict:
        return {r.id: r for r in self.riders}


class Simulation:
    """Mutable world state plus the tick loop; dispatch sees it as ``world``."""

    def __init__(self, net: RoadNetwork, riders: list, fleet: list,
                 cfg: ScenarioConfig, load_end_s: float):
        self.net = net
        self.cfg = cfg
        self.load_end_s = load_end_s
        self.all_riders = sorted(riders, key=lambda r: r.request_time)
        self.riders: dict = {}           # injected riders by id
        self.fleet = sorted(fleet, key=lambda v: v.id)
        self.private: list = []          # private vehicles still on the road
        self.private_all: list = []      # every private vehicle ever spawned
        self.vehicle_by_id = {v.id: v for v in self.fleet}
        self.events: list = []
        self.messages: list = []
        self.epochs: list = []
        self.audits: list = []
        self._next_arrival = 0
        self._seq = 0
        self._tick_events: list = []

    # -- world protocol used by dispatch ---------------------------------

    def emit(self, t, kind, vehicle=None, user=None, node=None, link=None,
             value=None):
        self._tick_events.append(
            (t, self._seq, SimEvent(t, kind, vehicle, user, node, link, value)))
        self._seq += 1

    def pending_riders(self) -> list:
        return [r for r in sorted(self.riders.values(), key=lambda r: r.id)
                if r.status == demand.PENDING]

    # -- per-tick phases --------------------------------------------------

    def _inject(self, now: float):
        while (self._next_arrival < len(self.all_riders)
               and self.all_riders[self._next_arrival].request_time <= now):
            rider = self.all_riders[self._next_arrival]
            self._next_arrival += 1
            self.riders[rider.id] = rider
            reachable = demand.derive_time_windows(rider, self.cfg.flexibility_s,
                                                   self.net)
            direct = travel_time(self.net, rider.origin, rider.destination)
            self.emit(t=rider.request_time, kind="request", user=rider.id,
                      node=rider.origin, value=direct if reachable else None)
            if not reachable:
                rider.expire()
                self.emit(t=rider.request_time, kind="expiry", user=rider.id,
                          node=rider.origin)
                continue
            if not rider.shared:
                self._spawn_private(rider)

    def _spawn_private(self, rider):
        veh = demand.Vehicle(id=demand.PRIVATE_VEHICLE_ID_BASE + rider.id,
                             node=rider.origin, capacity=1, kind="private",
                             destination=rider.destination)
        rider.finalize(veh.id)
        rider.pickup_time = rider.request_time
        veh.onboard.append(rider.id)
        self.private.append(veh)
        self.private_all.append(veh)
        self.vehicle_by_id[veh.id] = veh

    def _refresh_speeds(self):
        counts = np.zeros(len(self.net.links))
        for v in self.fleet:
            if v.link is not None:
                counts[self.net.link_index(v.link)] += 1
        for v in self.private:
            if v.link is not None:
                counts[self.net.link_index(v.link)] += 1
        self.net.refresh_speeds(counts)

    # -- movement ---------------------------------------------------------

    def _advance_all(self, now: float):
        for v in self.fleet:
            self._advance(v, now)
        for v in list(self.private):
            self._advance(v, now)
            if v.kind == "private" and v.link is None and v.node == v.destination:
                self._finish_private(v, now)

    def _finish_private(self, veh, now: float):
        rider = self.riders[veh.id - demand.PRIVATE_VEHICLE_ID_BASE]
        if rider.dropoff_time is None:
            rider.dropoff_time = veh.arrived_at if veh.arrived_at is not None else now
            self.emit(t=rider.dropoff_time, kind="dropoff", vehicle=veh.id,
                      user=rider.id, node=veh.node)
            self.private.remove(veh)

    def _advance(self, veh, now: float):
        remaining = self.cfg.tick_s
        while remaining > 1e-12:
            if veh.link is None:
                t_here = now + (self.cfg.tick_s - remaining)
                if veh.kind == "shared":
                    self._execute_stops(veh, t_here)
                nxt = self._next_link(veh)
                if nxt is None:
                    veh.arrived_at = t_here
                    return
                veh.link = nxt
                veh.offset_m = 0.0
                self.emit(t=t_here, kind="depart", vehicle=veh.id,
                          node=veh.node, link=nxt)
            link = self.net.link(veh.link)
            speed = self.net.link_speed(veh.link)
            dist_left = link.length_m - veh.offset_m
            need = dist_left / speed
            if need > remaining + 1e-12:
                step = speed * remaining
                veh.offset_m += step
                veh.odometer_m += step
                veh.moving_s += remaining
                return
            veh.odometer_m += dist_left
            veh.moving_s += need
            remaining -= need
            veh.node = link.to_node
            veh.link = None
            veh.offset_m = 0.0
            veh.arrived_at = now + (self.cfg.tick_s - remaining)
            self.emit(t=veh.arrived_at, kind="arrive",
                      vehicle=veh.id, node=veh.node, link=link.id)

    def _next_link(self, veh) -> int | None:
        if veh.kind == "private":
            if veh.node == veh.destination:
                return None
            path = shortest_path(self.net, veh.node, veh.destination)
            if path is None or not path.links:
                log.error("private vehicle %d stranded at node %d", veh.id, veh.node)
                veh.destination = veh.node
                return None
            return path.links[0]
        if veh.route:
            return veh.route.pop(0)
        if not veh.schedule:
            return None
        target = veh.schedule[0].node
        path = shortest_path(self.net, veh.node, target)
        if path is None:
            raise RuntimeError(
                f"vehicle {veh.id} cannot reach scheduled node {target} "
                f"from node {veh.node}")
        veh.route = list(path.links)
        if not veh.route:      # already there; stops run next loop iteration
            return None
        return veh.route.pop(0)

    def _execute_stops(self, veh, t: float):
        while veh.schedule and veh.schedule[0].node == veh.node:
            stop = veh.schedule.pop(0)
            rider = self.riders[stop.user]
            if stop.kind == "pickup":
                rider.pickup_time = t
                veh.onboard.append(rider.id)
                self.emit(t=t, kind="pickup", vehicle=veh.id, user=rider.id,
                          node=veh.node)
                late = t - rider.latest_departure
                if late > _LATE_TOL_S:
                    self.emit(t=t, kind="violation_pickup", vehicle=veh.id,
                              user=rider.id, node=veh.node, value=late)
            else:
                rider.dropoff_time = t
                veh.onboard.remove(rider.id)
                veh.assigned.remove(rider.id)
                self.emit(t=t, kind="dropoff", vehicle=veh.id, user=rider.id,
                          node=veh.node)
                late = t - rider.latest_arrival
                if late > _LATE_TOL_S:
                    self.emit(t=t, kind="violation_dropoff", vehicle=veh.id,
                              user=rider.id, node=veh.node, value=late)
            veh.route = []

    # -- main loop --------------------------------------------------------

    def _epochs_needed(self, now: float) -> bool:
        return (now <= self.load_end_s
                or self._next_arrival < len(self.all_riders)
                or bool(self.pending_riders()))

    def _finished(self, now: float) -> bool:
        if now <= self.load_end_s or self._next_arrival < len(self.all_riders):
            return False
        if self.pending_riders() or self.private:
            return False
        return all(v.idle and not v.assigned for v in self.fleet)

    def run(self) -> float:
        ticks_per_epoch = int(round(self.cfg.delta_s / self.cfg.tick_s))
        epoch_idx = 0
        k = 0
        while True:
            now = k * self.cfg.tick_s
            self._inject(now)
            if self.cfg.background_traffic:
                self._refresh_speeds()
            if k % ticks_per_epoch == 0 and self._epochs_needed(now):
                record = dispatch.run_epoch(self, now, self.cfg, epoch_idx)
                self.epochs.append(record)
                epoch_idx += 1
            self._advance_all(now)
            self._tick_events.sort(key=lambda e: (e[0], e[1]))
            self.events.extend(e for _, _, e in self._tick_events)
            self._tick_events.clear()
            k += 1
            now = k * self.cfg.tick_s
            if self._finished(now):
                return now
            if now > self.load_end_s + MAX_DRAIN_S:
                log.error("drain limit hit at t=%.0f s; %d pending, %d private",
                          now, len(self.pending_riders()), len(self.private))
                return now


def run_scenario(cfg: ScenarioConfig) -> RunResult:
    """Load inputs, simulate one scenario, and return the full trace."""
    cfg.validate()
    wall0 = time.perf_counter()
    net = load_network(cfg.network, v_min_mps=cfg.v_min_mps)
    records = demand.load_od_file(cfg.demand)
    load_end = cfg.load_period_s
    if load_end is None:
        load_end = max(r.t_end_s for r in records)
    riders = demand.generate_demand(records, cfg.share, cfg.seed, load_end)
    fleet = demand.seed_fleet(net, riders, cfg.fleet_size, cfg.seed,
                              capacity=cfg.capacity)
    sim = Simulation(net, riders, fleet, cfg, load_end)
    end_s = sim.run()
    return RunResult(cfg=cfg, net=net, riders=sim.all_riders, fleet=sim.fleet,
                     private=sim.private_all, events=sim.events,
                     messages=sim.messages, epochs=sim.epochs,
                     audits=sim.audits, end_s=end_s,
                     wall_s=time.perf_counter() - wall0)
