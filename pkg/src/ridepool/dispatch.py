"""Rolling-horizon dispatch: centralized and intersection-distributed backends.

Both backends run the same two-step matcher at every matching time (every
``delta_s`` seconds): enumerate/score/greedily select candidate pairs, then
place selected rider-rider pairs on idle vehicles by maximizing total
travel-time savings, commit rider-passenger insertions onto the passenger's
vehicle, and optionally sweep leftover riders onto leftover idle vehicles by
minimum time-to-pickup.

The centralized backend sees every pending rider and every vehicle. The
distributed backend runs one agent per intersection: a rider's request is
held by its origin node's agent, which discovers vehicles on the inbound
links of all nodes within ``search_level`` undirected hops, matches over that
local view only, and proposes. Proposals from different agents may collide on
a passenger or a vehicle; conflicts are resolved deterministically (passenger
collisions first, by higher pair score; then vehicle collisions, by higher
saving, with pair proposals outranking leftover singles), losers simply stay
pending for the next epoch. The accepted set is a pure function of the epoch
snapshot, independent of the order proposals are delivered in.

Epoch records carry both real wall-clock matching times and a deterministic
operation count; see metrics for how each is reported.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import demand, pairing, scheduling
from .assignment import assign_min_cost, hungarian_assign
from .network import TravelTimeOracle, neighbors_khop

log = logging.getLogger(__name__)

PAIR = "pair"        # two riders on an idle vehicle
TYPEB = "typeb"      # rider inserted onto a passenger's vehicle
SINGLE = "single"    # leftover rider alone on an idle vehicle


@dataclass(frozen=True)
class Proposal:
    kind: str
    users: tuple            # rider ids newly committed by this proposal
    vehicle: int
    pattern: scheduling.Pattern
    saving: float | None = None
    score: float | None = None      # pair score, used for passenger conflicts
    pickup_s: float | None = None   # single proposals: time to pickup
    proposer: int | None = None     # intersection node id; None when centralized
    passenger: int | None = None    # retargeted passenger (typeb only)

    @property
    def sort_key(self):
        return (self.vehicle, self.users, -1 if self.proposer is None else self.proposer)


@dataclass(frozen=True)
class DispatchMessage:
    t: float
    epoch: int
    mtype: str      # VehicleQuery | VehicleReport | AssignmentProposal | ProposalDecision
    sender: int
    receiver: int


@dataclass(frozen=True)
class CommitAudit:
    """Everything needed to re-check a commitment against commit-time speeds."""

    t: float
    epoch: int
    vehicle: int
    position: object
    kind: str
    stops: tuple
    arrivals: tuple          # absolute planned arrival time per stop
    windows: dict            # user id -> (latest_departure, latest_arrival)
    new_users: tuple


@dataclass
class EpochRecord:
    t: float
    epoch: int
    mode: str
    pending: int = 0
    expired: int = 0
    assigned: int = 0
    n_proposals: int = 0
    n_accepted: int = 0
    n_agents: int = 0
    users_considered: int = 0
    vehicles_considered: int = 0
    candidate_max: int = 0          # largest single-dispatcher candidate set
    wall_max_s: float = 0.0
    wall_mean_s: float = 0.0
    wall_total_s: float = 0.0
    units_max: int = 0
    units_mean: float = 0.0
    units_total: int = 0
    candidate_sets: tuple = ()      # (agent id, user ids, vehicle ids) per dispatcher
    link_speeds: np.ndarray | None = None


@dataclass
class MatchStats:
    users: tuple = ()
    vehicles: tuple = ()
    n_pairs: int = 0
    n_feasible: int = 0
    n_selected: int = 0
    units: int = 0

    @property
    def candidate_size(self) -> int:
        return len(self.users) + len(self.vehicles)


def _score_cfg(cfg) -> pairing.PairScoreConfig:
    return pairing.PairScoreConfig(cfg.alpha, cfg.beta, cfg.psi_time_unit_s)


def idle_vehicles(fleet) -> list:
    return [v for v in fleet if v.idle and not v.assigned]


def available_passengers(fleet, riders) -> list:
    """(rider, vehicle) for every committed rider on a vehicle with a seat free."""
    out = []
    for v in fleet:
        if v.kind != "shared" or v.seats_free <= 0:
            continue
        for rid in v.assigned:
            out.append((riders[rid], v))
    out.sort(key=lambda rv: (rv[1].id, rv[0].id))
    return out


def match_pool(riders, idle, passengers, now, net, cfg, proposer=None):
    """Run the two-step matcher over one visibility pool; returns (proposals, stats).

    ``riders`` are pending rider records, ``idle`` the idle vehicles usable for
    pair/single placement, ``passengers`` (rider, vehicle) tuples for insertion
    candidates. Pure with respect to world state: only proposals come back.
    """
    tt = TravelTimeOracle(net)
    score_cfg = _score_cfg(cfg)
    floor = cfg.min_vtts_s
    hungarian_ops = 0

    views = [pairing.rider_view(r) for r in sorted(riders, key=lambda r: r.id)]
    views += [pairing.passenger_view(r, v) for r, v in passengers]
    vehicle_by_id = {v.id: v for v in idle}
    vehicle_by_id.update({v.id: v for _, v in passengers})

    pairs = pairing.enumerate_pairs(views)
    feasible = pairing.filter_feasible(pairs, now, tt)
    scored = [(p, pairing.score_pair(p, tt, score_cfg)) for p in feasible]
    selected, _ = pairing.greedy_match(scored)

    proposals = []
    typea = []
    for pair, score in selected:
        if pair.pair_type == pairing.TYPE_B:
            veh = vehicle_by_id[pair.passenger.vehicle]
            best = scheduling.best_pattern(pair, veh.position, now, tt)
            if best is None:
                continue  # no feasible insertion; rider stays pending
            pattern, saving = best
            if floor is not None and saving < floor:
                continue
            proposals.append(Proposal(TYPEB, (pair.rider.id,), veh.id, pattern,
                                      saving=saving, score=score, proposer=proposer,
                                      passenger=pair.passenger.id))
        else:
            typea.append((pair, score))

    weights = {}
    cell = {}
    for pair, score in typea:
        for v in idle:
            best = scheduling.best_pattern(pair, v.position, now, tt)
            if best is None:
                continue
            pattern, saving = best
            if floor is not None and saving < floor:
                continue
            weights[(pair.key, v.id)] = saving
            cell[(pair.key, v.id)] = (pair, score, pattern, saving)
    if weights:
        n_r = len({r for r, _ in weights})
        n_c = len({c for _, c in weights})
        hungarian_ops += n_r * n_c * min(n_r, n_c)
    for pair_key, vid in hungarian_assign(weights):
        pair, score, pattern, saving = cell[(pair_key, vid)]
        proposals.append(Proposal(PAIR, pair_key, vid, pattern, saving=saving,
                                  score=score, proposer=proposer))

    if cfg.singleton_assign:
        taken_users = {u for p in proposals for u in p.users}
        taken_veh = {p.vehicle for p in proposals}
        leftover = [v for v in views if v.kind == "rider" and v.id not in taken_users]
        free = [v for v in idle if v.id not in taken_veh]
        costs = {}
        single_cell = {}
        for rv in leftover:
            for v in free:
                got = scheduling.singleton_schedule(rv, v.position, now, tt)
                if got is None:
                    continue
                pattern, reach = got
                costs[(rv.id, v.id)] = reach
                single_cell[(rv.id, v.id)] = pattern
        if costs:
            n_r = len({r for r, _ in costs})
            n_c = len({c for _, c in costs})
            hungarian_ops += n_r * n_c * min(n_r, n_c)
        for rid, vid in assign_min_cost(costs):
            proposals.append(Proposal(SINGLE, (rid,), vid, single_cell[(rid, vid)],
                                      pickup_s=costs[(rid, vid)], proposer=proposer))

    stats = MatchStats(
        users=tuple(v.id for v in views),
        vehicles=tuple(sorted({v.id for v in idle} | {v.id for _, v in passengers})),
        n_pairs=len(pairs),
        n_feasible=len(feasible),
        n_selected=len(selected),
        units=tt.queries + len(pairs) + hungarian_ops,
    )
    return proposals, stats


def search_vehicles(net, agent_node, level, fleet) -> list:
    """Vehicles visible to an intersection agent at the given search level.

    The agent sees vehicles positioned on the inbound links of every node
    within ``level`` undirected hops (level 0: the agent's own node): idle
    vehicles parked at those nodes, vehicles traversing a link whose head node
    is in the neighborhood, and vehicles standing at such a node between
    stops. Private vehicles are invisible to dispatch.
    """
    ball = neighbors_khop(net, agent_node, level)
    found = []
    for v in sorted(fleet, key=lambda v: v.id):
        if v.kind != "shared":
            continue
        at = net.link(v.link).to_node if v.link is not None else v.node
        if at in ball:
            found.append(v)
    return found


def resolve_conflicts(proposals) -> tuple:
    """Deterministically reduce colliding proposals to a committable set.

    Passenger collisions go first (several agents inserting onto the same
    passenger): the highest pair score wins, ties to the lowest proposing
    agent id. Then vehicle collisions: pair-class proposals outrank single
    ones, higher saving (or smaller pickup time among singles) wins, ties
    again to the lowest agent id. Input order never matters. Returns
    (accepted, rejected), both sorted by vehicle id.
    """
    props = sorted(proposals, key=lambda p: p.sort_key)
    rejected = []

    by_passenger = {}
    stage2 = []
    for p in props:
        if p.kind == TYPEB:
            by_passenger.setdefault(p.passenger, []).append(p)
        else:
            stage2.append(p)
    for _, group in sorted(by_passenger.items()):
        group.sort(key=lambda p: (-p.score, p.proposer if p.proposer is not None else -1))
        stage2.append(group[0])
        rejected.extend(group[1:])

    def vehicle_rank(p):
        cls = 1 if p.kind in (PAIR, TYPEB) else 0
        value = p.saving if cls else -p.pickup_s
        agent = p.proposer if p.proposer is not None else -1
        return (-cls, -value, agent, p.users)

    accepted = []
    by_vehicle = {}
    for p in stage2:
        by_vehicle.setdefault(p.vehicle, []).append(p)
    for _, group in sorted(by_vehicle.items()):
        group.sort(key=vehicle_rank)
        accepted.append(group[0])
        rejected.extend(group[1:])

    accepted.sort(key=lambda p: p.sort_key)
    rejected.sort(key=lambda p: p.sort_key)
    return accepted, rejected


def apply_proposal(world, p: Proposal, now: float, epoch: int):
    """Commit an accepted proposal: schedule, rider finalization, events, audit."""
    veh = world.vehicle_by_id[p.vehicle]
    for uid in p.users:
        rider = world.riders[uid]
        rider.finalize(veh.id)
        veh.assigned.append(uid)
        veh.n_assignments += 1
        world.emit(t=now, kind="assignment", vehicle=veh.id, user=uid,
                   node=rider.origin)
    position = veh.position
    veh.schedule = list(p.pattern.stops)
    veh.route = []
    windows = {}
    for stop in p.pattern.stops:
        r = world.riders[stop.user]
        windows[r.id] = (r.latest_departure, r.latest_arrival)
    world.audits.append(CommitAudit(
        t=now, epoch=epoch, vehicle=veh.id, position=position, kind=p.kind,
        stops=p.pattern.stops,
        arrivals=tuple(now + off for off in p.pattern.offsets),
        windows=windows, new_users=p.users))


def _expire(world, now: float) -> int:
    gone = demand.expire_requests(world.riders.values(), now)
    for r in gone:
        world.emit(t=now, kind="expiry", user=r.id, node=r.origin)
    return len(gone)


def run_epoch_centralized(world, now: float, cfg, epoch: int) -> EpochRecord:
    """One centralized matching epoch over the full system state."""
    expired = _expire(world, now)
    t0 = time.perf_counter()
    pending = world.pending_riders()
    idle = idle_vehicles(world.fleet)
    passengers = available_passengers(world.fleet, world.riders)
    proposals, stats = match_pool(pending, idle, passengers, now, world.net, cfg)
    wall = time.perf_counter() - t0

    for p in sorted(proposals, key=lambda p: p.sort_key):
        apply_proposal(world, p, now, epoch)

    assigned = sum(len(p.users) for p in proposals)
    return EpochRecord(
        t=now, epoch=epoch, mode="centralized", pending=len(pending),
        expired=expired, assigned=assigned, n_proposals=len(proposals),
        n_accepted=len(proposals), n_agents=1,
        users_considered=len(stats.users), vehicles_considered=len(stats.vehicles),
        candidate_max=stats.candidate_size,
        wall_max_s=wall, wall_mean_s=wall, wall_total_s=wall,
        units_max=stats.units, units_mean=float(stats.units), units_total=stats.units,
        candidate_sets=((None, stats.users, stats.vehicles),),
        link_speeds=world.net.speed.copy())


def run_epoch_distributed(world, now: float, cfg, epoch: int) -> EpochRecord:
    """One synchronous epoch of the intersection-agent mesh.

    Every agent computes on the same frozen snapshot; commits happen only
    after all proposals are in and conflicts are resolved.
    """
    expired = _expire(world, now)
    groups = {}
    for r in world.pending_riders():
        groups.setdefault(r.origin, []).append(r)

    proposals = []
    agent_stats = []
    for node in sorted(groups):
        t0 = time.perf_counter()
        found = search_vehicles(world.net, node, cfg.search_level, world.fleet)
        idle = [v for v in found if v.idle and not v.assigned]
        passengers = [(world.riders[rid], v) for v in found
                      if v.assigned and v.seats_free > 0
                      for rid in sorted(v.assigned)]
        props, stats = match_pool(groups[node], idle, passengers, now, world.net,
                                  cfg, proposer=node)
        wall = time.perf_counter() - t0
        proposals.extend(props)
        agent_stats.append((node, stats, wall, props))
        for other in sorted(neighbors_khop(world.net, node, cfg.search_level) - {node}):
            world.messages.append(DispatchMessage(now, epoch, "VehicleQuery", node, other))
            world.messages.append(DispatchMessage(now, epoch, "VehicleReport", other, node))
        for p in props:
            world.messages.append(DispatchMessage(now, epoch, "AssignmentProposal",
                                                  node, p.vehicle))

    accepted, rejected = resolve_conflicts(proposals)
    for p in accepted:
        world.messages.append(DispatchMessage(now, epoch, "ProposalDecision",
                                              p.vehicle, p.proposer))
        apply_proposal(world, p, now, epoch)
    for p in rejected:
        world.messages.append(DispatchMessage(now, epoch, "ProposalDecision",
                                              p.vehicle, p.proposer))

    walls = [w for _, _, w, _ in agent_stats]
    units = [s.units for _, s, _, _ in agent_stats]
    cand = [s.candidate_size for _, s, _, _ in agent_stats]
    user_union = sorted({u for _, s, _, _ in agent_stats for u in s.users})
    veh_union = sorted({v for _, s, _, _ in agent_stats for v in s.vehicles})
    assigned = sum(len(p.users) for p in accepted)
    return EpochRecord(
        t=now, epoch=epoch, mode="distributed",
        pending=sum(len(g) for g in groups.values()),
        expired=expired, assigned=assigned, n_proposals=len(proposals),
        n_accepted=len(accepted), n_agents=len(agent_stats),
        users_considered=len(user_union), vehicles_considered=len(veh_union),
        candidate_max=max(cand, default=0),
        wall_max_s=max(walls, default=0.0),
        wall_mean_s=float(np.mean(walls)) if walls else 0.0,
        wall_total_s=float(sum(walls)),
        units_max=max(units, default=0),
        units_mean=float(np.mean(units)) if units else 0.0,
        units_total=int(sum(units)),
        candidate_sets=tuple((node, s.users, s.vehicles) for node, s, _, _ in agent_stats),
        link_speeds=world.net.speed.copy())


def run_epoch(world, now: float, cfg, epoch: int) -> EpochRecord:
    if cfg.mode == "distributed":
        return run_epoch_distributed(world, now, cfg, epoch)
    return run_epoch_centralized(world, now, cfg, epoch)
