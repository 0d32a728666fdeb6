"""Candidate pair construction and scoring (step 1 of the two-step matcher).

Users eligible for pairing at a matching time are pending riders plus the
passengers of vehicles that still have an empty seat. Pairs of two riders are
type "a", rider + passenger is type "b", and passenger + passenger ("c") is
never matchable. Pair feasibility is a cheap virtual-vehicle test on the
pickup windows only; the full stop-pattern checks in the scheduling step have
the final say.

The pair score lies in (0, 1] and favors pairs whose current locations and
destinations are close in travel time:

    score = alpha * (1 - d_o / (1 + d_o + d_d)) + beta * (1 - d_d / (1 + d_o + d_d))

with alpha + beta = 1 and both distances expressed in ``time_unit_s`` units
(minutes by default). Two users at the same origin and destination score
exactly 1. Note the score is only monotone decreasing per distance coordinate
at alpha = beta = 0.5; for skewed weights the cross term can dominate.

Users are canonicalized by ascending id inside a pair, and the time distances
are evaluated in canonical direction (for type "b": from the passenger's
current location to the rider's origin), so construction order never changes
a pair's identity or score.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from . import demand

TYPE_A = "a"  # rider + rider
TYPE_B = "b"  # rider + passenger of an available vehicle
TYPE_C = "c"  # passenger + passenger, never matchable


@dataclass(frozen=True)
class UserView:
    """Immutable matching-time snapshot of one user."""

    id: int
    kind: str                  # 'rider' | 'passenger'
    origin: int
    destination: int
    position: object           # node id, or (link_id, offset_m) for onboard passengers
    latest_departure: float
    latest_arrival: float
    vehicle: int | None = None
    onboard: bool = False
    seats_free: int = 0        # empty seats on the passenger's vehicle


def rider_view(r: demand.Rider) -> UserView:
    return UserView(id=r.id, kind="rider", origin=r.origin, destination=r.destination,
                    position=r.origin, latest_departure=r.latest_departure,
                    latest_arrival=r.latest_arrival)


def passenger_view(r: demand.Rider, vehicle: demand.Vehicle) -> UserView:
    """Snapshot of a committed rider. Onboard passengers ride at the vehicle's position."""
    pos = vehicle.position if r.onboard else r.origin
    return UserView(id=r.id, kind="passenger", origin=r.origin, destination=r.destination,
                    position=pos, latest_departure=r.latest_departure,
                    latest_arrival=r.latest_arrival, vehicle=vehicle.id,
                    onboard=r.onboard, seats_free=vehicle.seats_free)


@dataclass(frozen=True)
class PairScoreConfig:
    alpha: float = 0.5
    beta: float = 0.5
    time_unit_s: float = 60.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if abs(self.alpha + self.beta - 1.0) > 1e-9:
            raise ValueError("alpha + beta must equal 1")
        if self.time_unit_s <= 0:
            raise ValueError("time_unit_s must be positive")


@dataclass(frozen=True)
class CandidatePair:
    """Unordered user pair, canonicalized so users[0] has the smaller id."""

    users: tuple

    def __init__(self, u: UserView, v: UserView):
        if u.id == v.id:
            raise ValueError("a pair needs two distinct users")
        object.__setattr__(self, "users", (u, v) if u.id < v.id else (v, u))

    @property
    def key(self):
        return (self.users[0].id, self.users[1].id)

    @property
    def pair_type(self) -> str:
        kinds = sorted(u.kind for u in self.users)
        if kinds == ["rider", "rider"]:
            return TYPE_A
        if kinds == ["passenger", "rider"]:
            return TYPE_B
        return TYPE_C

    @property
    def rider(self) -> UserView:
        return next(u for u in self.users if u.kind == "rider")

    @property
    def passenger(self) -> UserView:
        return next(u for u in self.users if u.kind == "passenger")


def enumerate_pairs(users) -> list:
    """All m*(m-1)/2 unordered pairs, in ascending canonical key order."""
    ordered = sorted(users, key=lambda u: u.id)
    return [CandidatePair(a, b) for a, b in itertools.combinations(ordered, 2)]


def time_distances(pair: CandidatePair, tt) -> tuple:
    """(origin distance, destination distance) in seconds, canonical direction.

    Type "b" pairs measure the origin distance from the passenger's current
    location to the rider's origin; type "a" pairs from the lower-id user's
    origin. Destination distance always runs lower-id -> higher-id.
    """
    a, b = pair.users
    if pair.pair_type == TYPE_B:
        d_o = tt.time_from(pair.passenger.position, pair.rider.origin)
    else:
        d_o = tt.time_from(a.position, b.origin)
    d_d = tt.travel_time(a.destination, b.destination)
    return d_o, d_d


def pair_score(d_o_s: float, d_d_s: float, cfg: PairScoreConfig) -> float:
    """Score from raw time distances in seconds; in (0, 1], 1 iff both are zero."""
    d_o = d_o_s / cfg.time_unit_s
    d_d = d_d_s / cfg.time_unit_s
    denom = 1.0 + d_o + d_d
    return cfg.alpha * (1.0 - d_o / denom) + cfg.beta * (1.0 - d_d / denom)


def score_pair(pair: CandidatePair, tt, cfg: PairScoreConfig) -> float:
    d_o, d_d = time_distances(pair, tt)
    return pair_score(d_o, d_d, cfg)


def filter_feasible(pairs, now: float, tt, counters: dict | None = None) -> list:
    """Keep pairs a virtual vehicle could serve within both pickup windows.

    Type "a" survives when starting at either user's origin now reaches the
    other origin by that user's latest departure. Type "b" survives when the
    passenger's vehicle, from the passenger's current location, reaches the
    rider's origin in time, and the vehicle still has an empty seat. Type "c"
    and pairs with unreachable legs are dropped (counted in ``counters``).
    """
    kept = []
    for p in pairs:
        t = p.pair_type
        if t == TYPE_C:
            _count(counters, "type_c")
            continue
        if t == TYPE_B:
            if p.passenger.seats_free <= 0:
                _count(counters, "no_seat")
                continue
            reach = tt.time_from(p.passenger.position, p.rider.origin)
            if reach == float("inf"):
                _count(counters, "unreachable")
                continue
            if now + reach > p.rider.latest_departure:
                _count(counters, "window")
                continue
        else:
            a, b = p.users
            r_ab = tt.travel_time(a.origin, b.origin)
            r_ba = tt.travel_time(b.origin, a.origin)
            if r_ab == float("inf") and r_ba == float("inf"):
                _count(counters, "unreachable")
                continue
            ok = (now + r_ab <= b.latest_departure) or (now + r_ba <= a.latest_departure)
            if not ok:
                _count(counters, "window")
                continue
        kept.append(p)
    return kept


def _count(counters, key):
    if counters is not None:
        counters[key] = counters.get(key, 0) + 1


def greedy_match(scored_pairs) -> tuple:
    """Select a user-disjoint pair set, best score first.

    ``scored_pairs`` is an iterable of (pair, score). Repeatedly takes the
    highest-scoring remaining pair (ties broken by the smaller canonical user
    id pair), then discards every pair sharing a user with it. Returns
    (selected [(pair, score), ...], matched user id set).
    """
    order = sorted(scored_pairs, key=lambda ps: (-ps[1], ps[0].key))
    used = set()
    selected = []
    for pair, score in order:
        a, b = pair.key
        if a in used or b in used:
            continue
        used.add(a)
        used.add(b)
        selected.append((pair, score))
    return selected, used
