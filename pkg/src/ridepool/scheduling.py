"""Stop patterns, window checks, and travel-time savings (step 2 of the matcher).

For a candidate pair and a concrete vehicle, every admissible pickup/dropoff
ordering is enumerated as a stop pattern, leg times are accumulated from the
vehicle's current position under the speeds frozen at the matching time, and
each pattern is checked against the users' windows: every pickup must happen
by that user's latest departure (z1) and every dropoff by their latest
arrival (z2). The value of a feasible pattern is the travel-time saving

    saving = sum of the users' direct times from their current locations
             - total time to complete the pattern

which the assignment step maximizes. Ties between equally valued feasible
patterns go to the earlier one in the fixed enumeration order below.
"""

from __future__ import annotations

from dataclasses import dataclass

from .pairing import TYPE_B, CandidatePair, UserView

PICKUP = "pickup"
DROPOFF = "dropoff"

# All six orderings of two users' stops with each pickup before its dropoff,
# in fixed enumeration order; slots 0/1 are the pair's canonical users.
_ORDERS_TWO = (
    ((PICKUP, 0), (PICKUP, 1), (DROPOFF, 0), (DROPOFF, 1)),
    ((PICKUP, 0), (PICKUP, 1), (DROPOFF, 1), (DROPOFF, 0)),
    ((PICKUP, 0), (DROPOFF, 0), (PICKUP, 1), (DROPOFF, 1)),
    ((PICKUP, 1), (PICKUP, 0), (DROPOFF, 1), (DROPOFF, 0)),
    ((PICKUP, 1), (PICKUP, 0), (DROPOFF, 0), (DROPOFF, 1)),
    ((PICKUP, 1), (DROPOFF, 1), (PICKUP, 0), (DROPOFF, 0)),
)

# With one user already onboard, the vehicle must divert to the new rider
# first; only the rider's dropoff and the onboard user's dropoff may swap.
_ORDERS_ONBOARD = (
    ((PICKUP, "r"), (DROPOFF, "r"), (DROPOFF, "p")),
    ((PICKUP, "r"), (DROPOFF, "p"), (DROPOFF, "r")),
)


@dataclass(frozen=True)
class Stop:
    kind: str  # 'pickup' | 'dropoff'
    user: int
    node: int


@dataclass(frozen=True)
class Pattern:
    """One stop ordering with leg times accumulated from the vehicle position."""

    stops: tuple
    offsets: tuple        # arrival offset of each stop relative to the matching time
    total_s: float        # time to complete the whole pattern (inf if unroutable)


def _stop_node(user: UserView, kind: str) -> int:
    return user.origin if kind == PICKUP else user.destination


def enumerate_patterns(pair: CandidatePair, vehicle_position, tt,
                       counters: dict | None = None) -> list:
    """All stop patterns for serving ``pair`` with a vehicle at ``vehicle_position``.

    Rider-rider pairs and rider + awaiting-pickup passenger yield the six
    two-user orderings (the passenger's own pickup is re-scheduled); a rider
    paired with an onboard passenger yields the two divert-first orderings.
    Patterns with an unroutable leg come back with infinite total time and
    fail the window check naturally.
    """
    u0, u1 = pair.users
    if pair.pair_type == TYPE_B and pair.passenger.onboard:
        slot = {"r": pair.rider, "p": pair.passenger}
        orders = [[(kind, slot[s]) for kind, s in order] for order in _ORDERS_ONBOARD]
    else:
        orders = [[(kind, (u0, u1)[s]) for kind, s in order] for order in _ORDERS_TWO]

    patterns = []
    for order in orders:
        stops = tuple(Stop(kind, user.id, _stop_node(user, kind)) for kind, user in order)
        offsets = []
        acc = tt.time_from(vehicle_position, stops[0].node)
        offsets.append(acc)
        for prev, nxt in zip(stops, stops[1:]):
            acc = acc + tt.travel_time(prev.node, nxt.node)
            offsets.append(acc)
        patterns.append(Pattern(stops, tuple(offsets), acc))
        if counters is not None:
            counters["patterns"] = counters.get("patterns", 0) + 1
    return patterns


def check_pattern(pattern: Pattern, now: float, users: dict) -> bool:
    """Window feasibility: pickups by latest departure, dropoffs by latest arrival."""
    for stop, off in zip(pattern.stops, pattern.offsets):
        arrival = now + off
        u = users[stop.user]
        limit = u.latest_departure if stop.kind == PICKUP else u.latest_arrival
        if arrival > limit:
            return False
    return True


def travel_time_saving(pattern: Pattern, pair: CandidatePair, tt) -> float:
    """Direct times from the users' current locations minus the pattern's total time."""
    direct = sum(tt.time_from(u.position, u.destination) for u in pair.users)
    return direct - pattern.total_s


def best_pattern(pair: CandidatePair, vehicle_position, now: float, tt,
                 counters: dict | None = None):
    """Highest-saving feasible pattern as ``(pattern, saving)``, or None.

    ``vehicle_position`` may be a node id or a mid-link ``(link_id, offset_m)``
    tuple. Equal savings keep the earlier pattern in enumeration order.
    """
    users = {u.id: u for u in pair.users}
    best = None
    for pattern in enumerate_patterns(pair, vehicle_position, tt, counters):
        if not check_pattern(pattern, now, users):
            continue
        saving = travel_time_saving(pattern, pair, tt)
        if best is None or saving > best[1]:
            best = (pattern, saving)
    if best is None:
        return None
    return best[0], best[1]


def singleton_schedule(rider: UserView, vehicle_position, now: float, tt):
    """Direct pickup+dropoff schedule for one rider, or None if windows fail.

    Returns (pattern, pickup_travel_s); the pickup travel time is the cost the
    leftover pass minimizes.
    """
    reach = tt.time_from(vehicle_position, rider.origin)
    if now + reach > rider.latest_departure:
        return None
    arrive = reach + tt.travel_time(rider.origin, rider.destination)
    if now + arrive > rider.latest_arrival:
        return None
    stops = (Stop(PICKUP, rider.id, rider.origin),
             Stop(DROPOFF, rider.id, rider.destination))
    return Pattern(stops, (reach, arrive), arrive), reach
