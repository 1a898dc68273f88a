"""Route-plan construction and per-edge assignment costs.

Stop ordering uses the greedy nearest-neighbor rule: starting from the
vehicle's location, repeatedly visit the closest eligible stop, where a
dropoff becomes eligible once its pickup has been sequenced (or the party
is already onboard) and a pickup is eligible only while it fits the
remaining capacity.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import DROPOFF, PICKUP, BatchConfig, Location, Request, RoutePlan, Stop, Vehicle
from .geometry import distance, travel_time


class PlanError(ValueError):
    """Raised when a stop set violates pickup/dropoff pairing."""


@dataclass(frozen=True)
class PlanItem:
    """One request's outstanding stops: pickup is None once the party is onboard."""

    request_id: int
    party_size: int
    pickup: Location | None
    dropoff: Location


@dataclass
class CandidateEdge:
    request_id: int
    vehicle_id: int
    insertion_cost: int  # extra vehicle travel seconds
    max_delay_cost: int  # worst per-rider delay seconds on the candidate plan
    blended_cost: float
    candidate_plan: RoutePlan


def vehicle_demands(vehicle: Vehicle, requests_by_id: dict[int, Request]) -> list[PlanItem]:
    """Outstanding stops implied by the vehicle's onboard riders and committed plan."""
    onboard_ids = {rid for rid, _ in vehicle.onboard}
    kinds: dict[int, set[str]] = {}
    for stop in vehicle.route_plan.stops:
        kinds.setdefault(stop.request_id, set()).add(stop.kind)
    items = []
    for rid in sorted(onboard_ids):
        req = requests_by_id[rid]
        items.append(PlanItem(rid, req.party_size, None, req.destination))
    for rid in sorted(kinds):
        if rid in onboard_ids:
            continue
        if PICKUP not in kinds[rid]:
            raise PlanError(f"request {rid} has a dropoff stop but is not onboard")
        req = requests_by_id[rid]
        items.append(PlanItem(rid, req.party_size, req.origin, req.destination))
    return items


def plan_route(
    vehicle: Vehicle,
    items: list[PlanItem],
    config: BatchConfig,
    now: int = 0,
) -> RoutePlan:
    """Greedy nearest-neighbor stop ordering with cumulative ETAs from `now`.

    Ties on distance resolve by lower request id, pickups before dropoffs.
    """
    load = sum(it.party_size for it in items if it.pickup is None)
    # (request_id, kind, location, party); dropoffs locked until their pickup
    open_stops: list[tuple[int, str, Location, int]] = []
    locked: dict[int, tuple[int, str, Location, int]] = {}
    for it in items:
        if it.pickup is None:
            open_stops.append((it.request_id, DROPOFF, it.dropoff, it.party_size))
        else:
            open_stops.append((it.request_id, PICKUP, it.pickup, it.party_size))
            locked[it.request_id] = (it.request_id, DROPOFF, it.dropoff, it.party_size)

    pos = vehicle.location
    t = now
    total = 0
    stops: list[Stop] = []
    while open_stops:
        best = None
        best_key = None
        for s in open_stops:
            rid, kind, loc, party = s
            if kind == PICKUP and load + party > vehicle.capacity:
                continue
            key = (distance(pos, loc, config.metric), rid, 0 if kind == PICKUP else 1)
            if best_key is None or key < best_key:
                best = s
                best_key = key
        if best is None:
            raise PlanError("no eligible stop: capacity cannot be respected")
        rid, kind, loc, party = best
        leg = travel_time(pos, loc, config)
        t += leg
        total += leg
        stops.append(Stop(rid, kind, loc, t))
        open_stops.remove(best)
        if kind == PICKUP:
            load += party
            open_stops.append(locked.pop(rid))
        else:
            load -= party
        pos = loc
    return RoutePlan(stops, total)


def retime_plan(vehicle: Vehicle, config: BatchConfig, now: int = 0) -> RoutePlan:
    """Recompute ETAs along the committed stop order from the vehicle's location."""
    pos = vehicle.location
    t = now
    total = 0
    stops = []
    for stop in vehicle.route_plan.stops:
        leg = travel_time(pos, stop.location, config)
        t += leg
        total += leg
        stops.append(Stop(stop.request_id, stop.kind, stop.location, t))
        pos = stop.location
    return RoutePlan(stops, total)


def insertion_cost(
    vehicle: Vehicle,
    request: Request,
    requests_by_id: dict[int, Request],
    config: BatchConfig,
    now: int = 0,
) -> tuple[int, RoutePlan]:
    """Extra travel seconds to fold the request into the vehicle's plan.

    Returns (cost, candidate plan); the candidate reorders all outstanding
    stops, so the cost can be negative when a better ordering is found.
    """
    base_total = retime_plan(vehicle, config, now).total_duration
    items = vehicle_demands(vehicle, requests_by_id)
    items.append(PlanItem(request.id, request.party_size, request.origin, request.destination))
    plan = plan_route(vehicle, items, config, now)
    return plan.total_duration - base_total, plan


def max_delay(plan: RoutePlan, requests_by_id: dict[int, Request]) -> int:
    """Worst per-rider delay over every dropoff in the plan, floored at 0 per rider."""
    worst = 0
    for stop in plan.stops:
        if stop.kind != DROPOFF:
            continue
        req = requests_by_id[stop.request_id]
        delay = (stop.eta - req.submit_time) - req.direct_travel_time
        worst = max(worst, delay)
    return worst


def blended_cost(t: float, w: float, lam: float) -> float:
    """Convex combination lam*t + (1-lam)*w of operator and rider costs."""
    return lam * t + (1.0 - lam) * w


def edge_feasible(
    vehicle: Vehicle,
    request: Request,
    plan: RoutePlan,
    config: BatchConfig,
    requests_by_id: dict[int, Request],
) -> bool:
    """Seat, pickup-deadline, and delay-budget checks on a candidate plan (inclusive bounds)."""
    if request.party_size > vehicle.seats_available:
        return False
    for stop in plan.stops:
        req = requests_by_id[stop.request_id]
        if stop.kind == PICKUP:
            if stop.eta > req.pickup_deadline:
                return False
        else:
            delay = (stop.eta - req.submit_time) - req.direct_travel_time
            if delay > req.travel_delay_budget:
                return False
    return True
