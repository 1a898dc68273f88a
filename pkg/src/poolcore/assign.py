"""Batch assignment: candidate graph, iterative LP assignment, greedy dispatch."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import NamedTuple

from .core import PICKUP, BatchConfig, Request, RoutePlan, Vehicle, round_half_up
from .geometry import SpatialIndex, direction_angle_deg, distance
from .lpsolve import (
    INFEASIBLE,
    INTEGRALITY_TOL,
    build_lp,
    build_relaxed_lp,
    compute_big_m,
    solve,
)
from .routing import (
    CandidateEdge,
    PlanItem,
    blended_cost,
    edge_feasible,
    insertion_cost,
    max_delay,
    plan_route,
    retime_plan,
    vehicle_demands,
)


@dataclass
class CandidateGraph:
    """Bipartite request-vehicle graph with per-edge costs and candidate plans.

    Vehicles are working copies whose seats and plans mutate as requests
    commit; registry maps every referenced request id (including riders
    already onboard) to its Request.
    """

    requests: dict[int, Request] = field(default_factory=dict)
    vehicles: dict[int, Vehicle] = field(default_factory=dict)
    edges: dict[tuple[int, int], CandidateEdge] = field(default_factory=dict)
    req_adj: dict[int, set[int]] = field(default_factory=dict)
    veh_adj: dict[int, set[int]] = field(default_factory=dict)
    registry: dict[int, Request] = field(default_factory=dict)

    def degree_request(self, rid: int) -> int:
        return len(self.req_adj.get(rid, ()))

    def degree_vehicle(self, vid: int) -> int:
        return len(self.veh_adj.get(vid, ()))

    def add_edge(self, edge: CandidateEdge) -> None:
        self.edges[(edge.request_id, edge.vehicle_id)] = edge
        self.req_adj.setdefault(edge.request_id, set()).add(edge.vehicle_id)
        self.veh_adj.setdefault(edge.vehicle_id, set()).add(edge.request_id)

    def remove_edge(self, rid: int, vid: int) -> None:
        del self.edges[(rid, vid)]
        self.req_adj[rid].discard(vid)
        self.veh_adj[vid].discard(rid)

    def remove_request(self, rid: int) -> None:
        for vid in sorted(self.req_adj.get(rid, set())):
            del self.edges[(rid, vid)]
            self.veh_adj[vid].discard(rid)
        self.req_adj.pop(rid, None)
        self.requests.pop(rid, None)

    def prune_isolated(self) -> None:
        for rid in [r for r in self.requests if self.degree_request(r) == 0]:
            self.remove_request(rid)
        for vid in [v for v in self.vehicles if self.degree_vehicle(v) == 0]:
            self.veh_adj.pop(vid, None)
            self.vehicles.pop(vid, None)


@dataclass
class Matching:
    pairs: set[tuple[int, int]] = field(default_factory=set)

    def request_ids(self) -> set[int]:
        return {r for r, _ in self.pairs}


class IaResult(NamedTuple):
    matching: Matching
    unassigned: list[int]
    plans: dict[int, RoutePlan]  # committed plan per assigned vehicle
    seats: dict[int, int]  # remaining seats per assigned vehicle
    iterations: int


def evaluate_edge(
    vehicle: Vehicle,
    request: Request,
    registry: dict[int, Request],
    config: BatchConfig,
    now: int,
) -> CandidateEdge | None:
    """Candidate edge for (request, vehicle), or None when infeasible."""
    t_cost, plan = insertion_cost(vehicle, request, registry, config, now)
    if not edge_feasible(vehicle, request, plan, config, registry):
        return None
    w = max_delay(plan, registry)
    return CandidateEdge(
        request_id=request.id,
        vehicle_id=vehicle.id,
        insertion_cost=t_cost,
        max_delay_cost=w,
        blended_cost=blended_cost(t_cost, w, config.lam),
        candidate_plan=plan,
    )


def build_candidate_graph(
    pending: list[Request],
    fleet: list[Vehicle],
    index: SpatialIndex,
    config: BatchConfig,
    now: int,
    registry: dict[int, Request],
) -> tuple[CandidateGraph, list[Request]]:
    """Edges from each request to its nearest seat-feasible vehicles.

    Requests whose every candidate edge fails the feasibility checks are
    returned separately instead of entering the graph.
    """
    graph = CandidateGraph(registry=registry)
    excluded: list[Request] = []
    n_cand = config.effective_candidates(len(fleet))
    working: dict[int, Vehicle] = {}
    for request in sorted(pending, key=lambda r: r.id):
        candidates = index.nearest(
            request.origin, n_cand,
            predicate=lambda v, q=request.party_size: v.seats_available >= q,
        )
        found = False
        for veh in candidates:
            work = working.get(veh.id)
            if work is None:
                work = copy.deepcopy(veh)
                working[veh.id] = work
            edge = evaluate_edge(work, request, registry, config, now)
            if edge is None:
                continue
            if not found:
                graph.requests[request.id] = request
                found = True
            graph.vehicles.setdefault(veh.id, work)
            graph.add_edge(edge)
        if not found:
            excluded.append(request)
    graph.prune_isolated()
    return graph, excluded


def _commit(graph: CandidateGraph, matching: Matching, committed: dict[int, Vehicle],
            rid: int, vid: int) -> None:
    """Record an assignment and update the vehicle's working seats and plan."""
    edge = graph.edges[(rid, vid)]
    vehicle = graph.vehicles[vid]
    request = graph.requests[rid]
    matching.pairs.add((rid, vid))
    vehicle.seats_available -= request.party_size
    vehicle.route_plan = edge.candidate_plan
    committed[vid] = vehicle
    graph.remove_request(rid)


def _recompute_vehicle_edges(graph: CandidateGraph, vid: int, config: BatchConfig,
                             now: int) -> None:
    vehicle = graph.vehicles[vid]
    for rid in sorted(graph.veh_adj.get(vid, set())):
        edge = evaluate_edge(vehicle, graph.requests[rid], graph.registry, config, now)
        if edge is None:
            graph.remove_edge(rid, vid)
        else:
            graph.edges[(rid, vid)] = edge


def reduce_graph(
    graph: CandidateGraph,
    matching: Matching,
    config: BatchConfig,
    now: int = 0,
    committed: dict[int, Vehicle] | None = None,
) -> tuple[CandidateGraph, Matching]:
    """Greedily place multi-party requests so only unit parties remain.

    Requests with party size >= 2 are assigned in decreasing party order
    (ties to the lower id) to their cheapest feasible vehicle; surviving
    edges on each touched vehicle are re-tested and re-costed immediately.
    """
    if committed is None:
        committed = {}
    multi = sorted(
        (r for r in graph.requests.values() if r.party_size >= 2),
        key=lambda r: (-r.party_size, r.id),
    )
    for request in multi:
        incident = sorted(graph.req_adj.get(request.id, set()))
        if not incident:
            graph.remove_request(request.id)
            continue
        vid = min(incident, key=lambda v: (graph.edges[(request.id, v)].blended_cost, v))
        _commit(graph, matching, committed, request.id, vid)
        _recompute_vehicle_edges(graph, vid, config, now)
    graph.prune_isolated()
    return graph, matching


def ia_assign(graph: CandidateGraph, config: BatchConfig, now: int = 0) -> IaResult:
    """Assign batched requests by iteratively solving assignment LP relaxations.

    Each iteration solves the LP over the surviving edges; when the batch
    cannot serve every remaining request the graph is first reduced to
    unit parties and an always-feasible maximization decides instead.
    Variables at 1 commit one (cheapest) request per vehicle, variables at
    0 delete their edges, and costs on touched vehicles are recomputed, so
    the graph strictly shrinks until no edges remain.
    """
    matching = Matching()
    committed: dict[int, Vehicle] = {}
    initial_ids = set(graph.requests)
    budget = len(graph.edges) + len(graph.requests) + len(graph.vehicles) + 1
    iterations = 0
    while graph.edges:
        iterations += 1
        if iterations > budget:
            raise RuntimeError("iterative assignment failed to terminate")
        problem = build_lp(graph)
        solution = solve(problem)
        if solution.status == INFEASIBLE:
            reduce_graph(graph, matching, config, now, committed)
            if not graph.edges:
                continue
            costs = {key: e.blended_cost for key, e in graph.edges.items()}
            big_m = compute_big_m(graph, costs, config.big_m_epsilon)
            problem = build_relaxed_lp(graph, costs, big_m)
            solution = solve(problem)

        values = solution.by_edge(problem)
        ones = [e for e, x in values.items() if abs(x - 1.0) <= INTEGRALITY_TOL]
        zeros = [e for e, x in values.items() if abs(x) <= INTEGRALITY_TOL]
        assigned_now: list[int] = []
        if ones:
            by_vehicle: dict[int, list[int]] = {}
            for rid, vid in ones:
                by_vehicle.setdefault(vid, []).append(rid)
            for vid in sorted(by_vehicle):
                rid = min(by_vehicle[vid],
                          key=lambda r: (graph.edges[(r, vid)].blended_cost, r))
                _commit(graph, matching, committed, rid, vid)
                assigned_now.append(vid)
        elif zeros:
            for rid, vid in zeros:
                graph.remove_edge(rid, vid)
        else:
            raise RuntimeError("vertex solution with no integral variable")
        for vid in sorted(assigned_now):
            _recompute_vehicle_edges(graph, vid, config, now)
        graph.prune_isolated()

    unassigned = sorted(initial_ids - matching.request_ids())
    plans = {vid: veh.route_plan for vid, veh in committed.items()}
    seats = {vid: veh.seats_available for vid, veh in committed.items()}
    return IaResult(matching, unassigned, plans, seats, iterations)


def _euclidean_pickups_ok(vehicle: Vehicle, plan: RoutePlan, config: BatchConfig,
                          registry: dict[int, Request], now: int) -> bool:
    """Straight-line pickup-time estimates against each rider's deadline."""
    pos = vehicle.location
    t = now
    for stop in plan.stops:
        t += round_half_up(distance(pos, stop.location) / config.speed)
        if stop.kind == PICKUP and t > registry[stop.request_id].pickup_deadline:
            return False
        pos = stop.location
    return True


def greedy_assign(
    request: Request,
    fleet: list[Vehicle],
    index: SpatialIndex,
    config: BatchConfig,
    now: int,
    registry: dict[int, Request],
) -> int | None:
    """Immediate nearest-first dispatch of one request; returns the vehicle id.

    Idle vehicles take the request outright. A busy vehicle qualifies when
    it has seats, its remaining direction of travel points within the angle
    threshold of the request's destination, and straight-line estimates put
    every pickup (existing and new) within its deadline. On success the
    vehicle's stops are reordered by the nearest-neighbor heuristic and the
    new plan is installed; None means every vehicle was excluded.
    """
    order = index.nearest(request.origin, max(1, len(fleet)),
                          predicate=lambda v: v.accepting)
    new_item = PlanItem(request.id, request.party_size, request.origin, request.destination)
    for vehicle in order:
        if vehicle.is_idle():
            plan = plan_route(vehicle, [new_item], config, now)
            vehicle.route_plan = plan
            vehicle.seats_available -= request.party_size
            return vehicle.id
        if vehicle.seats_available < request.party_size:
            continue
        final_dest = vehicle.route_plan.stops[-1].location
        angle = direction_angle_deg(vehicle.location, final_dest, request.destination)
        if angle > config.angle_threshold:
            continue
        items = vehicle_demands(vehicle, registry)
        items.append(new_item)
        plan = plan_route(vehicle, items, config, now)
        if not _euclidean_pickups_ok(vehicle, plan, config, registry, now):
            continue
        vehicle.route_plan = plan
        vehicle.seats_available -= request.party_size
        return vehicle.id
    return None


def greedy_delay_check(vehicle: Vehicle, now: int, config: BatchConfig,
                       registry: dict[int, Request]) -> None:
    """Stop a vehicle from accepting new requests once a rider nears its delay budget.

    Invoked after each pickup/dropoff; the flag resets only when the
    vehicle has dropped everyone off.
    """
    if vehicle.is_idle():
        vehicle.accepting = True
        return
    plan = retime_plan(vehicle, config, now)
    for stop in plan.stops:
        if stop.kind == PICKUP:
            continue
        req = registry[stop.request_id]
        delay = max(0, (stop.eta - req.submit_time) - req.direct_travel_time)
        if delay >= config.greedy_delay_ratio * req.travel_delay_budget:
            vehicle.accepting = False
            return
