"""Discrete-time fleet simulator: synthetic demand, vehicle motion, dispatch, metrics.

Vehicles travel in straight lines between stops; each leg lasts exactly
travel_time() seconds so realized pickup/dropoff instants coincide with
the planned ETAs. All event times are integer seconds, which makes every
metric except measured CPU time bit-reproducible for a fixed scenario
and seed.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .assign import (
    build_candidate_graph,
    greedy_assign,
    greedy_delay_check,
    ia_assign,
)
from .core import (
    ASSIGNED,
    DROPOFF,
    EXPIRED,
    PENDING,
    PICKUP,
    SERVED,
    BatchConfig,
    Location,
    Request,
    Vehicle,
    travel_delay_budget,
)
from .geometry import SpatialIndex, travel_time

STRATEGY_IA = "ia"
STRATEGY_GREEDY = "greedy"

# capped follow-through after the horizon so onboard riders reach their stops
_DRAIN_LIMIT = 6 * 3600

_METRIC_FIELDS = [
    "served_pct",
    "vht",
    "travel_per_request",
    "journey_time",
    "wait_time",
    "cpu_per_batch",
    "requests_total",
    "requests_served",
]


@dataclass
class Scenario:
    fleet_size: int = 100
    horizon: int = 24 * 3600
    area: tuple[float, float, float, float] = (0.0, 0.0, 12000.0, 12000.0)
    demand_profile: list[float] = field(default_factory=lambda: [50.0] * 24)
    rng_seed: int = 7
    strategy: str = STRATEGY_IA
    batch_config: BatchConfig = field(default_factory=BatchConfig)
    vehicle_capacity: int = 4
    party_weights: tuple[float, ...] = (0.85, 0.09, 0.04, 0.02)
    time_step: int = 2

    def validate(self) -> None:
        self.batch_config.validate()
        if self.fleet_size < 1:
            raise ValueError("fleet_size must be >= 1")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        xmin, ymin, xmax, ymax = self.area
        if not (xmax > xmin and ymax > ymin):
            raise ValueError("area must be a non-empty bounding box")
        if any(rate < 0 for rate in self.demand_profile):
            raise ValueError("demand rates must be non-negative")
        hours = math.ceil(self.horizon / 3600)
        if len(self.demand_profile) < hours:
            raise ValueError(f"demand_profile needs {hours} hourly rates")
        if self.strategy not in (STRATEGY_IA, STRATEGY_GREEDY):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.vehicle_capacity < 1:
            raise ValueError("vehicle_capacity must be >= 1")
        if abs(sum(self.party_weights) - 1.0) > 1e-9 or min(self.party_weights) < 0:
            raise ValueError("party_weights must be a probability vector")
        if self.time_step <= 0:
            raise ValueError("time_step must be positive")
        if self.batch_config.batch_period % self.time_step != 0:
            raise ValueError("batch_period must be a multiple of time_step")


@dataclass
class MetricsReport:
    served_pct: float = 0.0
    vht: float = 0.0  # fleet vehicle-hours traveled
    travel_per_request: float = 0.0  # minutes of fleet travel per served request
    journey_time: float = 0.0  # mean minutes submit -> dropoff
    wait_time: float = 0.0  # mean minutes submit -> pickup
    avg_occupancy_series: list[float] = field(default_factory=list)  # riders per moving vehicle
    time_spent_series: list[float] = field(default_factory=list)  # vehicle-hours per hour
    cpu_per_batch: float = 0.0  # mean wall seconds per batch (0 when not measured)
    requests_total: int = 0
    requests_served: int = 0

    def weighted_occupancy(self) -> float:
        """Time-weighted mean riders per moving vehicle over the whole run."""
        total_time = sum(self.time_spent_series)
        if total_time == 0:
            return 0.0
        rider_hours = sum(o * t for o, t in zip(self.avg_occupancy_series,
                                                self.time_spent_series))
        return rider_hours / total_time


def make_request(rid: int, submit_time: int, origin: Location, destination: Location,
                 party_size: int, config: BatchConfig) -> Request:
    """Request with derived fields computed under the scenario travel model."""
    if party_size < 1:
        raise ValueError("party_size must be >= 1")
    if submit_time < 0:
        raise ValueError("submit_time must be non-negative")
    direct = travel_time(origin, destination, config)
    return Request(
        id=rid,
        submit_time=submit_time,
        origin=origin,
        destination=destination,
        party_size=party_size,
        direct_travel_time=direct,
        pickup_deadline=submit_time + config.max_pickup_delay,
        travel_delay_budget=travel_delay_budget(direct, config),
    )


def generate_demand(scenario: Scenario) -> list[Request]:
    """Poisson arrivals per hourly rate, uniform endpoints, seeded and reproducible."""
    rng = np.random.default_rng([scenario.rng_seed, 1])
    xmin, ymin, xmax, ymax = scenario.area
    sizes = np.arange(1, len(scenario.party_weights) + 1)
    raw: list[tuple[int, float, float, float, float, int]] = []
    remaining = scenario.horizon
    for hour, rate in enumerate(scenario.demand_profile):
        if remaining <= 0:
            break
        span = min(3600, remaining)
        remaining -= span
        n = int(rng.poisson(rate * span / 3600.0))
        if n == 0:
            continue
        times = hour * 3600 + np.sort(rng.uniform(0.0, span, n))
        ox = rng.uniform(xmin, xmax, n)
        oy = rng.uniform(ymin, ymax, n)
        dx = rng.uniform(xmin, xmax, n)
        dy = rng.uniform(ymin, ymax, n)
        parties = rng.choice(sizes, size=n, p=scenario.party_weights)
        for i in range(n):
            raw.append((int(times[i]), ox[i], oy[i], dx[i], dy[i], int(parties[i])))
    raw.sort(key=lambda t: t[0])
    requests = []
    for rid, (t, ox, oy, dx, dy, party) in enumerate(raw):
        requests.append(make_request(rid, t, Location(ox, oy), Location(dx, dy),
                                     party, scenario.batch_config))
    return requests


def _make_fleet(scenario: Scenario) -> list[Vehicle]:
    rng = np.random.default_rng([scenario.rng_seed, 2])
    xmin, ymin, xmax, ymax = scenario.area
    xs = rng.uniform(xmin, xmax, scenario.fleet_size)
    ys = rng.uniform(ymin, ymax, scenario.fleet_size)
    return [Vehicle(i, scenario.vehicle_capacity, Location(xs[i], ys[i]))
            for i in range(scenario.fleet_size)]


class World:
    """Mutable simulation state advanced by step()."""

    def __init__(self, scenario: Scenario, requests: list[Request] | None = None,
                 fleet: list[Vehicle] | None = None, measure_cpu: bool = True):
        scenario.validate()
        self.scenario = scenario
        self.config = scenario.batch_config
        self.clock = 0
        self.fleet = fleet if fleet is not None else _make_fleet(scenario)
        if requests is None:
            requests = generate_demand(scenario)
        self.requests = sorted(requests, key=lambda r: (r.submit_time, r.id))
        self.registry = {r.id: r for r in self.requests}
        self._fleet_by_id = {v.id: v for v in self.fleet}
        self.pending: list[Request] = []
        self._release_idx = 0
        self.motion_seconds: dict[int, int] = {}  # hour -> moving vehicle-seconds
        self.rider_seconds: dict[int, int] = {}  # hour -> onboard rider-seconds
        self.batch_times: list[float] = []
        self.measure_cpu = measure_cpu

    # ---- vehicle motion -------------------------------------------------

    def _reset_leg(self, vehicle: Vehicle) -> None:
        vehicle.leg_start = None
        vehicle.leg_total = 0
        vehicle.leg_elapsed = 0

    def _onboard_party(self, vehicle: Vehicle) -> int:
        return sum(self.registry[rid].party_size for rid, _ in vehicle.onboard)

    def _advance(self, vehicle: Vehicle, dt: int) -> None:
        budget = dt
        consumed = 0
        while budget > 0 and vehicle.route_plan.stops:
            target = vehicle.route_plan.stops[0]
            if vehicle.leg_start is None:
                vehicle.leg_start = vehicle.location
                vehicle.leg_total = travel_time(vehicle.location, target.location,
                                                self.config)
                vehicle.leg_elapsed = 0
            remaining = vehicle.leg_total - vehicle.leg_elapsed
            use = min(budget, remaining)
            if use > 0:
                hour = (self.clock + consumed) // 3600
                self.motion_seconds[hour] = self.motion_seconds.get(hour, 0) + use
                self.rider_seconds[hour] = (self.rider_seconds.get(hour, 0)
                                            + use * self._onboard_party(vehicle))
                vehicle.leg_elapsed += use
                budget -= use
                consumed += use
            if vehicle.leg_elapsed >= vehicle.leg_total:
                vehicle.location = target.location
                vehicle.route_plan.stops.pop(0)
                self._reset_leg(vehicle)
                self._process_stop(vehicle, target, self.clock + consumed)
            else:
                frac = vehicle.leg_elapsed / vehicle.leg_total
                vehicle.location = Location(
                    vehicle.leg_start.x + frac * (target.location.x - vehicle.leg_start.x),
                    vehicle.leg_start.y + frac * (target.location.y - vehicle.leg_start.y),
                )

    def _process_stop(self, vehicle: Vehicle, stop, when: int) -> None:
        request = self.registry[stop.request_id]
        if stop.kind == PICKUP:
            vehicle.onboard.append((request.id, when))
            request.pickup_time = when
            if self._onboard_party(vehicle) > vehicle.capacity:
                raise RuntimeError(f"vehicle {vehicle.id} over capacity at t={when}")
        else:
            vehicle.onboard = [(rid, t) for rid, t in vehicle.onboard
                               if rid != request.id]
            vehicle.seats_available += request.party_size
            if vehicle.seats_available > vehicle.capacity:
                raise RuntimeError(f"vehicle {vehicle.id} released ghost seats at t={when}")
            request.dropoff_time = when
            request.state = SERVED
        if self.scenario.strategy == STRATEGY_GREEDY:
            greedy_delay_check(vehicle, when, self.config, self.registry)

    # ---- request flow ----------------------------------------------------

    def _release_requests(self) -> None:
        while (self._release_idx < len(self.requests)
               and self.requests[self._release_idx].submit_time <= self.clock):
            self.pending.append(self.requests[self._release_idx])
            self._release_idx += 1

    def _expire_overdue(self) -> None:
        keep = []
        for request in self.pending:
            if self.clock > request.pickup_deadline:
                request.state = EXPIRED
            else:
                keep.append(request)
        self.pending = keep

    def _dispatch_greedy(self) -> None:
        if not self.pending:
            return
        self._expire_overdue()
        if not self.pending:
            return
        index = SpatialIndex(self.fleet, self.config)
        still_pending = []
        for request in sorted(self.pending, key=lambda r: (r.submit_time, r.id)):
            vid = greedy_assign(request, self.fleet, index, self.config,
                                self.clock, self.registry)
            if vid is None:
                still_pending.append(request)
            else:
                request.state = ASSIGNED
                request.assigned_vehicle = vid
                self._reset_leg(self._fleet_by_id[vid])
        self.pending = still_pending

    def _run_batch(self) -> None:
        start = time.perf_counter() if self.measure_cpu else 0.0
        self._expire_overdue()
        if self.pending:
            index = SpatialIndex(self.fleet, self.config)
            graph, excluded = build_candidate_graph(
                self.pending, self.fleet, index, self.config, self.clock, self.registry)
            result = ia_assign(graph, self.config, self.clock)
            for vid in sorted(result.plans):
                vehicle = self._fleet_by_id[vid]
                vehicle.route_plan = result.plans[vid]
                vehicle.seats_available = result.seats[vid]
                self._reset_leg(vehicle)
            assigned = set()
            for rid, vid in sorted(result.matching.pairs):
                request = self.registry[rid]
                request.state = ASSIGNED
                request.assigned_vehicle = vid
                assigned.add(rid)
            leftovers = [r for r in self.pending if r.id not in assigned]
            self.pending = []
            for request in leftovers:
                if self.clock + self.config.batch_period <= request.pickup_deadline:
                    self.pending.append(request)
                else:
                    request.state = EXPIRED
        if self.measure_cpu:
            self.batch_times.append(time.perf_counter() - start)

    def active(self) -> bool:
        return any(v.route_plan.stops for v in self.fleet)


def step(world: World, dt: int | None = None) -> World:
    """Advance the world one time step: move vehicles, then release new requests."""
    if dt is None:
        dt = world.scenario.time_step
    if dt <= 0:
        raise ValueError("dt must be positive")
    for vehicle in world.fleet:
        if vehicle.route_plan.stops:
            world._advance(vehicle, dt)
    world.clock += dt
    world._release_requests()
    return world


def run(scenario: Scenario, requests: list[Request] | None = None,
        measure_cpu: bool = True) -> MetricsReport:
    """Simulate the full horizon and aggregate metrics.

    Batched mode dispatches at each batch boundary; greedy mode dispatches
    each request the step it appears (re-trying while its deadline allows).
    After the horizon, vehicles finish their committed stops so every
    request reaches a terminal state.
    """
    world = World(scenario, requests=requests, measure_cpu=measure_cpu)
    dt = scenario.time_step
    period = scenario.batch_config.batch_period
    greedy = scenario.strategy == STRATEGY_GREEDY
    while world.clock < scenario.horizon:
        step(world, dt)
        if greedy:
            world._dispatch_greedy()
        elif world.clock % period == 0:
            world._run_batch()
    for request in world.pending:
        request.state = EXPIRED
    world.pending = []
    drain_end = world.clock + _DRAIN_LIMIT
    while world.active() and world.clock < drain_end:
        step(world, dt)
    if world.active():
        raise RuntimeError("drain limit reached with stops outstanding")
    return _collect_metrics(world)


def _collect_metrics(world: World) -> MetricsReport:
    requests = world.requests
    served = [r for r in requests if r.state == SERVED]
    for r in requests:
        if r.state not in (SERVED, EXPIRED):
            raise RuntimeError(f"request {r.id} finished in state {r.state}")
    total_motion = sum(world.motion_seconds.values())
    vht = total_motion / 3600.0
    n_hours = max([h + 1 for h in world.motion_seconds] or [0])
    occupancy = []
    spent = []
    for h in range(n_hours):
        motion = world.motion_seconds.get(h, 0)
        riders = world.rider_seconds.get(h, 0)
        occupancy.append(riders / motion if motion else 0.0)
        spent.append(motion / 3600.0)
    waits = [r.pickup_time - r.submit_time for r in served]
    journeys = [r.dropoff_time - r.submit_time for r in served]
    return MetricsReport(
        served_pct=100.0 * len(served) / len(requests) if requests else 0.0,
        vht=vht,
        travel_per_request=vht * 60.0 / len(served) if served else 0.0,
        journey_time=sum(journeys) / len(journeys) / 60.0 if journeys else 0.0,
        wait_time=sum(waits) / len(waits) / 60.0 if waits else 0.0,
        avg_occupancy_series=occupancy,
        time_spent_series=spent,
        cpu_per_batch=(sum(world.batch_times) / len(world.batch_times)
                       if world.batch_times else 0.0),
        requests_total=len(requests),
        requests_served=len(served),
    )


# ---- CSV interchange ----------------------------------------------------


def write_report_csv(report: MetricsReport, metrics_path, series_path=None) -> None:
    """One metrics row (repr-formatted floats round-trip exactly) plus optional series."""
    with open(metrics_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_METRIC_FIELDS)
        writer.writerow([repr(getattr(report, f)) if isinstance(getattr(report, f), float)
                         else getattr(report, f) for f in _METRIC_FIELDS])
    if series_path is not None:
        with open(series_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["hour", "avg_occupancy", "vehicle_hours"])
            for h, (occ, spent) in enumerate(zip(report.avg_occupancy_series,
                                                 report.time_spent_series)):
                writer.writerow([h, repr(occ), repr(spent)])


def read_report_csv(metrics_path, series_path=None) -> MetricsReport:
    with open(metrics_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    row = rows[0]
    report = MetricsReport(
        served_pct=float(row["served_pct"]),
        vht=float(row["vht"]),
        travel_per_request=float(row["travel_per_request"]),
        journey_time=float(row["journey_time"]),
        wait_time=float(row["wait_time"]),
        cpu_per_batch=float(row["cpu_per_batch"]),
        requests_total=int(row["requests_total"]),
        requests_served=int(row["requests_served"]),
    )
    if series_path is not None:
        with open(series_path, newline="") as fh:
            for row in csv.DictReader(fh):
                report.avg_occupancy_series.append(float(row["avg_occupancy"]))
                report.time_spent_series.append(float(row["vehicle_hours"]))
    return report


def load_requests_csv(path, config: BatchConfig) -> list[Request]:
    """Replay demand: columns id, submit_time_s, ox_m, oy_m, dx_m, dy_m, party."""
    requests = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            requests.append(make_request(
                int(row["id"]),
                int(row["submit_time_s"]),
                Location(float(row["ox_m"]), float(row["oy_m"])),
                Location(float(row["dx_m"]), float(row["dy_m"])),
                int(row["party"]),
                config,
            ))
    requests.sort(key=lambda r: (r.submit_time, r.id))
    return requests


# a morning/evening double peak summing to roughly 5000 requests over 24 h
_STANDARD_PROFILE = [
    40, 25, 20, 20, 35, 90, 200, 330, 380, 320, 260, 245,
    250, 255, 265, 300, 350, 390, 360, 280, 210, 150, 105, 70,
]


def standard_scenario(strategy: str = STRATEGY_IA, **overrides) -> Scenario:
    """Fixed-seed synthetic scenario: ~5000 requests, 100 vehicles, 24 hours."""
    scenario = Scenario(
        fleet_size=100,
        horizon=24 * 3600,
        area=(0.0, 0.0, 12000.0, 12000.0),
        demand_profile=[float(r) for r in _STANDARD_PROFILE],
        rng_seed=7,
        strategy=strategy,
        batch_config=BatchConfig(),
    )
    return replace(scenario, **overrides) if overrides else scenario
