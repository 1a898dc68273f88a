"""Domain types and the travel-delay budget shared by all dispatch modules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

# request lifecycle states
PENDING = "pending"
ASSIGNED = "assigned"
EXPIRED = "expired"
SERVED = "served"

# stop kinds
PICKUP = "pickup"
DROPOFF = "dropoff"

# distance metrics
EUCLIDEAN = "euclidean"
MANHATTAN = "manhattan"


def round_half_up(seconds: float) -> int:
    """Round a non-negative duration to whole seconds, halves rounding up."""
    return int(math.floor(seconds + 0.5))


@dataclass(frozen=True)
class Location:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates ({self.x}, {self.y})")


@dataclass(frozen=True)
class Stop:
    request_id: int
    kind: str  # PICKUP or DROPOFF
    location: Location
    eta: int  # absolute seconds


@dataclass
class RoutePlan:
    """Ordered pickup/dropoff sequence with cumulative arrival times.

    Pickups precede their dropoffs and the running onboard load never
    exceeds vehicle capacity; total_duration is measured from the
    vehicle's location at planning time through the last stop.
    """

    stops: list[Stop] = field(default_factory=list)
    total_duration: int = 0

    def pickups(self) -> list[Stop]:
        return [s for s in self.stops if s.kind == PICKUP]

    def dropoffs(self) -> list[Stop]:
        return [s for s in self.stops if s.kind == DROPOFF]


@dataclass
class Request:
    id: int
    submit_time: int
    origin: Location
    destination: Location
    party_size: int
    direct_travel_time: int
    pickup_deadline: int
    travel_delay_budget: int
    state: str = PENDING
    assigned_vehicle: int | None = None
    pickup_time: int | None = None
    dropoff_time: int | None = None


@dataclass
class Vehicle:
    id: int
    capacity: int
    location: Location
    seats_available: int | None = None  # defaults to capacity
    route_plan: RoutePlan = field(default_factory=RoutePlan)
    accepting: bool = True
    onboard: list[tuple[int, int]] = field(default_factory=list)  # (request id, pickup time)
    # motion progress along the first leg of the plan (simulator runtime)
    leg_start: Location | None = None
    leg_total: int = 0
    leg_elapsed: int = 0

    def __post_init__(self):
        if self.seats_available is None:
            self.seats_available = self.capacity

    def is_idle(self) -> bool:
        return not self.route_plan.stops and not self.onboard


@dataclass
class BatchConfig:
    batch_period: int = 30
    candidates_per_request: int | None = None  # None resolves to 10% of the fleet
    lam: float = 0.5  # 1.0 weighs operator travel time, 0.0 weighs rider delay
    max_pickup_delay: int = 1800
    min_delay_floor: int = 1800
    delay_percent: float = 0.0
    metric: str = EUCLIDEAN
    speed: float = 10.0  # meters/second
    angle_threshold: float = 10.0  # degrees, greedy direction test
    big_m_epsilon: float = 1.0
    greedy_delay_ratio: float = 0.9  # fraction of the delay budget that stops greedy intake

    def validate(self) -> None:
        if self.batch_period <= 0:
            raise ValueError("batch_period must be positive")
        if self.candidates_per_request is not None and self.candidates_per_request < 1:
            raise ValueError("candidates_per_request must be >= 1")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if self.max_pickup_delay < 0:
            raise ValueError("max_pickup_delay must be non-negative")
        if self.min_delay_floor < 0:
            raise ValueError("min_delay_floor must be non-negative")
        if self.delay_percent < 0:
            raise ValueError("delay_percent must be non-negative")
        if self.metric not in (EUCLIDEAN, MANHATTAN):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.speed <= 0:
            raise ValueError("speed must be positive")
        if self.big_m_epsilon <= 0:
            raise ValueError("big_m_epsilon must be positive")
        if not 0.0 < self.greedy_delay_ratio <= 1.0:
            raise ValueError("greedy_delay_ratio must lie in (0, 1]")

    def effective_candidates(self, fleet_size: int) -> int:
        """Candidate vehicles per request; defaults to 10% of the fleet."""
        if self.candidates_per_request is not None:
            return self.candidates_per_request
        return max(1, round_half_up(0.10 * fleet_size))


def travel_delay_budget(direct_travel_time: int, config: BatchConfig) -> int:
    """Maximum tolerated journey delay: max(floor, direct time * percent)."""
    if direct_travel_time < 0:
        raise ValueError("direct_travel_time must be non-negative")
    scaled = round_half_up(direct_travel_time * config.delay_percent)
    return max(config.min_delay_floor, scaled)
