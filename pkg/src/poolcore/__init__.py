"""Shared-fleet dispatch: batched LP assignment, greedy baseline, desk-scale simulator."""

from .core import (
    BatchConfig,
    Location,
    Request,
    RoutePlan,
    Stop,
    Vehicle,
    travel_delay_budget,
)
from .geometry import SpatialIndex, nearest_vehicles, travel_time
from .routing import (
    CandidateEdge,
    blended_cost,
    edge_feasible,
    insertion_cost,
    max_delay,
    plan_route,
)
from .lpsolve import LpProblem, LpSolution, build_lp, build_relaxed_lp, compute_big_m, solve
from .assign import (
    CandidateGraph,
    Matching,
    build_candidate_graph,
    greedy_assign,
    greedy_delay_check,
    ia_assign,
    reduce_graph,
)
from .sim import MetricsReport, Scenario, generate_demand, run, standard_scenario, step

__version__ = "0.1.0"
