"""Assignment-relaxation LPs and a revised primal simplex returning vertex solutions.

Problems have one variable per request-vehicle edge, one row per request
(equality =1 or inequality <=1) and one capacity row per vehicle. The
solver is a two-phase revised simplex: phase 1 drives artificial
variables on the equality rows to zero (objective above 1e-7 means
infeasible), phase 2 optimizes the real objective. Pricing is Dantzig's
rule with first-index tie-breaking, falling back to Bland's rule after a
budget of non-improving pivots so cycling cannot occur. Every optimal
solution is basic, i.e. a vertex of the feasible polytope.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"

FEASIBILITY_TOL = 1e-7  # phase-1 objective and constraint-residual threshold
INTEGRALITY_TOL = 1e-6  # |x| or |x-1| below this counts as 0 or 1

_PIVOT_TOL = 1e-9
_BLAND_AFTER = 200  # non-improving pivots before switching to Bland's rule
_REFACTOR_EVERY = 150


@dataclass
class LpProblem:
    edges: list[tuple[int, int]]  # (request_id, vehicle_id) per variable
    costs: np.ndarray  # objective coefficients in the problem's own sense
    request_ids: list[int]
    vehicle_ids: list[int]
    edge_party: np.ndarray  # capacity-row coefficient per edge
    capacities: np.ndarray  # capacity-row right-hand side per vehicle
    equality_requests: bool  # True: sum over v of x_rv = 1; False: <= 1
    maximize: bool = False


@dataclass
class LpSolution:
    status: str
    values: np.ndarray | None  # per-edge, aligned with problem.edges
    objective: float
    is_vertex: bool

    def by_edge(self, problem: LpProblem) -> dict[tuple[int, int], float]:
        if self.values is None:
            return {}
        return dict(zip(problem.edges, self.values))


def make_assignment_lp(
    edges: list[tuple[int, int]],
    costs: dict[tuple[int, int], float],
    parties: dict[int, int],
    capacities: dict[int, int],
    *,
    equality_requests: bool = True,
    weighted_capacity: bool = True,
    maximize: bool = False,
) -> LpProblem:
    """Assemble an assignment LP from plain ids and per-edge costs."""
    if not edges:
        raise ValueError("empty edge set")
    edges = sorted(edges)
    request_ids = sorted({r for r, _ in edges})
    vehicle_ids = sorted({v for _, v in edges})
    cost_arr = np.array([float(costs[e]) for e in edges])
    if weighted_capacity:
        party_arr = np.array([float(parties[r]) for r, _ in edges])
    else:
        party_arr = np.ones(len(edges))
    cap_arr = np.array([float(capacities[v]) for v in vehicle_ids])
    return LpProblem(
        edges=edges,
        costs=cost_arr,
        request_ids=request_ids,
        vehicle_ids=vehicle_ids,
        edge_party=party_arr,
        capacities=cap_arr,
        equality_requests=equality_requests,
        maximize=maximize,
    )


def build_lp(graph, costs: dict[tuple[int, int], float] | None = None) -> LpProblem:
    """Minimization LP: every request served exactly once within seat capacities."""
    if not graph.edges:
        raise ValueError("empty edge set")
    if costs is None:
        costs = {key: edge.blended_cost for key, edge in graph.edges.items()}
    parties = {rid: req.party_size for rid, req in graph.requests.items()}
    capacities = {vid: veh.seats_available for vid, veh in graph.vehicles.items()}
    for rid, vid in graph.edges:
        if parties[rid] > capacities[vid]:
            raise ValueError(f"edge ({rid}, {vid}) exceeds vehicle capacity; prune first")
    return make_assignment_lp(
        list(graph.edges), costs, parties, capacities,
        equality_requests=True, weighted_capacity=True, maximize=False,
    )


def compute_big_m(graph, costs: dict[tuple[int, int], float] | None = None,
                  epsilon: float = 1.0) -> float:
    """Sum over requests of their largest incident edge cost, plus epsilon."""
    if not graph.edges:
        raise ValueError("empty edge set")
    if costs is None:
        costs = {key: edge.blended_cost for key, edge in graph.edges.items()}
    worst: dict[int, float] = {}
    for (rid, _), c in costs.items():
        worst[rid] = max(worst.get(rid, 0.0), c)
    return sum(worst.values()) + epsilon


def build_relaxed_lp(graph_u, costs: dict[tuple[int, int], float], M: float) -> LpProblem:
    """Always-feasible maximization of sum((M - cost) * x) over a unit-party graph."""
    if not graph_u.edges:
        raise ValueError("empty edge set")
    for rid, req in graph_u.requests.items():
        if req.party_size >= 2:
            raise ValueError(f"request {rid} has party size {req.party_size}; "
                             "the relaxed LP requires unit parties")
    gains = {e: M - costs[e] for e in graph_u.edges}
    parties = {rid: 1 for rid in graph_u.requests}
    capacities = {vid: veh.seats_available for vid, veh in graph_u.vehicles.items()}
    return make_assignment_lp(
        list(graph_u.edges), gains, parties, capacities,
        equality_requests=False, weighted_capacity=False, maximize=True,
    )


def solve(problem: LpProblem) -> LpSolution:
    """Optimal basic (vertex) solution, or status infeasible.

    Deterministic for a fixed problem: entering/leaving ties always resolve
    to the lowest index. Raises RuntimeError if the pivot budget is
    exhausted, which indicates a solver bug rather than a bad instance.
    """
    n_edges = len(problem.edges)
    n_req = len(problem.request_ids)
    n_veh = len(problem.vehicle_ids)
    m = n_req + n_veh

    req_row = {r: i for i, r in enumerate(problem.request_ids)}
    veh_row = {v: n_req + i for i, v in enumerate(problem.vehicle_ids)}

    # columns: edges, then slacks (vehicle rows always; request rows if inequality),
    # then artificials for equality request rows. Each column has <= 2 nonzeros.
    slack_rows = list(range(n_req, m)) if problem.equality_requests else list(range(m))
    art_rows = list(range(n_req)) if problem.equality_requests else []
    n_slack = len(slack_rows)
    n_art = len(art_rows)
    n_cols = n_edges + n_slack + n_art

    col_rows = np.zeros((n_cols, 2), dtype=np.intp)
    col_vals = np.zeros((n_cols, 2))
    for j, (r, v) in enumerate(problem.edges):
        col_rows[j] = (req_row[r], veh_row[v])
        col_vals[j] = (1.0, problem.edge_party[j])
    for i, row in enumerate(slack_rows):
        col_rows[n_edges + i, 0] = row
        col_vals[n_edges + i, 0] = 1.0
    for i, row in enumerate(art_rows):
        col_rows[n_edges + n_slack + i, 0] = row
        col_vals[n_edges + n_slack + i, 0] = 1.0

    b = np.concatenate([np.ones(n_req), problem.capacities])
    sense = -1.0 if problem.maximize else 1.0
    c_real = np.zeros(n_cols)
    c_real[:n_edges] = sense * problem.costs

    # initial basis: slacks on their rows, artificials on equality rows
    basis = np.empty(m, dtype=np.intp)
    for i, row in enumerate(slack_rows):
        basis[row] = n_edges + i
    for i, row in enumerate(art_rows):
        basis[row] = n_edges + n_slack + i
    binv = np.eye(m)
    d = b.copy()

    state = _SimplexState(col_rows, col_vals, b, basis, binv, d, n_edges + n_slack)

    if n_art:
        c_phase1 = np.zeros(n_cols)
        c_phase1[n_edges + n_slack:] = 1.0
        allowed = np.ones(n_cols, dtype=bool)
        _pivot_until_optimal(state, c_phase1, allowed, obj_floor=1e-12)
        if float(c_phase1[state.basis] @ state.d) > FEASIBILITY_TOL:
            return LpSolution(INFEASIBLE, None, float("nan"), False)
        _drive_out_artificials(state)

    allowed = np.ones(n_cols, dtype=bool)
    allowed[n_edges + n_slack:] = False  # artificials may not re-enter
    _pivot_until_optimal(state, c_real, allowed)

    x = np.zeros(n_cols)
    x[state.basis] = np.where(np.abs(state.d) < 1e-11, 0.0, state.d)
    values = x[:n_edges].copy()
    _verify(problem, values, col_rows, col_vals, b, n_edges, n_req)
    objective = float(problem.costs @ values)
    return LpSolution(OPTIMAL, values, objective, True)


class _SimplexState:
    def __init__(self, col_rows, col_vals, b, basis, binv, d, n_structural):
        self.col_rows = col_rows
        self.col_vals = col_vals
        self.b = b
        self.basis = basis
        self.binv = binv
        self.d = d
        self.n_structural = n_structural  # columns before the artificial block

    def column(self, j: int) -> np.ndarray:
        """B^-1 A_j built from the (at most two) nonzeros of column j."""
        u = self.col_vals[j, 0] * self.binv[:, self.col_rows[j, 0]]
        if self.col_vals[j, 1] != 0.0:
            u = u + self.col_vals[j, 1] * self.binv[:, self.col_rows[j, 1]]
        return u

    def refactor(self) -> None:
        m = len(self.b)
        B = np.zeros((m, m))
        rows = self.col_rows[self.basis]
        vals = self.col_vals[self.basis]
        for i in range(m):
            B[rows[i, 0], i] += vals[i, 0]
            B[rows[i, 1], i] += vals[i, 1]
        self.binv = np.linalg.inv(B)
        self.d = self.binv @ self.b
        np.clip(self.d, 0.0, None, out=self.d)

    def pivot(self, j: int, leave: int, u: np.ndarray) -> None:
        p = u[leave]
        self.binv[leave] /= p
        self.d[leave] /= p
        others = u.copy()
        others[leave] = 0.0
        self.binv -= np.outer(others, self.binv[leave])
        self.d -= others * self.d[leave]
        np.clip(self.d, 0.0, None, out=self.d)
        self.basis[leave] = j


def _pivot_until_optimal(state: _SimplexState, c: np.ndarray, allowed: np.ndarray,
                         obj_floor: float = -np.inf) -> None:
    col_rows = state.col_rows
    col_vals = state.col_vals
    pivot_cap = 5000 + 5 * (len(c) + len(state.b))
    bland = False
    non_improving = 0
    last_obj = np.inf
    for it in range(pivot_cap):
        if it and it % _REFACTOR_EVERY == 0:
            state.refactor()
        if float(c[state.basis] @ state.d) <= obj_floor:
            return
        y = state.binv.T @ c[state.basis]
        rc = c - (col_vals * y[col_rows]).sum(axis=1)
        eligible = allowed & (rc < -1e-9)
        eligible[state.basis] = False
        if not eligible.any():
            return
        if bland:
            j = int(np.flatnonzero(eligible)[0])
        else:
            rc_masked = np.where(eligible, rc, np.inf)
            j = int(np.argmin(rc_masked))
        u = state.column(j)
        pos = u > _PIVOT_TOL
        if not pos.any():
            raise RuntimeError("LP appears unbounded; malformed assignment problem")
        ratios = np.where(pos, state.d / np.where(pos, u, 1.0), np.inf)
        leave = int(np.argmin(ratios))
        state.pivot(j, leave, u)
        obj = float(c[state.basis] @ state.d)
        if obj < last_obj - 1e-9:
            non_improving = 0
            last_obj = obj
        else:
            non_improving += 1
            if non_improving > _BLAND_AFTER:
                bland = True
    raise RuntimeError("pivot budget exhausted; simplex failed to terminate")


def _drive_out_artificials(state: _SimplexState) -> None:
    """Swap zero-valued basic artificials for structural columns where possible.

    When no structural column has a nonzero entry in an artificial's row the
    row is redundant and the artificial stays basic at zero permanently.
    """
    for i in range(len(state.basis)):
        if state.basis[i] < state.n_structural:
            continue
        row = state.binv[i]
        entries = (state.col_vals * row[state.col_rows]).sum(axis=1)
        entries[state.basis] = 0.0
        entries[state.n_structural:] = 0.0
        candidates = np.flatnonzero(np.abs(entries) > 1e-7)
        if candidates.size == 0:
            continue
        j = int(candidates[0])
        u = state.column(j)
        state.pivot(j, i, u)


def _verify(problem, values, col_rows, col_vals, b, n_edges, n_req) -> None:
    m = len(b)
    ax = np.zeros(m)
    np.add.at(ax, col_rows[:n_edges, 0], col_vals[:n_edges, 0] * values)
    np.add.at(ax, col_rows[:n_edges, 1], col_vals[:n_edges, 1] * values)
    tol = FEASIBILITY_TOL
    if values.min(initial=0.0) < -tol:
        raise RuntimeError("solver returned a negative variable")
    if problem.equality_requests:
        if np.abs(ax[:n_req] - 1.0).max(initial=0.0) > tol:
            raise RuntimeError("request constraints violated beyond tolerance")
    else:
        if (ax[:n_req] - 1.0).max(initial=0.0) > tol:
            raise RuntimeError("request constraints violated beyond tolerance")
    if (ax[n_req:] - b[n_req:]).max(initial=0.0) > tol:
        raise RuntimeError("capacity constraints violated beyond tolerance")


def to_lp_text(problem: LpProblem) -> str:
    """Problem rendered in LP text interchange format for external cross-checks."""
    def var(e):
        return f"x_r{e[0]}_v{e[1]}"

    lines = ["Maximize" if problem.maximize else "Minimize"]
    terms = " + ".join(f"{problem.costs[j]:.17g} {var(e)}" for j, e in enumerate(problem.edges))
    lines.append(f" obj: {terms}")
    lines.append("Subject To")
    rel = "=" if problem.equality_requests else "<="
    for r in problem.request_ids:
        terms = " + ".join(var(e) for e in problem.edges if e[0] == r)
        lines.append(f" req_{r}: {terms} {rel} 1")
    for i, v in enumerate(problem.vehicle_ids):
        parts = []
        for j, e in enumerate(problem.edges):
            if e[1] == v:
                coef = problem.edge_party[j]
                parts.append(f"{coef:.17g} {var(e)}" if coef != 1.0 else var(e))
        lines.append(f" veh_{v}: {' + '.join(parts)} <= {problem.capacities[i]:.17g}")
    lines.append("End")
    return "\n".join(lines) + "\n"
