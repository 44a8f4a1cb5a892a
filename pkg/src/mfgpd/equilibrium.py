"""Best responses, damped fixed-point iteration and multi-start equilibrium search."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .certify import ResidualReport, verify_ne
from .discretize import DiscreteProblem, discretize
from .dual import build_dual, unpack_dual
from .errors import LPSolverError
from .lp_core import GE, LinearProgram, solve_lp
from .measures import DualCertificate, MeanFieldFlow, OccupationMeasure, Policy, as_flow
from .metrics import max_flow_distance
from .occupation import build_primal, check_measure, marginals, occupation_cost, propagate, unpack_primal

log = logging.getLogger(__name__)

ROUTE_TOL = 1e-7
FACE_TOL = 1e-9


@dataclass(eq=False)
class BestResponse:
    occupation: OccupationMeasure
    certificate: DualCertificate
    primal_value: float
    dual_value: float
    problem: DiscreteProblem
    lp_iterations: int = 0


@dataclass(eq=False)
class EquilibriumCandidate:
    flow: MeanFieldFlow
    occupation: OccupationMeasure
    certificate: DualCertificate
    primal_value: float
    dual_value: float
    iterations: int
    converged: bool
    report: ResidualReport | None = None
    seed_index: int = 0
    history: list = field(default_factory=list)
    invariants: dict = field(default_factory=dict)

    @property
    def gap(self):
        return abs(self.primal_value - self.dual_value)

    def summary(self):
        return {
            "seed_index": self.seed_index,
            "primal_value": self.primal_value,
            "dual_value": self.dual_value,
            "iterations": self.iterations,
            "converged": self.converged,
            "residuals": self.report.to_dict() if self.report else None,
            "invariants": self.invariants,
        }


def _require_optimal(sol, what):
    if not sol.optimal:
        raise LPSolverError(f"{what} LP returned status {sol.status!r} for a valid flow")
    return sol


def _consistent_selection(lp: LinearProgram, y: np.ndarray, flow: np.ndarray, grid, method: str):
    """Among optimal occupations, one whose marginals are L1-closest to ``flow``.

    The optimal face is cut out exactly: with ``y`` dual optimal, a feasible
    occupation is optimal iff it vanishes on every column of positive reduced
    cost.  Auxiliary s[k, x] >= |marginal[k, x] - flow[k, x]| for k = 1..K.
    Returns None when the restricted problem is numerically infeasible.
    """
    K, N, J = grid.n_time, grid.n_nodes, grid.n_actions
    n = lp.shape[1]
    n_xi = K * N * J
    reduced = lp.c - lp.A.T @ y
    keep = np.flatnonzero(reduced <= FACE_TOL * (1 + np.max(np.abs(lp.c), initial=0.0)))
    # marginal operator on nodes 1..K: slab sums / dt, then nu
    rows = np.concatenate([np.repeat(np.arange((K - 1) * N), J), (K - 1) * N + np.arange(N)])
    cols = np.concatenate([N * J + np.arange((K - 1) * N * J), n_xi + np.arange(N)])
    vals = np.concatenate([np.full((K - 1) * N * J, 1.0 / grid.dt), np.ones(N)])
    M = sp.csr_matrix((vals, (rows, cols)), shape=(K * N, n))[:, keep]
    target = flow[1:].ravel()
    n_s = K * N
    I = sp.identity(n_s, format="csr")
    A = sp.vstack([
        sp.hstack([lp.A[:, keep], sp.csr_matrix((lp.shape[0], n_s))]),
        sp.hstack([-M, I]),
        sp.hstack([M, I]),
    ]).tocsr()
    b = np.concatenate([lp.b, -target, target])
    senses = np.concatenate([lp.senses, np.full(2 * n_s, GE, dtype=object)])
    c = np.concatenate([np.zeros(keep.size), np.ones(n_s)])
    sol = solve_lp(LinearProgram(c, A, b, senses, np.zeros(keep.size + n_s)), method=method)
    if not sol.optimal:
        log.warning("optimal-face selection failed (%s); keeping the solver vertex", sol.status)
        return None
    z = np.zeros(n)
    z[keep] = np.clip(sol.primal_values[: keep.size], 0.0, None)
    return z


def best_response(model, grid, flow, *, route="primal", selection="consistent", method="highs",
                  problem: DiscreteProblem | None = None) -> BestResponse:
    """Optimal occupation for a frozen flow together with a dual certificate.

    route:     ``"primal"`` reads psi from the primal LP multipliers, ``"dual"``
               solves the dual LP, ``"both"`` does both and checks they agree.
    selection: ``"vertex"`` keeps the solver's optimal vertex; ``"consistent"``
               re-selects, among optimal occupations, the one closest to ``flow``.
    """
    m = as_flow(flow).validate().m
    problem = problem or discretize(model, grid, m)
    rho = problem.rho
    iters = 0
    primal_lp = build_primal(model, grid, m, problem=problem)
    sol = _require_optimal(solve_lp(primal_lp, method=method), "primal")
    iters += sol.iterations
    z = sol.primal_values
    psi = unpack_dual(sol.dual_values, grid)
    if route in ("dual", "both"):
        dsol = _require_optimal(solve_lp(build_dual(model, grid, m, problem=problem), method=method), "dual")
        iters += dsol.iterations
        if route == "both":
            if abs(dsol.objective_value - sol.objective_value) > ROUTE_TOL * (1 + abs(sol.objective_value)):
                raise LPSolverError(
                    f"primal and dual routes disagree: {sol.objective_value!r} vs {dsol.objective_value!r}"
                )
        psi = unpack_dual(dsol.primal_values, grid)
    elif route != "primal":
        raise ValueError(f"unknown route {route!r}")
    if selection == "consistent":
        selected = _consistent_selection(primal_lp, sol.dual_values, m, grid, method)
        if selected is not None:
            z = selected
    elif selection != "vertex":
        raise ValueError(f"unknown selection {selection!r}")
    occ = unpack_primal(z, grid)
    return BestResponse(occ, psi, occupation_cost(problem, occ), float(rho @ psi.psi[0]), problem, iters)


def _renormalize(m):
    m = np.clip(m, 0.0, None)
    return m / m.sum(axis=1, keepdims=True)


def fixed_point_iterate(model, grid, flow0, damping=0.5, max_iter=200, tol=1e-8, *, selection="consistent",
                        route="primal", method="highs", certify_tol=1e-6) -> EquilibriumCandidate:
    """Damped Picard iteration flow <- (1 - damping) flow + damping * marginals(BR(flow)).

    Stops once the sup-norm change of the flow is at most ``tol``.  The returned
    candidate pairs the last flow with its best response and certificate.
    """
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    flow = _renormalize(as_flow(flow0).m.copy())
    history = []
    converged = False
    for it in range(1, max_iter + 1):
        br = best_response(model, grid, flow, route=route, selection=selection, method=method)
        new = marginals(br.occupation, grid, check=False).m
        change = damping * float(np.max(np.abs(new - flow)))
        history.append(change)
        log.debug("iteration %d: flow change %.3e, value %.10g", it, change, br.primal_value)
        if change <= tol:
            converged = True
            break
        if it < max_iter:
            flow = _renormalize((1 - damping) * flow + damping * new)
    report = verify_ne(model, grid, flow, br.occupation, br.certificate, tol=certify_tol, problem=br.problem)
    return EquilibriumCandidate(
        flow=MeanFieldFlow(flow),
        occupation=br.occupation,
        certificate=br.certificate,
        primal_value=br.primal_value,
        dual_value=br.dual_value,
        iterations=it,
        converged=converged,
        report=report,
        history=history,
        invariants=check_measure(br.occupation, br.problem, tol_mass=np.inf, tol_rho=np.inf),
    )


def random_initial_flow(model, grid, rng, concentration=0.5) -> MeanFieldFlow:
    """Marginals of a random stationary policy, coefficients frozen at a constant-rho flow."""
    rho = model.rho(grid)
    kernel = rng.dirichlet(np.full(grid.n_actions, concentration), size=grid.n_nodes)
    policy = Policy(np.broadcast_to(kernel, (grid.n_time,) + kernel.shape).copy(), np.zeros((grid.n_time, grid.n_nodes), bool))
    _, flow = propagate(model, grid, MeanFieldFlow.constant(rho, grid.n_time), policy)
    return flow


def restart_flows(model, grid, n_restarts, seed):
    children = np.random.SeedSequence(seed).spawn(n_restarts)
    return [random_initial_flow(model, grid, np.random.default_rng(c)) for c in children]


def find_equilibria(model, grid, n_restarts=5, seed=0, dedupe_eps=0.05, *, damping=0.5, max_iter=200, tol=1e-8,
                    selection="consistent", route="primal", method="highs", certify_tol=1e-6):
    """Run the fixed-point iteration from seeded random flows and keep distinct certified results.

    Two candidates are duplicates when their max-over-nodes W1 distance is at
    most ``dedupe_eps``; the earlier seed wins.  Output is sorted by primal value,
    then seed index.
    """
    if n_restarts < 1:
        raise ValueError("n_restarts must be >= 1")
    kept = []
    for i, flow0 in enumerate(restart_flows(model, grid, n_restarts, seed)):
        cand = fixed_point_iterate(model, grid, flow0, damping, max_iter, tol, selection=selection, route=route,
                                   method=method, certify_tol=certify_tol)
        cand.seed_index = i
        if not (cand.converged and cand.report.verdict):
            log.info("restart %d dropped: converged=%s verdict=%s", i, cand.converged, cand.report.verdict)
            continue
        if all(max_flow_distance(cand.flow, k.flow, grid) > dedupe_eps for k in kept):
            kept.append(cand)
    return sorted(kept, key=lambda c: (c.primal_value, c.seed_index))
