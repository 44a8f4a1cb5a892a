"""Classical coupled HJB-FP iteration on the same Markov chain.

Serves as an independent oracle for the LP pipeline when the discrete
Hamiltonian has a unique minimizer, and shows what goes wrong when it does not:
the argmin is a lowest-index selection and ties are flagged, so a zero-cost game
returns one equilibrium out of many.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .discretize import discretize
from .measures import MeanFieldFlow, Policy, as_flow
from .metrics import flow_distance
from .occupation import propagate

TIE_TOL = 1e-12
ZERO_MASS = 1e-14


@dataclass(eq=False)
class ValueFunction:
    V: np.ndarray  # (K+1, N)
    feedback: np.ndarray  # (K, N) action index
    minimizer_unique: np.ndarray  # (K, N)


def solve_hjb(model, grid, flow, problem=None) -> ValueFunction:
    """Backward recursion V[k] = min_j (f dt + P_{k,j} V[k+1]), V[K] = g."""
    problem = problem or discretize(model, grid, flow)
    kern = problem.kernel
    cost_dt = np.ascontiguousarray(problem.running_cost * problem.dt)
    V, arg, unique = kernels.bellman_backward(kern.stay, kern.move, kern.targets, cost_dt, problem.terminal_cost, TIE_TOL)
    return ValueFunction(V, arg, unique)


def solve_fp(model, grid, feedback, flow_for_coefficients, problem=None) -> MeanFieldFlow:
    """Forward propagation of rho under the feedback map."""
    policy = Policy.deterministic(feedback, grid.n_actions)
    _, flow = propagate(model, grid, flow_for_coefficients, policy, problem=problem)
    return flow


@dataclass(eq=False)
class HJBFPResult:
    flow: MeanFieldFlow
    value: ValueFunction
    value_at_rho: float
    converged: bool
    iterations: int
    tie_nodes_visited: int  # (slab, node) pairs with ties and positive mass
    zero_mass_nodes: int  # full-support diagnostic, never enforced
    history: list = field(default_factory=list)


def hjbfp_fixed_point(model, grid, damping=0.5, max_iter=200, tol=1e-8, flow0=None) -> HJBFPResult:
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    rho = model.rho(grid)
    flow = as_flow(flow0).m.copy() if flow0 is not None else MeanFieldFlow.constant(rho, grid.n_time).m
    history = []
    converged = False
    for it in range(1, max_iter + 1):
        problem = discretize(model, grid, flow)
        value = solve_hjb(model, grid, flow, problem=problem)
        new = solve_fp(model, grid, value.feedback, flow, problem=problem).m
        change = damping * float(np.max(np.abs(new - flow)))
        history.append(change)
        if change <= tol:
            converged = True
            break
        if it < max_iter:
            flow = (1 - damping) * flow + damping * new
    visited = flow[:-1] > ZERO_MASS
    return HJBFPResult(
        flow=MeanFieldFlow(flow),
        value=value,
        value_at_rho=float(rho @ value.V[0]),
        converged=converged,
        iterations=it,
        tie_nodes_visited=int(np.sum(~value.minimizer_unique & visited)),
        zero_mass_nodes=int(np.sum(flow <= ZERO_MASS)),
        history=history,
    )


@dataclass
class ComparisonReport:
    per_node_w1: np.ndarray
    max_w1: float
    value_gap: float

    def to_dict(self):
        return {"per_node_w1": self.per_node_w1.tolist(), "max_w1": self.max_w1, "value_gap": self.value_gap}


def compare(candidate, reference: HJBFPResult, grid) -> ComparisonReport:
    """Distances between an LP-pipeline candidate and an HJB-FP fixed point."""
    d = flow_distance(candidate.flow, reference.flow, grid)
    return ComparisonReport(d, float(d.max()), abs(candidate.primal_value - reference.value_at_rho))
