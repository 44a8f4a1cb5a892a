"""The dual LP: maximize rho . psi[0] over discrete Bellman subsolutions.

Feasibility of ``psi`` on the time nodes means

    psi[K, x] <= g(x, mu_K)
    (psi[k+1, x] - psi[k, x]) / dt + (Q_{k,j} psi[k+1])(x) + f(t_k, x, a_j, mu_k) >= 0

for every slab k, node x and action j.  Written as ``-A.T psi >= -c`` with
(A, c) from the primal builder, so the two LPs are an exact transpose pair with
identical row/column order: dual row r is primal column r.
"""

from __future__ import annotations

import numpy as np

from .discretize import DiscreteProblem
from .lp_core import GE, LinearProgram
from .measures import DualCertificate
from .occupation import _problem, primal_cost, primal_matrix, primal_rhs

FEAS_TOL = 1e-8


def build_dual(model, grid, flow, problem: DiscreteProblem | None = None) -> LinearProgram:
    problem = _problem(model, grid, flow, problem)
    A = primal_matrix(problem)
    m, n = A.shape
    return LinearProgram(
        primal_rhs(problem),
        -A.T,
        -primal_cost(problem),
        np.full(n, GE, dtype=object),
        np.full(m, -np.inf),
        maximize=True,
    )


def unpack_dual(y, grid) -> DualCertificate:
    return DualCertificate(np.asarray(y, dtype=float).reshape(grid.n_time + 1, grid.n_nodes).copy())


def expected_next(problem: DiscreteProblem, psi) -> np.ndarray:
    """(P_{k,j} psi[k+1])(x) with shape (K, J, N)."""
    kern = problem.kernel
    nxt = np.asarray(psi)[1:]  # (K, N)
    return kern.stay * nxt[:, None, :] + np.sum(kern.move * nxt[:, kern.targets][:, None], axis=-1)


def bellman_slack(problem: DiscreteProblem, psi) -> np.ndarray:
    """Slack of the running inequality per (slab, action, node); >= 0 iff feasible."""
    psi = np.asarray(psi)
    return (expected_next(problem, psi) - psi[:-1, None, :]) / problem.dt + problem.running_cost


def terminal_slack(problem: DiscreteProblem, psi) -> np.ndarray:
    return problem.terminal_cost - np.asarray(psi)[-1]


def check_dual_feasible(psi, model=None, grid=None, flow=None, problem: DiscreteProblem | None = None) -> float:
    """Largest violation over the terminal and Bellman inequalities (0 if feasible)."""
    problem = _problem(model, grid, flow, problem)
    psi = psi.psi if isinstance(psi, DualCertificate) else np.asarray(psi)
    return max(0.0, float(np.max(-terminal_slack(problem, psi))), float(np.max(-bellman_slack(problem, psi))))
