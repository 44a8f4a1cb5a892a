"""The occupation-measure LP for a frozen flow, and its conversions.

Variables are ``xi[k, x, j]`` (column ``(k*N + x)*J + j``) followed by
``nu[x]``.  Pairing the flow-balance identity with every node indicator
``1{(k, y)}`` gives one equality row per time node and state,

    k = 0:      sum_j xi[0, y, j] / dt                            = rho(y)
    0 < k < K:  sum_j xi[k, y, j] / dt - sum_{x,j} xi[k-1, x, j] P(x, y) / dt = 0
    k = K:      nu(y)              - sum_{x,j} xi[K-1, x, j] P(x, y) / dt = 0

with row index ``k*N + y``.  The multiplier of row ``(k, y)`` is the dual
certificate value ``psi[k, y]``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import kernels
from .discretize import DiscreteProblem, discretize
from .errors import InconsistentMeasureError
from .lp_core import EQ, LinearProgram
from .measures import MeanFieldFlow, OccupationMeasure, Policy, as_flow
from .model import GridSpec, MFGModel

MASS_TOL = 1e-10
ZERO_MASS = 1e-14


def _problem(model, grid, flow, problem):
    if problem is not None:
        return problem
    as_flow(flow).validate()
    return discretize(model, grid, flow)


def primal_matrix(problem: DiscreteProblem) -> sp.csr_matrix:
    kern = problem.kernel
    K, J, N = kern.stay.shape
    S = kern.targets.shape[1]
    dt = problem.dt
    n_xi = K * N * J
    k, x, j = np.meshgrid(np.arange(K), np.arange(N), np.arange(J), indexing="ij")
    col = ((k * N + x) * J + j).ravel()
    k, x, j = k.ravel(), x.ravel(), j.ravel()

    rows = [k * N + x, (k + 1) * N + x]
    cols = [col, col]
    vals = [np.full(n_xi, 1.0 / dt), -kern.stay[k, j, x] / dt]
    move = kern.move[k, j, x]  # (n_xi, S)
    nz = move != 0.0
    tgt = kern.targets[x][nz]
    rows.append((np.repeat(k, S).reshape(-1, S)[nz] + 1) * N + tgt)
    cols.append(np.repeat(col, S).reshape(-1, S)[nz])
    vals.append(-move[nz] / dt)
    rows.append(K * N + np.arange(N))
    cols.append(n_xi + np.arange(N))
    vals.append(np.ones(N))
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=((K + 1) * N, n_xi + N)
    )
    return A.tocsr()


def primal_rhs(problem: DiscreteProblem) -> np.ndarray:
    K = problem.kernel.stay.shape[0]
    N = problem.rho.shape[0]
    b = np.zeros((K + 1) * N)
    b[:N] = problem.rho
    return b


def primal_cost(problem: DiscreteProblem) -> np.ndarray:
    return np.concatenate([problem.running_cost.transpose(0, 2, 1).ravel(), problem.terminal_cost])


def build_primal(model: MFGModel, grid: GridSpec, flow, problem: DiscreteProblem | None = None) -> LinearProgram:
    problem = _problem(model, grid, flow, problem)
    A = primal_matrix(problem)
    m, n = A.shape
    return LinearProgram(primal_cost(problem), A, primal_rhs(problem), np.full(m, EQ, dtype=object), np.zeros(n))


def unpack_primal(z, grid: GridSpec) -> OccupationMeasure:
    K, N, J = grid.n_time, grid.n_nodes, grid.n_actions
    z = np.asarray(z, dtype=float)
    return OccupationMeasure(z[: K * N * J].reshape(K, N, J).copy(), z[K * N * J :].copy())


def pack_primal(occ: OccupationMeasure) -> np.ndarray:
    return np.concatenate([occ.xi.ravel(), occ.nu])


def occupation_cost(problem: DiscreteProblem, occ: OccupationMeasure) -> float:
    return float(np.sum(problem.running_cost.transpose(0, 2, 1) * occ.xi) + problem.terminal_cost @ occ.nu)


def marginals(occ: OccupationMeasure, grid: GridSpec, check: bool = True) -> MeanFieldFlow:
    """State marginal on every time node: slab averages, then nu at the end."""
    if check:
        occ.check(grid.dt, MASS_TOL)
    m = np.vstack([occ.xi.sum(axis=2) / grid.dt, occ.nu[None, :]])
    return MeanFieldFlow(m)


def disintegrate(occ: OccupationMeasure) -> Policy:
    mass = occ.xi.sum(axis=2)
    visited = mass > ZERO_MASS
    J = occ.xi.shape[2]
    kernel = np.full(occ.xi.shape, 1.0 / J)
    kernel[visited] = np.clip(occ.xi[visited], 0.0, None) / np.clip(occ.xi[visited], 0.0, None).sum(axis=1)[:, None]
    return Policy(kernel, ~visited)


def propagate(model: MFGModel, grid: GridSpec, flow, policy: Policy, problem: DiscreteProblem | None = None):
    """Law of the chain started from rho under ``policy`` (coefficients frozen at ``flow``).

    Returns ``(occupation, marginal flow)``.
    """
    problem = _problem(model, grid, flow, problem)
    kern = problem.kernel
    m = kernels.forward_propagate(kern.stay, kern.move, kern.targets, np.ascontiguousarray(policy.kernel), problem.rho)
    xi = m[:-1, :, None] * policy.kernel * grid.dt
    return OccupationMeasure(xi, m[-1].copy()), MeanFieldFlow(m)


def flow_balance_residual(problem: DiscreteProblem, xi, terminal) -> np.ndarray:
    """Residual of every flow-balance row with ``terminal`` in place of nu."""
    A = primal_matrix(problem)
    z = np.concatenate([np.asarray(xi).ravel(), terminal])
    return A @ z - primal_rhs(problem)


def propagated_terminal(problem: DiscreteProblem, xi) -> np.ndarray:
    """sum_{x,j} xi[K-1, x, j] P(x, .) / dt, the terminal law implied by the last slab."""
    kern = problem.kernel
    w = np.asarray(xi)[-1].T / problem.dt  # (J, N)
    out = np.sum(w * kern.stay[-1], axis=0)
    moved = w[:, :, None] * kern.move[-1]
    np.add.at(out, np.broadcast_to(kern.targets, moved.shape).ravel(), moved.ravel())
    return out


def check_measure(occ: OccupationMeasure, problem: DiscreteProblem, tol_mass=MASS_TOL, tol_rho=1e-9):
    """Slab-mass, initial-marginal and terminal-marginal errors; raises above tolerance."""
    dt = problem.dt
    errors = {
        "slab_mass": float(np.max(np.abs(occ.slab_mass() - dt))),
        "initial_marginal": float(np.max(np.abs(occ.xi[0].sum(axis=1) / dt - problem.rho))),
        "terminal_marginal": float(np.max(np.abs(propagated_terminal(problem, occ.xi) - occ.nu))),
    }
    if errors["slab_mass"] > tol_mass or errors["initial_marginal"] > tol_rho or errors["terminal_marginal"] > tol_mass:
        raise InconsistentMeasureError(f"occupation invariants violated: {errors}")
    return errors
