"""Residuals of the primal-dual equilibrium system and Monte-Carlo consistency.

For a triple (flow mu, occupation (xi, nu), certificate psi) the residuals are

* ``r_value``         |sum f xi + sum g(., mu_K) mu_K - rho . psi[0]|
* ``r_flow``          flow-balance rows with mu_K in place of nu (sup norm)
* ``r_terminal_feas`` max (psi[K] - g)_+
* ``r_bellman_feas``  max of the negative part of the Bellman slack
* ``r_consistency``   max |mu_k - slab marginal of xi| over nodes, and |mu_K - nu|
* ``r_comp_terminal`` |sum (g - psi[K]) mu_K|
* ``r_comp_running``  |sum slack * xi|

All are evaluated with the same discrete operators as the LP builders.  When
the flow-balance rows hold exactly, the signed value residual equals the sum
of the two signed complementarity sums.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .discretize import DiscreteProblem, discretize
from .dual import bellman_slack, terminal_slack
from .measures import DualCertificate, MeanFieldFlow, OccupationMeasure, Policy, as_flow
from .metrics import max_flow_distance
from .occupation import flow_balance_residual


@dataclass
class ResidualReport:
    r_value: float
    r_flow: float
    r_terminal_feas: float
    r_bellman_feas: float
    r_consistency: float
    r_comp_terminal: float
    r_comp_running: float
    value_signed: float
    comp_terminal_signed: float
    comp_running_signed: float
    tolerance: float
    verdict: bool

    def to_dict(self):
        return {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v)) for k, v in asdict(self).items()}

    @property
    def residuals(self):
        return {
            "r_value": self.r_value,
            "r_flow": self.r_flow,
            "r_terminal_feas": self.r_terminal_feas,
            "r_bellman_feas": self.r_bellman_feas,
            "r_consistency": self.r_consistency,
            "r_comp_terminal": self.r_comp_terminal,
            "r_comp_running": self.r_comp_running,
        }


def _unwrap(flow, occupation, certificate):
    m = as_flow(flow).m
    psi = certificate.psi if isinstance(certificate, DualCertificate) else np.asarray(certificate)
    return m, occupation, psi


def _check_shapes(grid, m, occ, psi):
    K, N, J = grid.n_time, grid.n_nodes, grid.n_actions
    if m.shape != (K + 1, N) or psi.shape != (K + 1, N) or occ.xi.shape != (K, N, J) or occ.nu.shape != (N,):
        raise ValueError(
            f"shape mismatch: flow {m.shape}, psi {psi.shape}, xi {occ.xi.shape}, nu {occ.nu.shape}; "
            f"grid expects ({K + 1}, {N}) and ({K}, {N}, {J})"
        )


def signed_complementarity(problem: DiscreteProblem, m, occ, psi):
    term = float(terminal_slack(problem, psi) @ m[-1])
    run = float(np.sum(bellman_slack(problem, psi).transpose(0, 2, 1) * occ.xi))
    return term, run


def complementarity(model, grid, flow, occupation: OccupationMeasure, certificate, problem=None):
    """Absolute terminal and running slackness sums."""
    m, occ, psi = _unwrap(flow, occupation, certificate)
    problem = problem or discretize(model, grid, m)
    term, run = signed_complementarity(problem, m, occ, psi)
    return abs(term), abs(run)


def verify_ne(model, grid, flow, occupation: OccupationMeasure, certificate, tol=1e-6, problem=None) -> ResidualReport:
    m, occ, psi = _unwrap(flow, occupation, certificate)
    _check_shapes(grid, m, occ, psi)
    problem = problem or discretize(model, grid, m)
    cost = float(np.sum(problem.running_cost.transpose(0, 2, 1) * occ.xi) + problem.terminal_cost @ m[-1])
    value_signed = cost - float(problem.rho @ psi[0])
    r_flow = float(np.max(np.abs(flow_balance_residual(problem, occ.xi, m[-1]))))
    r_term = max(0.0, float(np.max(-terminal_slack(problem, psi))))
    r_bell = max(0.0, float(np.max(-bellman_slack(problem, psi))))
    r_cons = float(max(np.max(np.abs(m[:-1] - occ.xi.sum(axis=2) / grid.dt)), np.max(np.abs(m[-1] - occ.nu))))
    term, run = signed_complementarity(problem, m, occ, psi)
    res = [abs(value_signed), r_flow, r_term, r_bell, r_cons, abs(term), abs(run)]
    return ResidualReport(
        *res,
        value_signed=value_signed,
        comp_terminal_signed=term,
        comp_running_signed=run,
        tolerance=tol,
        verdict=all(r <= tol for r in res),
    )


def simulate_consistency(model, grid, policy: Policy, flow, n_paths: int, seed: int, chunk: int = 20_000):
    """Sample chains from rho under ``policy`` and compare their marginals with ``flow``.

    Each chunk of paths draws from its own stream spawned from ``seed``, so
    results do not depend on the kernel backend.  Returns the empirical flow and
    the max-over-nodes W1 distance to ``flow``.
    """
    m = as_flow(flow).m
    problem = discretize(model, grid, m)
    kern = problem.kernel
    cdf = np.cumsum(problem.rho)
    pol = np.ascontiguousarray(policy.kernel)
    counts = np.zeros((grid.n_time + 1, grid.n_nodes), dtype=np.int64)
    n_chunks = max(1, -(-n_paths // chunk))
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(n_chunks)):
        rng = np.random.default_rng(child)
        size = min(chunk, n_paths - i * chunk)
        start = np.minimum(np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right"), grid.n_nodes - 1)
        u_action = rng.random((size, grid.n_time))
        u_move = rng.random((size, grid.n_time))
        counts += kernels.simulate_counts(kern.stay, kern.move, kern.targets, pol, start.astype(np.int64), u_action, u_move)
    empirical = MeanFieldFlow(counts / n_paths)
    return empirical, max_flow_distance(empirical, m, grid)
