"""Markov-chain approximation of the controlled generator on the grid.

Upwind drift plus central diffusion gives nonnegative jump rates, so for every
slab and action ``P = I + dt * Q`` is a stochastic matrix once the explicit
step passes the stability guard.  Jumps that would leave the box are dropped,
which keeps the walker in place (reflection) and conserves mass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DiscretizationError, StabilityError
from .measures import as_flow
from .model import GridSpec, MFGModel, evaluate_block, terminal_costs

STABILITY_SLACK = 1e-12


def stencil_offsets(state_dim: int) -> np.ndarray:
    if state_dim == 1:
        return np.array([[1], [-1]])
    return np.array([[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [-1, -1], [1, -1], [-1, 1]])


def stencil_targets(grid: GridSpec):
    """Flat target index per (node, stencil slot); -1 marks off-grid jumps."""
    offsets = stencil_offsets(grid.state_dim)
    idx = np.stack(np.unravel_index(np.arange(grid.n_nodes), grid.n_state), axis=1)
    tgt = idx[:, None, :] + offsets[None, :, :]
    shape = np.array(grid.n_state)
    inside = np.all((tgt >= 0) & (tgt < shape), axis=2)
    flat = np.ravel_multi_index(tuple(np.clip(tgt, 0, shape - 1).transpose(2, 0, 1)), grid.n_state)
    return np.where(inside, flat, -1), offsets


@dataclass(eq=False)
class DiscreteGenerator:
    """Jump rates ``rates[k, j, x, s]`` from node x to ``targets[x, s]``."""

    rates: np.ndarray
    targets: np.ndarray
    offsets: np.ndarray
    dt: float

    @property
    def out_rate(self):
        return self.rates.sum(axis=-1)

    def matrix(self, k: int, j: int) -> sp.csr_matrix:
        n = self.targets.shape[0]
        rows = np.repeat(np.arange(n), self.targets.shape[1])
        q = sp.coo_matrix((self.rates[k, j].ravel(), (rows, self.targets.ravel())), shape=(n, n)).tocsr()
        return q - sp.diags(self.out_rate[k, j])

    def apply(self, v):
        """(Q v)(x) for every (slab, action)."""
        return np.sum(self.rates * (v[self.targets] - v[:, None]), axis=-1)


@dataclass(eq=False)
class TransitionKernel:
    stay: np.ndarray  # (K, J, N)
    move: np.ndarray  # (K, J, N, S)
    targets: np.ndarray
    dt: float

    def matrix(self, k: int, j: int) -> sp.csr_matrix:
        n = self.targets.shape[0]
        rows = np.repeat(np.arange(n), self.targets.shape[1])
        p = sp.coo_matrix((self.move[k, j].ravel(), (rows, self.targets.ravel())), shape=(n, n)).tocsr()
        return p + sp.diags(self.stay[k, j])


def _rates_1d(b, cov, h):
    diff = cov[:, 0, 0] / (2.0 * h[0] ** 2)
    return np.stack([diff + np.maximum(b[:, 0], 0.0) / h[0], diff + np.maximum(-b[:, 0], 0.0) / h[0]], axis=1)


def _rates_2d(b, cov, h):
    s11, s22, s12 = cov[:, 0, 0], cov[:, 1, 1], cov[:, 0, 1]
    bad = np.abs(s12) > np.minimum(s11, s22) + 1e-14
    if bad.any():
        i = int(np.argmax(bad))
        raise DiscretizationError(
            f"cross covariance {s12[i]:.4g} exceeds min diagonal ({s11[i]:.4g}, {s22[i]:.4g}); "
            "the 7-point stencil would have negative weights"
        )
    h1, h2 = h
    cross = np.abs(s12) / (2.0 * h1 * h2)
    pos, neg = np.where(s12 > 0, cross, 0.0), np.where(s12 < 0, cross, 0.0)
    r = np.empty((b.shape[0], 8))
    r[:, 0] = s11 / (2 * h1**2) - cross + np.maximum(b[:, 0], 0.0) / h1
    r[:, 1] = s11 / (2 * h1**2) - cross + np.maximum(-b[:, 0], 0.0) / h1
    r[:, 2] = s22 / (2 * h2**2) - cross + np.maximum(b[:, 1], 0.0) / h2
    r[:, 3] = s22 / (2 * h2**2) - cross + np.maximum(-b[:, 1], 0.0) / h2
    r[:, 4] = r[:, 5] = pos
    r[:, 6] = r[:, 7] = neg
    if r.min() < -1e-12:
        raise DiscretizationError("negative stencil weight; refine the grid or reduce the cross covariance")
    return np.maximum(r, 0.0)


def _check_covariance(cov, t, a):
    asym = np.max(np.abs(cov - np.swapaxes(cov, 1, 2)), initial=0.0)
    if asym > 1e-12:
        raise DiscretizationError(f"covariance not symmetric (|S - S^T| = {asym:.3e}) at t={t}, a={a}")
    if cov.shape[1] == 1:
        lam = cov[:, 0, 0].min()
    else:
        lam = np.linalg.eigvalsh(cov)[:, 0].min()
    if lam < -1e-12:
        raise DiscretizationError(f"covariance not PSD (eigenvalue {lam:.3e}) at t={t}, a={a}")


@dataclass(eq=False)
class DiscreteProblem:
    """Everything the LP builders and recursions need for one frozen flow."""

    generator: DiscreteGenerator
    kernel: TransitionKernel
    running_cost: np.ndarray  # (K, J, N)
    terminal_cost: np.ndarray  # (N,)
    rho: np.ndarray
    dt: float


def discretize(model: MFGModel, grid: GridSpec, flow) -> DiscreteProblem:
    """Evaluate coefficients once with the population frozen at ``flow``."""
    m = as_flow(flow).m
    if m.shape != (grid.n_time + 1, grid.n_nodes):
        raise ValueError(f"flow shape {m.shape} does not match grid ({grid.n_time + 1}, {grid.n_nodes})")
    targets, offsets = stencil_targets(grid)
    h = grid.spacing
    K, J, N = grid.n_time, grid.n_actions, grid.n_nodes
    rates = np.empty((K, J, N, offsets.shape[0]))
    cost = np.empty((K, J, N))
    for k in range(K):
        t = grid.times[k]
        mu = grid.population(m[k])
        for j, a in enumerate(grid.actions):
            b, cov, f = evaluate_block(model, t, grid.nodes, a, mu)
            _check_covariance(cov, t, a)
            rates[k, j] = _rates_1d(b, cov, h) if grid.state_dim == 1 else _rates_2d(b, cov, h)
            cost[k, j] = f
    rates[:, :, targets < 0] = 0.0
    targets = np.where(targets < 0, np.arange(N)[:, None], targets)

    gen = DiscreteGenerator(rates, targets, offsets, grid.dt)
    max_rate = gen.out_rate.max(initial=0.0)
    if grid.dt * max_rate > 1.0 + STABILITY_SLACK:
        max_dt = 1.0 / max_rate
        raise StabilityError(
            f"explicit step unstable: dt={grid.dt:.4g} but dt * max rate = {grid.dt * max_rate:.4g}; "
            f"need dt <= {max_dt:.6g} (n_time >= {int(np.ceil(grid.horizon / max_dt))})",
            max_dt=max_dt,
        )
    g = terminal_costs(model, grid.nodes, grid.population(m[K]))
    return DiscreteProblem(gen, transition_kernel(gen), cost, g, model.rho(grid), grid.dt)


def build_generator(model: MFGModel, grid: GridSpec, flow) -> DiscreteGenerator:
    return discretize(model, grid, flow).generator


def transition_kernel(gen: DiscreteGenerator) -> TransitionKernel:
    move = gen.dt * gen.rates
    stay = 1.0 - gen.dt * gen.out_rate
    # exact-transport steps (dt * rate == 1) may round a hair below zero
    stay = np.where((stay < 0) & (stay > -STABILITY_SLACK), 0.0, stay)
    if stay.min(initial=0.0) < 0:
        raise StabilityError(f"negative stay probability {stay.min():.3e}", max_dt=1.0 / gen.out_rate.max())
    return TransitionKernel(stay, move, gen.targets, gen.dt)
