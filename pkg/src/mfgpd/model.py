"""MFG problem instances: coefficients, grids and builtin models.

Coefficient evaluators are vectorized over states.  Every evaluator receives

* ``t``  -- scalar time,
* ``x``  -- array of shape ``(n, d)`` of state points,
* ``a``  -- action vector of shape ``(d_a,)``,
* ``mu`` -- a :class:`Population` (probability vector on the state grid),

and returns ``(n, d)`` drifts, ``(n, d, d)`` diffusion matrices (sigma, not
sigma sigma^T) or ``(n,)`` costs.  The terminal cost takes ``(x, mu)`` only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ModelEvaluationError

COUPLING_KINDS = ("none", "mean", "density")


@dataclass(frozen=True, eq=False)
class Population:
    """A probability vector on the nodes of a state grid."""

    weights: np.ndarray
    nodes: np.ndarray

    def mean(self) -> np.ndarray:
        return self.weights @ self.nodes


@dataclass(frozen=True, eq=False)
class GridSpec:
    horizon: float
    n_time: int
    state_box: tuple
    n_state: tuple
    actions: np.ndarray
    boundary: str = "reflecting"
    _nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.state_box)
        n_state = tuple(int(n) for n in np.atleast_1d(self.n_state))
        actions = np.asarray(self.actions, dtype=float)
        if actions.ndim == 1:
            actions = actions[:, None]
        object.__setattr__(self, "state_box", box)
        object.__setattr__(self, "n_state", n_state)
        object.__setattr__(self, "actions", actions)
        self.validate()
        axes = [np.linspace(lo, hi, n) for (lo, hi), n in zip(box, n_state)]
        mesh = np.meshgrid(*axes, indexing="ij")
        nodes = np.stack([m.ravel() for m in mesh], axis=1)
        object.__setattr__(self, "_nodes", nodes)

    def validate(self):
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if int(self.n_time) < 1:
            raise ValueError(f"n_time must be >= 1, got {self.n_time}")
        if len(self.state_box) not in (1, 2) or len(self.state_box) != len(self.n_state):
            raise ValueError("state_dim must be 1 or 2 with one box interval and one n_state per dimension")
        for (lo, hi), n in zip(self.state_box, self.n_state):
            if not hi > lo:
                raise ValueError(f"empty state interval [{lo}, {hi}]")
            if n < 2:
                raise ValueError(f"n_state must be >= 2 per dimension, got {n}")
        if self.actions.shape[0] == 0:
            raise ValueError("action list is empty")
        if len(np.unique(self.actions, axis=0)) != len(self.actions):
            raise ValueError("duplicate actions")
        if self.boundary != "reflecting":
            raise ValueError(f"unsupported boundary {self.boundary!r}")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_time

    @property
    def state_dim(self) -> int:
        return len(self.n_state)

    @property
    def spacing(self) -> np.ndarray:
        return np.array([(hi - lo) / (n - 1) for (lo, hi), n in zip(self.state_box, self.n_state)])

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.n_state))

    @property
    def n_actions(self) -> int:
        return self.actions.shape[0]

    @property
    def nodes(self) -> np.ndarray:
        return self._nodes

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_time + 1) * self.dt

    def axis(self, i: int) -> np.ndarray:
        lo, hi = self.state_box[i]
        return np.linspace(lo, hi, self.n_state[i])

    def multi_index(self, flat):
        return np.unravel_index(flat, self.n_state)

    def population(self, weights) -> Population:
        return Population(np.asarray(weights, dtype=float), self.nodes)

    def nearest_node(self, x) -> int:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return int(np.argmin(np.sum((self.nodes - x) ** 2, axis=1)))


@dataclass(eq=False)
class MFGModel:
    name: str
    drift: Callable
    diffusion: Callable
    running_cost: Callable
    terminal_cost: Callable
    initial_distribution: Callable  # grid -> probability vector on grid.nodes
    coupling_kind: str = "none"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.coupling_kind not in COUPLING_KINDS:
            raise ValueError(f"coupling_kind must be one of {COUPLING_KINDS}")

    def rho(self, grid: GridSpec) -> np.ndarray:
        rho = np.asarray(self.initial_distribution(grid), dtype=float)
        if rho.shape != (grid.n_nodes,):
            raise ModelEvaluationError(f"initial distribution has shape {rho.shape}, expected ({grid.n_nodes},)")
        if np.any(rho < 0) or abs(rho.sum() - 1.0) > 1e-12:
            raise ModelEvaluationError("initial distribution is not a probability vector")
        return rho


def _check_finite(values, what, t, x, a):
    values = np.asarray(values, dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        row = np.argwhere(bad)[0][0] if values.ndim else 0
        xs = np.atleast_2d(x)[min(row, len(np.atleast_2d(x)) - 1)]
        raise ModelEvaluationError(
            f"non-finite {what} at t={t}, x={xs.tolist()}, a={np.atleast_1d(a).tolist()}", t=t, x=xs, a=a
        )
    return values


def evaluate_block(model: MFGModel, t, x, a, mu: Population):
    """Evaluate drift, covariance sigma sigma^T and running cost on many states."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, d = x.shape
    b = _check_finite(np.broadcast_to(model.drift(t, x, a, mu), (n, d)), "drift", t, x, a)
    sig = _check_finite(np.broadcast_to(model.diffusion(t, x, a, mu), (n, d, d)), "diffusion", t, x, a)
    cov = sig @ np.swapaxes(sig, 1, 2)
    cost = _check_finite(np.broadcast_to(model.running_cost(t, x, a, mu), (n,)), "running cost", t, x, a)
    return np.array(b), cov, np.array(cost)


def evaluate(model: MFGModel, t, x, a, mu: Population):
    """Pointwise evaluation returning ``(drift, covariance, cost)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b, cov, cost = evaluate_block(model, t, x[None, :], a, mu)
    return b[0], cov[0], float(cost[0])


def terminal_costs(model: MFGModel, x, mu: Population):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    g = np.broadcast_to(model.terminal_cost(x, mu), (x.shape[0],))
    return _check_finite(g, "terminal cost", None, x, None).copy()


@dataclass
class NondegeneracyReport:
    min_eigenvalue: float
    lambda_min: float
    passes: bool
    argmin: tuple  # (slab, node, action) where the minimum is attained


def check_nondegeneracy(model: MFGModel, grid: GridSpec, lambda_min: float = 0.0, flow=None):
    """Smallest eigenvalue of sigma sigma^T over the grid (advisory only).

    Coefficients are sampled at every slab start, node and action, with the
    population frozen at ``flow`` (defaults to rho at every time).
    """
    if lambda_min < 0:
        raise ValueError("lambda_min must be >= 0")
    rho = model.rho(grid)
    best = (np.inf, (0, 0, 0))
    for k in range(grid.n_time):
        mu = grid.population(rho if flow is None else flow[k])
        for j, a in enumerate(grid.actions):
            _, cov, _ = evaluate_block(model, grid.times[k], grid.nodes, a, mu)
            eig = np.linalg.eigvalsh(cov)[:, 0]
            i = int(np.argmin(eig))
            if eig[i] < best[0]:
                best = (float(eig[i]), (k, i, j))
    lam = max(best[0], 0.0) if best[0] > -1e-14 else best[0]
    return NondegeneracyReport(lam, lambda_min, lam >= lambda_min, best[1])


# ---------------------------------------------------------------------------
# initial distributions

def point_mass(x0):
    """Mass at ``x0``, split linearly between the two bracketing nodes in 1-D."""

    def rho(grid):
        out = np.zeros(grid.n_nodes)
        x = np.atleast_1d(np.asarray(x0, dtype=float))
        if grid.state_dim == 1:
            ax = grid.axis(0)
            pos = (x[0] - ax[0]) / grid.spacing[0]
            i = int(np.clip(np.floor(pos + 1e-9), 0, len(ax) - 1))
            w = pos - i
            if abs(w) < 1e-9 or i == len(ax) - 1:
                out[i] = 1.0
            else:
                out[i], out[i + 1] = 1.0 - w, w
        else:
            out[grid.nearest_node(x)] = 1.0
        return out

    return rho


def gaussian(mean, std):
    def rho(grid):
        m = np.broadcast_to(np.asarray(mean, dtype=float), (grid.state_dim,))
        z = np.sum((grid.nodes - m) ** 2, axis=1) / (2.0 * std**2)
        w = np.exp(-(z - z.min()))
        return w / w.sum()

    return rho


# ---------------------------------------------------------------------------
# builtins

def _zero_sigma(t, x, a, mu):
    return np.zeros((x.shape[0], x.shape[1], x.shape[1]))


def _const_sigma(level):
    def sigma(t, x, a, mu):
        n, d = x.shape
        return np.broadcast_to(level * np.eye(d), (n, d, d))

    return sigma


def _action_drift(t, x, a, mu):
    return np.broadcast_to(np.asarray(a, dtype=float)[: x.shape[1]], x.shape)


def example1(sigma=0.5, init_mean=0.0, init_std=0.3):
    """Zero-cost game: every policy and its induced flow is an equilibrium."""

    def zero_cost(t, x, a, mu):
        return np.zeros(x.shape[0])

    def zero_terminal(x, mu):
        return np.zeros(x.shape[0])

    return MFGModel(
        name="example1",
        drift=_action_drift,
        diffusion=_const_sigma(sigma) if sigma else _zero_sigma,
        running_cost=zero_cost,
        terminal_cost=zero_terminal,
        initial_distribution=gaussian(init_mean, init_std),
        coupling_kind="none",
        params={"sigma": sigma, "init_mean": init_mean, "init_std": init_std},
    )


def example2(x0=0.5):
    """Deterministic 1-D game whose value function -|x| has a kink at 0.

    Equilibrium: everybody moves right, mu_t = delta_{x0 + t}, value -x0.
    """
    if not x0 > 0:
        raise ValueError("example2 needs x0 > 0")

    def running_cost(t, x, a, mu):
        return np.full(x.shape[0], 1.0 + (x0 + t - mu.mean()[0]) ** 2)

    def terminal_cost(x, mu):
        return -np.abs(x[:, 0])

    return MFGModel(
        name="example2",
        drift=_action_drift,
        diffusion=_zero_sigma,
        running_cost=running_cost,
        terminal_cost=terminal_cost,
        initial_distribution=point_mass(x0),
        coupling_kind="mean",
        params={"x0": x0},
    )


def example2_certificate(grid: GridSpec, x0=0.5):
    """A smooth dual certificate for ``example2`` sampled on the grid.

    psi(t, x) = -x on [x0, inf); to the left of x0 the slope is
    phi(y) = -cos(pi * min(1, (x0 - y)/x0)), which runs from -1 at x0 to +1 at
    and below 0.  |phi| <= 1 keeps the Bellman inequality, and psi(T, .) <= -|x|
    with strict inequality for x < x0.
    """
    x = grid.nodes[:, 0]
    s = np.clip((x0 - x) / x0, 0.0, 1.0)
    left = -x0 + (x0 / np.pi) * np.sin(np.pi * s) + np.minimum(x, 0.0)
    # below 0, phi = 1 so psi continues with slope 1 from psi(0) = -x0
    psi_x = np.where(x >= x0, -x, left)
    return np.tile(psi_x, (grid.n_time + 1, 1))


def lq_crowd(control_weight=1.0, crowd_weight=1.0, terminal_weight=1.0, sigma=np.sqrt(2.0),
             init_mean=0.0, init_std=0.5):
    """b = a, sigma = const * I, f = w_a |a|^2 / 2 + w_c |x - mean|^2, g = w_T |x|^2."""

    def running_cost(t, x, a, mu):
        a = np.asarray(a, dtype=float)
        return 0.5 * control_weight * float(a @ a) + crowd_weight * np.sum((x - mu.mean()) ** 2, axis=1)

    def terminal_cost(x, mu):
        return terminal_weight * np.sum(x**2, axis=1)

    return MFGModel(
        name="lq_crowd",
        drift=_action_drift,
        diffusion=_const_sigma(sigma),
        running_cost=running_cost,
        terminal_cost=terminal_cost,
        initial_distribution=gaussian(init_mean, init_std),
        coupling_kind="mean",
        params={
            "control_weight": control_weight,
            "crowd_weight": crowd_weight,
            "terminal_weight": terminal_weight,
            "sigma": sigma,
            "init_mean": init_mean,
            "init_std": init_std,
        },
    )


def random_smooth(seed=0, min_variance=0.5, max_variance=0.8, coupling=0.5):
    """Random bounded model with smooth costs and nondegenerate diffusion.

    Drift is the action plus a random sinusoid; the variance stays in
    ``[min_variance, max_variance]``; costs are random trigonometric polynomials
    plus a mean-field attraction term.
    """
    rng = np.random.default_rng(seed)
    wb, pb, ab = rng.uniform(0.5, 2.0), rng.uniform(0, 2 * np.pi), rng.uniform(0.0, 0.3)
    ws, ps = rng.uniform(0.5, 2.0), rng.uniform(0, 2 * np.pi)
    cf = rng.normal(size=3)
    wf, pf = rng.uniform(0.5, 2.0, 2), rng.uniform(0, 2 * np.pi, 2)
    cg, wg, pg = rng.normal(size=2), rng.uniform(0.5, 2.0, 2), rng.uniform(0, 2 * np.pi, 2)
    ca = rng.uniform(0.2, 1.0)
    spread = max_variance - min_variance

    def drift(t, x, a, mu):
        a = np.asarray(a, dtype=float)[: x.shape[1]]
        return a + ab * np.sin(wb * x + pb + t)

    def diffusion(t, x, a, mu):
        n, d = x.shape
        var = min_variance + spread * np.sin(ws * x + ps) ** 2
        out = np.zeros((n, d, d))
        idx = np.arange(d)
        out[:, idx, idx] = np.sqrt(var)
        return out

    def running_cost(t, x, a, mu):
        a = np.asarray(a, dtype=float)
        s = np.sum(x, axis=1)
        base = cf[0] * np.sin(wf[0] * s + pf[0]) + cf[1] * np.cos(wf[1] * s + pf[1] + t) + cf[2] * t
        return base + ca * float(a @ a) + coupling * np.sum((x - mu.mean()) ** 2, axis=1)

    def terminal_cost(x, mu):
        s = np.sum(x, axis=1)
        return cg[0] * np.sin(wg[0] * s + pg[0]) + cg[1] * np.cos(wg[1] * s + pg[1])

    return MFGModel(
        name="random_smooth",
        drift=drift,
        diffusion=diffusion,
        running_cost=running_cost,
        terminal_cost=terminal_cost,
        initial_distribution=gaussian(rng.uniform(-0.5, 0.5), rng.uniform(0.3, 0.6)),
        coupling_kind="mean",
        params={"seed": seed, "min_variance": min_variance, "max_variance": max_variance, "coupling": coupling},
    )


BUILTINS = {
    "example1": example1,
    "example2": example2,
    "lq_crowd": lq_crowd,
    "random_smooth": random_smooth,
}


def make_model(name: str, params: dict | None = None) -> MFGModel:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; builtins: {sorted(BUILTINS)}") from None
    return factory(**(params or {}))


def list_models():
    return {name: (f.__doc__ or "").strip().splitlines()[0] for name, f in BUILTINS.items()}
