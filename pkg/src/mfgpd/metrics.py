"""1-Wasserstein distances between distributions on the state grid."""

import numpy as np


def w1_axis(p, q, h):
    """Exact W1 between two probability vectors on a uniform 1-D grid."""
    return float(h * np.sum(np.abs(np.cumsum(np.asarray(p) - np.asarray(q))[:-1])))


def w1_grid(p, q, grid):
    """W1 on the grid; in 2-D the max over the two axis marginals (a lower bound)."""
    if grid.state_dim == 1:
        return w1_axis(p, q, grid.spacing[0])
    p2 = np.asarray(p).reshape(grid.n_state)
    q2 = np.asarray(q).reshape(grid.n_state)
    return max(
        w1_axis(p2.sum(axis=1), q2.sum(axis=1), grid.spacing[0]),
        w1_axis(p2.sum(axis=0), q2.sum(axis=0), grid.spacing[1]),
    )


def flow_distance(a, b, grid):
    """Per-time-node W1 between two flows, shape (n_time+1,)."""
    a = getattr(a, "m", a)
    b = getattr(b, "m", b)
    return np.array([w1_grid(pa, pb, grid) for pa, pb in zip(a, b)])


def max_flow_distance(a, b, grid):
    return float(flow_distance(a, b, grid).max())
