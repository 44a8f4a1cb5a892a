"""Pure-numpy reference versions of the hot loops.

Transition kernels are stored in stencil form: ``stay[k, j, x]`` is the
probability of remaining at node ``x`` and ``move[k, j, x, s]`` the probability
of jumping to ``targets[x, s]``.  Dropped (off-grid) stencil slots point back
at ``x`` with zero probability.
"""

import numpy as np


def bellman_backward(stay, move, targets, cost_dt, terminal, tie_tol):
    n_time, n_act, n_nodes = stay.shape
    value = np.empty((n_time + 1, n_nodes))
    argmin = np.empty((n_time, n_nodes), dtype=np.int64)
    unique = np.empty((n_time, n_nodes), dtype=np.bool_)
    value[n_time] = terminal
    for k in range(n_time - 1, -1, -1):
        q = cost_dt[k] + stay[k] * value[k + 1] + np.sum(move[k] * value[k + 1][targets], axis=-1)
        best = np.argmin(q, axis=0)
        vmin = q[best, np.arange(n_nodes)]
        value[k] = vmin
        argmin[k] = best
        unique[k] = np.sum(q <= vmin + tie_tol, axis=0) == 1
    return value, argmin, unique


def forward_propagate(stay, move, targets, policy, rho):
    n_time, n_act, n_nodes = stay.shape
    m = np.empty((n_time + 1, n_nodes))
    m[0] = rho
    flat_targets = np.broadcast_to(targets, move.shape[1:]).ravel()
    for k in range(n_time):
        w = policy[k].T * m[k]  # (J, N)
        nxt = np.sum(w * stay[k], axis=0)
        moved = (w[:, :, None] * move[k]).ravel()
        nxt += np.bincount(flat_targets, weights=moved, minlength=n_nodes)
        m[k + 1] = nxt
    return m


def simulate_counts(stay, move, targets, policy, start, u_action, u_move):
    n_time, n_act, n_nodes = stay.shape
    counts = np.zeros((n_time + 1, n_nodes), dtype=np.int64)
    x = start.astype(np.int64).copy()
    counts[0] = np.bincount(x, minlength=n_nodes)
    for k in range(n_time):
        cum_pi = np.cumsum(policy[k][x], axis=1)
        a = np.minimum(np.sum(cum_pi <= u_action[:, k, None], axis=1), n_act - 1)
        probs = np.concatenate([stay[k, a, x][:, None], move[k, a, x]], axis=1)
        cum = np.cumsum(probs, axis=1)
        s = np.minimum(np.sum(cum <= u_move[:, k, None], axis=1), probs.shape[1] - 1)
        jumped = s > 0
        x[jumped] = targets[x[jumped], s[jumped] - 1]
        counts[k + 1] = np.bincount(x, minlength=n_nodes)
    return counts
