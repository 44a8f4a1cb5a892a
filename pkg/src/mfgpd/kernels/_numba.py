"""Numba-compiled versions of the loops in :mod:`._numpy` (same signatures)."""

import numpy as np
from numba import njit


@njit(cache=True)
def bellman_backward(stay, move, targets, cost_dt, terminal, tie_tol):
    n_time, n_act, n_nodes = stay.shape
    n_sten = targets.shape[1]
    value = np.empty((n_time + 1, n_nodes))
    argmin = np.empty((n_time, n_nodes), dtype=np.int64)
    unique = np.empty((n_time, n_nodes), dtype=np.bool_)
    value[n_time] = terminal
    q = np.empty(n_act)
    for k in range(n_time - 1, -1, -1):
        nxt = value[k + 1]
        for x in range(n_nodes):
            best = 0
            for j in range(n_act):
                acc = stay[k, j, x] * nxt[x]
                for s in range(n_sten):
                    acc += move[k, j, x, s] * nxt[targets[x, s]]
                q[j] = cost_dt[k, j, x] + acc
                if q[j] < q[best]:
                    best = j
            vmin = q[best]
            ties = 0
            for j in range(n_act):
                if q[j] <= vmin + tie_tol:
                    ties += 1
            value[k, x] = vmin
            argmin[k, x] = best
            unique[k, x] = ties == 1
    return value, argmin, unique


@njit(cache=True)
def forward_propagate(stay, move, targets, policy, rho):
    n_time, n_act, n_nodes = stay.shape
    n_sten = targets.shape[1]
    m = np.zeros((n_time + 1, n_nodes))
    m[0] = rho
    for k in range(n_time):
        for x in range(n_nodes):
            mass = m[k, x]
            if mass == 0.0:
                continue
            for j in range(n_act):
                w = mass * policy[k, x, j]
                if w == 0.0:
                    continue
                m[k + 1, x] += w * stay[k, j, x]
                for s in range(n_sten):
                    m[k + 1, targets[x, s]] += w * move[k, j, x, s]
    return m


@njit(cache=True)
def simulate_counts(stay, move, targets, policy, start, u_action, u_move):
    n_time, n_act, n_nodes = stay.shape
    n_sten = targets.shape[1]
    n_paths = start.shape[0]
    counts = np.zeros((n_time + 1, n_nodes), dtype=np.int64)
    for p in range(n_paths):
        x = start[p]
        counts[0, x] += 1
        for k in range(n_time):
            u = u_action[p, k]
            a = n_act - 1
            acc = 0.0
            for j in range(n_act):
                acc += policy[k, x, j]
                if acc > u:
                    a = j
                    break
            u = u_move[p, k]
            acc = stay[k, a, x]
            if acc <= u:
                nx = x
                for s in range(n_sten):
                    acc += move[k, a, x, s]
                    if acc > u:
                        nx = targets[x, s]
                        break
                else:
                    nx = targets[x, n_sten - 1]
                x = nx
            counts[k + 1, x] += 1
    return counts
