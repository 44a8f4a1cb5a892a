"""Time the numba kernels against their numpy fallbacks on an LQ-crowd sized chain.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from mfgpd.discretize import discretize
from mfgpd.kernels import _numba, _numpy
from mfgpd.model import GridSpec, lq_crowd


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--paths", type=int, default=100_000)
    args = ap.parse_args()

    model = lq_crowd(sigma=1.0, init_mean=1.0)
    grid = GridSpec(0.4, 50, [(-4.0, 4.0)], [81], np.linspace(-2, 2, 9))
    prob = discretize(model, grid, np.tile(model.rho(grid), (grid.n_time + 1, 1)))
    k = prob.kernel
    rng = np.random.default_rng(0)
    policy = rng.dirichlet(np.ones(grid.n_actions), size=(grid.n_time, grid.n_nodes))
    cost_dt = np.ascontiguousarray(prob.running_cost * prob.dt)
    start = rng.integers(0, grid.n_nodes, size=args.paths).astype(np.int64)
    ua, um = rng.random((args.paths, grid.n_time)), rng.random((args.paths, grid.n_time))

    cases = {
        "bellman_backward": lambda m: m.bellman_backward(k.stay, k.move, k.targets, cost_dt, prob.terminal_cost, 1e-12),
        "forward_propagate": lambda m: m.forward_propagate(k.stay, k.move, k.targets, policy, prob.rho),
        f"simulate_counts ({args.paths} paths)": lambda m: m.simulate_counts(k.stay, k.move, k.targets, policy, start, ua, um),
    }
    print(f"grid: {grid.n_time} slabs x {grid.n_nodes} nodes x {grid.n_actions} actions")
    print(f"{'kernel':36s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}")
    for name, call in cases.items():
        call(_numba)  # compile
        t_np, t_nb = best_of(lambda: call(_numpy), args.repeat), best_of(lambda: call(_numba), args.repeat)
        print(f"{name:36s} {1e3 * t_np:11.2f} {1e3 * t_nb:11.2f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
