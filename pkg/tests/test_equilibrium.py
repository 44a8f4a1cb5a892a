import numpy as np
import pytest

from mfgpd.equilibrium import (
    best_response,
    find_equilibria,
    fixed_point_iterate,
    restart_flows,
)
from mfgpd.errors import LPSolverError
from mfgpd.measures import MeanFieldFlow
from mfgpd.metrics import max_flow_distance
from mfgpd.model import GridSpec, example1, random_smooth
from mfgpd.occupation import marginals

from conftest import chain_model, constant_flow, ex2_equilibrium_flow


def test_best_response_example1_is_zero(ex1_setup):
    model, grid = ex1_setup
    flow = restart_flows(model, grid, 1, seed=4)[0]
    br = best_response(model, grid, flow, route="both")
    assert br.primal_value == 0.0 and br.dual_value == 0.0


def test_best_response_example2(ex2_model, ex2_grid):
    br = best_response(ex2_model, ex2_grid, ex2_equilibrium_flow(ex2_grid), route="both")
    assert br.primal_value == pytest.approx(-0.5, abs=1e-9)
    assert br.dual_value == pytest.approx(-0.5, abs=1e-9)


@pytest.mark.parametrize("route", ["primal", "dual", "both"])
def test_routes_agree_on_random_model(route):
    model = random_smooth(7)
    grid = GridSpec(0.5, 20, [(-2, 2)], [21], np.linspace(-1, 1, 3))
    flow = np.full((21, 21), 1 / 21)
    flow[0] = model.rho(grid)
    br = best_response(model, grid, flow, route=route, selection="vertex")
    assert abs(br.primal_value - br.dual_value) <= 1e-7 * (1 + abs(br.primal_value))


def test_consistent_selection_keeps_optimality():
    model, grid = example1(), GridSpec(1.0, 40, [(-2, 2)], [41], [-1.0, 0.0, 1.0])
    flow = restart_flows(model, grid, 1, seed=0)[0]
    vertex = best_response(model, grid, flow, selection="vertex")
    chosen = best_response(model, grid, flow, selection="consistent")
    assert chosen.primal_value == vertex.primal_value == 0.0
    # a propagated flow is already a best response, and the selection finds it
    np.testing.assert_allclose(marginals(chosen.occupation, grid).m, flow.m, atol=1e-9)


def test_unknown_options_rejected(ex2_model, ex2_grid):
    flow = ex2_equilibrium_flow(ex2_grid)
    with pytest.raises(ValueError):
        best_response(ex2_model, ex2_grid, flow, route="sideways")
    with pytest.raises(ValueError):
        best_response(ex2_model, ex2_grid, flow, selection="random")
    with pytest.raises(ValueError):
        fixed_point_iterate(ex2_model, ex2_grid, flow, damping=1.5)
    with pytest.raises(ValueError):
        find_equilibria(ex2_model, ex2_grid, n_restarts=0)


def test_route_disagreement_raises(monkeypatch, ex2_model, ex2_grid):
    import mfgpd.equilibrium as eq

    real = eq.solve_lp

    def skewed(lp, method="highs"):
        sol = real(lp, method)
        if lp.maximize:
            sol.objective_value += 1e-3
        return sol

    monkeypatch.setattr(eq, "solve_lp", skewed)
    with pytest.raises(LPSolverError):
        best_response(ex2_model, ex2_grid, ex2_equilibrium_flow(ex2_grid), route="both")


def test_example2_fixed_point_from_equilibrium(ex2_model, ex2_grid):
    flow = ex2_equilibrium_flow(ex2_grid)
    cand = fixed_point_iterate(ex2_model, ex2_grid, flow)
    assert cand.converged and cand.iterations == 1
    assert max(cand.report.residuals.values()) <= 1e-10
    np.testing.assert_array_equal(cand.flow.m, flow)


def test_example1_converges_in_one_step(ex1_setup):
    model, grid = ex1_setup
    for damping in (0.5, 1.0):
        for flow0 in restart_flows(model, grid, 3, seed=1):
            cand = fixed_point_iterate(model, grid, flow0, damping=damping)
            assert cand.converged and cand.iterations == 1


def test_lq_like_fixed_point_certifies():
    model = chain_model(3, coupling=1.0)
    grid = GridSpec(0.24, 6, [(-1, 1)], [11], [[-1.0], [0.0], [1.0]])
    flow0 = np.full((7, 11), 1 / 11)
    flow0[0] = model.rho(grid)
    cand = fixed_point_iterate(model, grid, flow0, damping=0.5, tol=1e-10, max_iter=300)
    assert cand.converged and cand.report.verdict
    assert cand.gap <= 1e-6 * (1 + abs(cand.primal_value))
    assert max(cand.invariants.values()) <= 1e-10


def test_nonconvergence_is_flagged_not_raised(ex2_model, ex2_grid):
    flow0 = restart_flows(ex2_model, ex2_grid, 1, seed=0)[0]
    cand = fixed_point_iterate(ex2_model, ex2_grid, flow0, damping=0.5, max_iter=2)
    assert not cand.converged and cand.iterations == 2 and len(cand.history) == 2


def test_restart_flows_are_feasible_and_seeded(ex1_setup):
    model, grid = ex1_setup
    a = restart_flows(model, grid, 3, seed=9)
    b = restart_flows(model, grid, 3, seed=9)
    for fa, fb in zip(a, b):
        np.testing.assert_array_equal(fa.m, fb.m)
        fa.validate(1e-12)
        np.testing.assert_allclose(fa.m[0], model.rho(grid))
    assert max_flow_distance(a[0], a[1], grid) > 0


def test_find_equilibria_example1_multiple(ex1_setup):
    model, grid = ex1_setup
    cands = find_equilibria(model, grid, n_restarts=5, seed=0, dedupe_eps=0.05)
    assert len(cands) >= 2
    for i, c in enumerate(cands):
        assert c.report.verdict and c.gap == 0.0
        for d in cands[i + 1:]:
            assert max_flow_distance(c.flow, d.flow, grid) > 0.05
    assert [c.seed_index for c in cands] == sorted(c.seed_index for c in cands)


def test_find_equilibria_example2_unique(ex2_model, ex2_grid):
    cands = find_equilibria(ex2_model, ex2_grid, n_restarts=3, seed=0, dedupe_eps=0.1, damping=1.0)
    assert len(cands) == 1
    np.testing.assert_array_equal(cands[0].flow.m, ex2_equilibrium_flow(ex2_grid))


def test_single_restart_reproduces_fixed_point(ex1_setup):
    model, grid = ex1_setup
    [cand] = find_equilibria(model, grid, n_restarts=1, seed=3)
    direct = fixed_point_iterate(model, grid, restart_flows(model, grid, 1, seed=3)[0])
    np.testing.assert_array_equal(cand.flow.m, direct.flow.m)
    assert cand.primal_value == direct.primal_value and cand.iterations == direct.iterations


def test_determinism(ex1_setup):
    model, grid = ex1_setup
    a = find_equilibria(model, grid, n_restarts=3, seed=5)
    b = find_equilibria(model, grid, n_restarts=3, seed=5)
    assert [c.seed_index for c in a] == [c.seed_index for c in b]
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.flow.m, y.flow.m)
        np.testing.assert_array_equal(x.certificate.psi, y.certificate.psi)


def test_summary_is_serializable(ex2_model, ex2_grid):
    import json

    cand = fixed_point_iterate(ex2_model, ex2_grid, ex2_equilibrium_flow(ex2_grid))
    json.dumps(cand.summary())
