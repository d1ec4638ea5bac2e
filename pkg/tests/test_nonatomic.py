import numpy as np
import pytest

from anon_games import (PreconditionError, SolverConfig, enumerate_cournot_nash_bruteforce,
                        is_cournot_nash, network_from_dict, solve_cournot_nash,
                        solve_social_optimum, tv_distance, uniqueness_probe)
from anon_games.game import admissible_project
from anon_games.nonatomic import CERT_FACTOR, frank_wolfe
from oracles import pigou_poa_closed_form


def single_type(costs, actions):
    return network_from_dict({
        "elements": [{"id": f"e{i}", "cost": c} for i, c in enumerate(costs)],
        "actions": [[f"e{i}" for i in a] for a in actions],
        "types": [{"id": "t", "actions": list(range(len(actions)))}],
    })


@pytest.mark.parametrize("kw", [dict(gap_tol=0), dict(max_iters=0), dict(step_rule="newton"),
                                dict(variant="away"), dict(variant="pairwise", step_rule="2/(k+2)")])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


def test_pigou_equilibrium(pigou):
    res = solve_cournot_nash(pigou, [1.0])
    assert res.certified
    assert pigou.loads(res.m_star)[1] == pytest.approx(1.0, abs=1e-9)
    assert res.objective_value == pytest.approx(0.5, abs=1e-9)


def test_pigou_optimum(pigou):
    res = solve_social_optimum(pigou, [1.0])
    assert res.certified and not res.heuristic
    np.testing.assert_allclose(res.m_star.mass, [[0.5, 0.5]], atol=1e-8)
    assert res.objective_value == pytest.approx(1 / pigou_poa_closed_form(), abs=1e-9)


def test_braess_equilibrium_uses_shortcut(braess):
    res = solve_cournot_nash(braess, [1.0])
    assert res.certified
    zigzag = braess.actions.index((0, 4, 3))
    assert res.m_star.mass[0, zigzag] == pytest.approx(1.0, abs=1e-8)
    assert braess.social_cost(res.m_star) == pytest.approx(2.0, abs=1e-8)
    assert solve_social_optimum(braess, [1.0]).objective_value == pytest.approx(1.5, abs=1e-8)


@pytest.mark.parametrize("name", ["pigou", "braess"])
def test_solver_matches_bruteforce(name, request):
    net = request.getfixturevalue(name)
    res = solve_cournot_nash(net, [1.0])
    brute = enumerate_cournot_nash_bruteforce(net, [1.0], grid_steps=200)
    assert len(brute) == 1
    assert tv_distance(res.m_star, brute[0]) <= 1e-4


def test_grid_certified(grid):
    for lam in (grid.lambda0, [0.5, 0.5], [1.0, 0.0], [0.0, 1.0]):
        res = solve_cournot_nash(grid, lam)
        assert res.certified
        assert is_cournot_nash(grid, res.m_star, 1e-6).ok
        np.testing.assert_allclose(res.m_star.mass.sum(axis=1), lam, atol=1e-12)


def test_entry_game_refused(entry):
    with pytest.raises(PreconditionError):
        solve_cournot_nash(entry, [0.5, 0.5])
    with pytest.raises(PreconditionError):
        solve_social_optimum(entry, [0.5, 0.5])


def test_constant_costs_give_vertex():
    net = single_type([{"kind": "constant", "b": 2.0}, {"kind": "constant", "b": 1.0}], [[0], [1]])
    res = solve_social_optimum(net, [1.0])
    np.testing.assert_array_equal(res.m_star.mass, [[0.0, 1.0]])
    assert res.objective_value == 1.0


def test_single_route():
    net = single_type([{"kind": "linear", "a": 1.0}], [[0]])
    assert solve_social_optimum(net, [1.0]).m_star.mass.tolist() == [[1.0]]


def test_uniqueness_probe(pigou, braess):
    assert uniqueness_probe(pigou, [1.0])[0]
    two = single_type([{"kind": "linear", "a": 1.0}, {"kind": "linear", "a": 3.0}], [[0], [1]])
    assert uniqueness_probe(two, [1.0])[0]
    free = single_type([{"kind": "constant", "b": 0.0}] * 2, [[0], [1]])
    unique, spread = uniqueness_probe(free, [1.0])
    assert not unique and spread > 1e-6


@pytest.mark.parametrize("variant,rule", [("pairwise", "exact"), ("standard", "exact")])
def test_history_non_increasing(grid, variant, rule):
    cfg = SolverConfig(variant=variant, step_rule=rule)
    A = admissible_project([0.5, 0.5], grid)
    m, gap, viol, iters, hist = frank_wolfe(A, grid.potential, grid.costs, cfg)
    assert gap >= 0
    assert np.all(np.diff(hist) <= 1e-13)


def test_iteration_cap_reports_uncertified(grid):
    res = solve_cournot_nash(grid, [0.5, 0.5], SolverConfig(max_iters=1, variant="standard",
                                                            step_rule="2/(k+2)"))
    assert res.iterations == 1
    assert not res.certified
    assert res.gap >= 0


def test_certified_implies_small_violation(grid, braess, rng):
    for net in (grid, braess):
        for _ in range(5):
            lam = rng.dirichlet(np.ones(net.num_types))
            cfg = SolverConfig()
            res = solve_cournot_nash(net, lam, cfg)
            if res.certified:
                assert res.max_violation <= CERT_FACTOR * cfg.gap_tol


def test_potential_equivalence_on_bruteforce_points(pigou, braess):
    for net in (pigou, braess):
        best = solve_cournot_nash(net, [1.0]).objective_value
        for m in enumerate_cournot_nash_bruteforce(net, [1.0], grid_steps=100):
            assert net.potential(m) == pytest.approx(best, abs=1e-6)
