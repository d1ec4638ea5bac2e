import math
from fractions import Fraction

import numpy as np
import pytest

from anon_games import (EntryScenario, EventSpec, analytic_cournot_nash, conditional_limit_experiment,
                        decay_slope_experiment, lambda_q, participation_equilibria,
                        rare_equilibrium_probability, rate_function, relative_entropy,
                        solve_cournot_nash, tv_distance)
from anon_games.large_deviations import (exact_log_probability, positivity_check, trial_seed,
                                         wilson_interval)
from oracles import binomial_log_tail, entry_entrants, kl_highprec

Q0 = 2 / 3
I_HALF = kl_highprec([0.5, 0.5], [1 / 3, 2 / 3])


def share_at_most(r):
    return EventSpec.action_share(1, "<=", r)


def entrant_share(n, n_high):
    k_low, k_high = entry_entrants(n - n_high, n_high)
    return Fraction(k_low + k_high, n)


@pytest.fixture(scope="module")
def scenario():
    return EntryScenario()


def test_event_relations():
    m = analytic_cournot_nash(0.5)
    assert share_at_most(0.5).contains(m)
    assert not share_at_most(0.5).contains(m, strict=True)
    assert EventSpec.action_share(1, "between", (0.4, 0.6)).contains(m)
    assert EventSpec.pair_mass(1, 1, ">=", 0.5).contains(m)
    with pytest.raises(ValueError):
        EventSpec.action_share(1, "==", 0.5)
    with pytest.raises(ValueError):
        EventSpec.action_share(1, "between", (0.4,))


def test_entry_rate_example(entry):
    res = rate_function(entry, lambda_q(Q0), share_at_most(0.5), eq_map=EntryScenario().eq_map)
    assert res.value == pytest.approx(I_HALF, abs=1e-8)
    assert res.value == pytest.approx(0.05889, abs=1e-5)
    assert len(res.minimizer_set) == 1
    assert tv_distance(res.minimizer_set[0], analytic_cournot_nash(0.5)) <= 1e-4
    assert res.infima_agree


@pytest.mark.parametrize("r", np.round(np.arange(0.35, 0.66, 0.05), 2))
def test_minimizer_is_m_r(entry, r):
    res = rate_function(entry, lambda_q(Q0), share_at_most(r), eq_map=EntryScenario().eq_map)
    assert res.value == pytest.approx(kl_highprec([1 - r, r], [1 / 3, 2 / 3]), abs=1e-8)
    assert [tv_distance(m, analytic_cournot_nash(r)) <= 1e-4 for m in res.minimizer_set] == [True]


def test_event_containing_lambda0_equilibrium(entry):
    res = rate_function(entry, lambda_q(Q0), share_at_most(0.7), eq_map=EntryScenario().eq_map)
    assert res.value == 0.0
    np.testing.assert_allclose(res.minimizers[0][0], lambda_q(Q0))


def test_event_needing_null_type_is_infinite(entry):
    ev = EventSpec.pair_mass(1, 1, ">=", 0.1)
    res = rate_function(entry, lambda_q(0.0), ev, eq_map=EntryScenario().eq_map)
    assert res.value == math.inf and res.minimizers == []


def test_positivity(entry, pigou):
    ev = share_at_most(0.5)
    res = rate_function(entry, lambda_q(Q0), ev, eq_map=EntryScenario().eq_map)
    assert res.value > 0
    assert positivity_check(res, ev, [analytic_cournot_nash(Q0)])
    load_ev = EventSpec.element_load(pigou, "e1", ">=", 0.5)
    pres = rate_function(pigou, [1.0], load_ev)
    assert pres.value == math.inf
    assert positivity_check(pres, load_ev, [solve_cournot_nash(pigou, [1.0]).m_star])
    inside = share_at_most(0.9)
    assert positivity_check(rate_function(entry, lambda_q(Q0), inside, eq_map=EntryScenario().eq_map),
                            inside, [analytic_cournot_nash(Q0)])


def test_non_unique_network_needs_map(grid):
    from anon_games import PreconditionError
    with pytest.raises(PreconditionError):
        rate_function(grid, grid.lambda0, EventSpec.element_load(grid, "r10", ">=", 0.15))


def test_resolution_stability_entry(entry, participation):
    cases = [(entry, lambda_q(Q0), share_at_most(0.45), EntryScenario().eq_map),
             (participation, lambda_q(0.75), EventSpec.pair_mass(0, 1, "<=", 0.2),
              lambda lam: participation_equilibria(lam[1]))]
    for game, lam0, ev, em in cases:
        a = rate_function(game, lam0, ev, eq_map=em, resolution=400).value
        b = rate_function(game, lam0, ev, eq_map=em, resolution=800).value
        assert a == pytest.approx(b, abs=1e-8)


def test_resolution_stability_networks(pigou, grid):
    ev = EventSpec.element_load(pigou, "e2", "<=", 0.9)
    assert rate_function(pigou, [1.0], ev, resolution=400).value == rate_function(
        pigou, [1.0], ev, resolution=800).value
    em = lambda lam: [solve_cournot_nash(grid, lam).m_star]
    gev = EventSpec.element_load(grid, "r10", ">=", 0.15)
    a = rate_function(grid, grid.lambda0, gev, eq_map=em, resolution=25)
    b = rate_function(grid, grid.lambda0, gev, eq_map=em, resolution=50)
    assert a.value == pytest.approx(b.value, abs=1e-8)
    assert 0 < a.value < math.inf


def test_participation_rate(participation):
    # above q = 1/2 everyone enters, so low-type entry mass 1 - q <= 0.2 needs q >= 0.8
    ev = EventSpec.pair_mass(0, 1, "<=", 0.2)
    res = rate_function(participation, lambda_q(0.75), ev,
                        eq_map=lambda lam: participation_equilibria(lam[1]))
    assert res.value == pytest.approx(kl_highprec([0.2, 0.8], [0.25, 0.75]), abs=1e-8)
    assert res.minimizers[0][0][1] == pytest.approx(0.8, abs=1e-9)


def test_exact_probability_matches_binomial_oracle(scenario):
    for n in (1, 7, 30, 200, 4000):
        oracle = binomial_log_tail(n, Q0, lambda k: entrant_share(n, k) <= Fraction(1, 2))
        assert exact_log_probability(scenario, lambda_q(Q0), share_at_most(0.5), n) == pytest.approx(
            oracle, rel=1e-10, abs=1e-12)


def test_decay_slope_at_4000(scenario):
    (row,) = decay_slope_experiment(scenario, lambda_q(Q0), share_at_most(0.5), [4000])
    assert abs(row.slope - relative_entropy(lambda_q(0.5), lambda_q(Q0))) <= 0.005


def test_decay_trivial_cases(scenario):
    (row,) = decay_slope_experiment(scenario, lambda_q(Q0), share_at_most(2 / 3), [50])
    assert row.log_prob == pytest.approx(0.0, abs=1e-12) and row.slope == pytest.approx(0.0, abs=1e-12)
    # two players: one enters unless both are low types
    (two,) = decay_slope_experiment(scenario, lambda_q(Q0), EventSpec.action_share(1, ">=", 0.5), [2])
    assert two.log_prob == pytest.approx(math.log(8 / 9), abs=1e-14)


def test_slopes_cauchy(scenario):
    ns = [125, 250, 500, 1000, 2000]
    slopes = [r.slope for r in decay_slope_experiment(scenario, lambda_q(Q0), share_at_most(0.5), ns)]
    diffs = np.abs(np.diff(slopes))
    assert np.all(np.diff(diffs) < 0)


def test_mc_mode_wilson_contains_exact(scenario):
    ev = share_at_most(0.5)
    for n in (10, 25, 50, 100, 200):
        exact = exact_log_probability(scenario, lambda_q(Q0), ev, n)
        (row,) = decay_slope_experiment(scenario, lambda_q(Q0), ev, [n], mode="mc", budget=4000, seed=7)
        assert row.ci_low <= exact <= row.ci_high, n


def test_mc_mode_requires_budget(scenario):
    with pytest.raises(ValueError):
        decay_slope_experiment(scenario, lambda_q(Q0), share_at_most(0.5), [10], mode="mc", budget=0)
    with pytest.raises(ValueError):
        decay_slope_experiment(scenario, lambda_q(Q0), share_at_most(0.5), [10], mode="guess")


def test_conditional_limit(scenario):
    ev = share_at_most(0.5)
    limit = [analytic_cournot_nash(0.5)]
    out = [conditional_limit_experiment(scenario, lambda_q(Q0), ev, n, 0.05, limit) for n in (100, 250, 500)]
    tails = [t for _, t in out]
    assert tails[0] > tails[1] > tails[2]
    assert out[-1][0] <= 0.05


def test_conditional_limit_impossible_event(scenario):
    with pytest.raises(ValueError):
        conditional_limit_experiment(scenario, lambda_q(Q0), EventSpec.action_share(1, ">=", 0.9), 30,
                                     0.05, [analytic_cournot_nash(0.5)])


def test_wilson_interval():
    lo, hi = wilson_interval(5, 100)
    z = 1.959963984540054
    p, n = 0.05, 100
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
    assert lo == pytest.approx(centre - half, abs=1e-12)
    assert hi == pytest.approx(centre + half, abs=1e-12)
    assert wilson_interval(0, 10)[0] == 0.0


def test_trial_seed_stable():
    a = trial_seed(3, 17).random(4)
    b = trial_seed(3, 17).random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, trial_seed(3, 18).random(4))


def test_rare_equilibria_small_budget(participation):
    ev = EventSpec.pair_mass(0, 1, "<=", 0.2)
    em = lambda lam: participation_equilibria(lam[1])
    rows, rate = rare_equilibrium_probability(participation, lambda_q(0.75), ev, [10, 20], budget=400,
                                              seed=1, eq_map=em)
    assert rate.value > 0
    assert rows[0].freq >= rows[1].freq
    for row in rows:
        assert row.ci_high <= 10 * row.bound


def test_rare_equilibria_trivial_events(participation):
    em = lambda lam: participation_equilibria(lam[1])
    everywhere = EventSpec.pair_mass(1, 1, ">=", 0.0)
    rows, rate = rare_equilibrium_probability(participation, lambda_q(0.75), everywhere, [10], 200,
                                              eq_map=em)
    assert rate.value == 0.0 and rows[0].freq == 1.0
    never = EventSpec.pair_mass(1, 0, ">=", 0.5)  # high types always enter
    rows, rate = rare_equilibrium_probability(participation, lambda_q(0.75), never, [10], 200, eq_map=em)
    assert rate.value == math.inf and rows[0].freq == 0.0 and rows[0].bound == 0.0
