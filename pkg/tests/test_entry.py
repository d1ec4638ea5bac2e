import itertools
from fractions import Fraction

import numpy as np
import pytest

from anon_games import (EntryGame, analytic_cournot_nash, construct_n_player_equilibrium,
                        enumerate_cournot_nash_bruteforce, enumerate_nash_set, epsilon_nash_check,
                        is_cournot_nash, lambda_q, participation_equilibria, share_equilibria,
                        tv_distance)
from anon_games.entry import standard_entrants, standard_outcome_counts
from oracles import entry_entrants, entry_matrix

QS = [0.0, 0.1, 0.25, 1 / 3, 0.4, 0.5, 0.6, 2 / 3, 0.75, 0.9, 1.0]


def test_unknown_variant():
    with pytest.raises(ValueError):
        EntryGame("auction")


@pytest.mark.parametrize("q", QS)
def test_closed_form_matches_rational_oracle(q):
    exact = np.array(entry_matrix(Fraction(q)), dtype=float)
    np.testing.assert_allclose(analytic_cournot_nash(q).mass, exact, atol=1e-15)


@pytest.mark.parametrize("q", [0.25, 0.5, 0.75])
def test_closed_form_values(q):
    expected = {0.25: [[2 / 3, 1 / 12], [0, 0.25]],
                0.5: [[0.5, 0], [0, 0.5]],
                0.75: [[0.25, 0], [1 / 12, 2 / 3]]}[q]
    np.testing.assert_allclose(analytic_cournot_nash(q).mass, expected, atol=1e-15)


def test_closed_form_rejects_bad_q():
    with pytest.raises(ValueError):
        analytic_cournot_nash(1.2)


@pytest.mark.parametrize("q", QS)
def test_share_equilibria_unique_for_standard(entry, q):
    eqs = share_equilibria(entry, lambda_q(q))
    assert len(eqs) == 1
    np.testing.assert_allclose(eqs[0].mass, analytic_cournot_nash(q).mass, atol=1e-9)


def test_entrants_match_rational_oracle():
    for n in range(1, 61):
        for n_high in range(n + 1):
            assert standard_entrants(n - n_high, n_high) == entry_entrants(n - n_high, n_high)


def test_construction_examples():
    assert construct_n_player_equilibrium([1, 1, 1]).actions.count(1) == 2
    prof = construct_n_player_equilibrium([0, 1])
    assert prof.actions == (0, 1)
    np.testing.assert_array_equal(standard_outcome_counts(6, 0), [[4, 2], [0, 0]])


def test_construction_is_nash_up_to_200(entry):
    for n in range(1, 201):
        for n_high in range(0, n + 1, max(1, n // 10)):
            K = standard_outcome_counts(n - n_high, n_high)
            from anon_games import TypeActionDistribution
            from anon_games.finite_nash import is_nash_class
            assert is_nash_class(entry, TypeActionDistribution.from_counts(K)).ok, (n, n_high)


def test_construction_input_errors():
    with pytest.raises(ValueError):
        construct_n_player_equilibrium([])
    with pytest.raises(ValueError):
        construct_n_player_equilibrium([0, 2])


def test_constructed_profile_in_nash_set(entry):
    for types in itertools.product((0, 1), repeat=5):
        prof = construct_n_player_equilibrium(types)
        assert epsilon_nash_check(entry, prof).ok
        assert prof.empirical(entry).key() in enumerate_nash_set(entry, types).keys()


@pytest.mark.parametrize("q,count", [(0.0, 3), (0.25, 3), (0.5, 2), (0.75, 1), (1.0, 1)])
def test_participation_equilibrium_count(participation, q, count):
    eqs = participation_equilibria(q)
    assert len(eqs) == count
    for m in eqs:
        assert is_cournot_nash(participation, m, 1e-9).ok
    # everyone entering is always an equilibrium
    assert any(np.allclose(m.mass, [[0, 1 - q], [0, q]]) for m in eqs)


@pytest.mark.parametrize("q", [0.0, 0.25, 0.5, 0.75])
def test_participation_matches_bruteforce(participation, q):
    brute = enumerate_cournot_nash_bruteforce(participation, lambda_q(q), grid_steps=40)
    fixed = participation_equilibria(q)
    assert len(brute) == len(fixed)
    for a, b in zip(sorted(brute, key=lambda d: d.mass[:, 1].sum()),
                    sorted(fixed, key=lambda d: d.mass[:, 1].sum())):
        np.testing.assert_allclose(a.mass, b.mass, atol=1e-8)


@pytest.mark.parametrize("q", [0.0, 0.25, 1 / 3, 0.5, 2 / 3, 0.9, 1.0])
def test_bruteforce_recovers_closed_form(entry, q):
    found = enumerate_cournot_nash_bruteforce(entry, lambda_q(q))
    assert len(found) == 1
    assert tv_distance(found[0], analytic_cournot_nash(q)) <= 1e-6
