import itertools

import numpy as np
import pytest

from anon_games import (ActionProfile, ConvergenceError, EntryGame, PreconditionError,
                        TypeActionDistribution, best_response_dynamics, enumerate_nash_set,
                        epsilon_nash_check, sample_nash)
from anon_games.finite_nash import enumerate_nash_profiles, num_count_classes
from oracles import entry_nash_profiles, pigou_nash_counts


def pigou_keys(pigou, ks, n):
    return {TypeActionDistribution.from_counts([[n - k, k]]).key() for k in ks}


def test_profile_validation(pigou):
    with pytest.raises(ValueError):
        ActionProfile((0, 1), (0,))
    with pytest.raises(ValueError):
        ActionProfile((), ())
    with pytest.raises(PreconditionError):
        ActionProfile((5,), (0,)).validate(pigou)


@pytest.mark.parametrize("n", range(1, 9))
def test_pigou_nash_set_matches_profile_oracle(pigou, n):
    ns = enumerate_nash_set(pigou, [0] * n)
    assert ns.exhaustive and ns.n == n
    assert ns.keys() == pigou_keys(pigou, pigou_nash_counts(n), n)


def test_pigou_small_examples(pigou):
    assert pigou_nash_counts(2) == {1, 2}
    assert pigou_nash_counts(4) == {3, 4}


@pytest.mark.parametrize("variant,values,slope", [("standard", (1.0, 2.0), -3.0),
                                                  ("participation", (-1.0, 1.0), 2.0)])
def test_entry_nash_set_matches_profile_oracle(variant, values, slope):
    game = EntryGame(variant)
    for n in range(1, 7):
        for types in itertools.combinations_with_replacement((0, 1), n):
            expected = {np.array(K).tobytes() for K in entry_nash_profiles(types, slope, values)}
            got = {m.counts.astype(np.int64).tobytes() for m in enumerate_nash_set(game, types)}
            assert got == expected, (variant, types)


def test_two_high_types_only_one_enters(entry):
    ns = enumerate_nash_set(entry, [1, 1])
    assert [m.counts.tolist() for m in ns] == [[[0, 0], [1, 1]]]


def test_count_classes_agree_with_profiles(braess, pigou, entry):
    for game, types in [(braess, [0] * 4), (pigou, [0] * 5), (entry, [0, 1, 1, 0, 1])]:
        assert enumerate_nash_set(game, types).keys() == enumerate_nash_profiles(game, types).keys()


def test_enumeration_guard(grid):
    assert num_count_classes(grid, np.array([200, 200])) > 2 ** 20
    with pytest.raises(PreconditionError):
        enumerate_nash_set(grid, [0] * 200 + [1] * 200)


def test_epsilon_nash(pigou):
    split = ActionProfile((0, 1), (0, 0))
    assert epsilon_nash_check(pigou, split).ok
    both_e1 = ActionProfile((0, 0), (0, 0))
    cert = epsilon_nash_check(pigou, both_e1)
    assert not cert.ok and cert.max_gain == pytest.approx(0.5)
    assert epsilon_nash_check(pigou, both_e1, epsilon=0.5).ok


@pytest.mark.parametrize("seed", range(5))
def test_brd_reaches_nash_with_decreasing_potential(braess, pigou, grid, seed):
    for net, types in [(pigou, [0] * 4), (braess, [0] * 7), (grid, [0] * 5 + [1] * 3)]:
        trace = []
        prof = best_response_dynamics(net, types, seed=seed, trace=trace)
        assert epsilon_nash_check(net, prof).ok
        assert all(b < a for a, b in zip(trace, trace[1:]))
        assert prof.empirical(net).key() in enumerate_nash_set(net, types).keys()


def test_brd_pigou_four(pigou):
    outcomes = {best_response_dynamics(pigou, [0] * 4, seed=s).actions.count(1) for s in range(20)}
    assert outcomes <= {3, 4}


def test_brd_rejects_non_potential(entry):
    with pytest.raises(PreconditionError):
        best_response_dynamics(entry, [0, 1])


def test_brd_sweep_limit(braess):
    with pytest.raises(ConvergenceError) as info:
        best_response_dynamics(braess, [0] * 30, seed=1, max_sweeps=0)
    assert info.value.max_gain >= 0


def test_sample_nash_subset(braess, grid):
    for net, types in [(braess, [0] * 6), (grid, [0] * 4 + [1] * 2)]:
        sampled = sample_nash(net, types, num_restarts=8, seed=3)
        assert not sampled.exhaustive and len(sampled) >= 1
        assert sampled.keys() <= enumerate_nash_set(net, types).keys()
