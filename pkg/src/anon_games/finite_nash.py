"""Pure Nash equilibria of the n-player game.

Players are anonymous, so an equilibrium is determined up to
relabelling by its count matrix ``K[w, x]`` (number of type-w players on
action x). Exhaustive enumeration therefore walks count matrices rather
than the ``|X|^n`` raw profiles; :func:`enumerate_nash_profiles` keeps the
raw walk for small cross-checks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .game import GameSpec, NashCertificate, PreconditionError, _compositions
from .measures import TypeActionDistribution, empirical_distribution

MAX_CLASSES = 2 ** 20
NASH_TOL = 1e-12


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, max_gain: float):
        super().__init__(message)
        self.max_gain = max_gain


@dataclass(frozen=True)
class ActionProfile:
    actions: tuple[int, ...]
    types: tuple[int, ...]

    def __post_init__(self):
        if len(self.actions) != len(self.types):
            raise ValueError("actions and types must have the same length")
        if not self.actions:
            raise ValueError("a profile needs at least one player")

    @property
    def n(self) -> int:
        return len(self.actions)

    def validate(self, game: GameSpec) -> None:
        for i, (w, x) in enumerate(zip(self.types, self.actions)):
            if x not in game.constraints[w]:
                raise PreconditionError(f"player {i} plays inadmissible action {x} for type {w}")

    def empirical(self, game: GameSpec) -> TypeActionDistribution:
        return empirical_distribution(self.types, self.actions, game.shape)


@dataclass
class NashSet:
    distributions: list[TypeActionDistribution]
    n: int
    exhaustive: bool

    def __len__(self):
        return len(self.distributions)

    def __iter__(self):
        return iter(self.distributions)

    def keys(self) -> set[bytes]:
        return {d.key() for d in self.distributions}


def type_counts(type_vector: Sequence[int], num_types: int) -> np.ndarray:
    return np.bincount(np.asarray(type_vector, dtype=np.int64), minlength=num_types)


def class_gains(game: GameSpec, m: TypeActionDistribution) -> np.ndarray:
    """Deviation gain at player size 1/n for every admissible pair."""
    return game.pair_gains(m, 1.0 / m.denominator)


def is_nash_class(game: GameSpec, m: TypeActionDistribution, epsilon: float = 0.0) -> NashCertificate:
    gains = class_gains(game, m)
    occupied = m.counts > 0
    worst = float(np.max(gains[occupied]))
    return NashCertificate(worst <= epsilon + NASH_TOL, worst)


def epsilon_nash_check(game: GameSpec, profile: ActionProfile, epsilon: float = 0.0) -> NashCertificate:
    """Whether no player can cut its cost by more than ``epsilon`` by deviating alone."""
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    profile.validate(game)
    return is_nash_class(game, profile.empirical(game), epsilon)


def count_classes(game: GameSpec, counts_by_type: np.ndarray):
    """Yield every admissible count matrix with the given per-type counts."""
    per_type = []
    for w, acts in enumerate(game.constraints):
        per_type.append([(acts, row) for row in _compositions(int(counts_by_type[w]), len(acts))])
    for combo in itertools.product(*per_type):
        K = np.zeros(game.shape, dtype=np.int64)
        for w, (acts, row) in enumerate(combo):
            K[w, list(acts)] = row
        yield K


def num_count_classes(game: GameSpec, counts_by_type) -> int:
    from math import comb
    total = 1
    for w, acts in enumerate(game.constraints):
        total *= comb(int(counts_by_type[w]) + len(acts) - 1, len(acts) - 1)
    return total


def enumerate_nash_set(game: GameSpec, type_vector: Sequence[int]) -> NashSet:
    """Every empirical distribution induced by a pure Nash equilibrium."""
    counts = type_counts(type_vector, game.num_types)
    n = int(counts.sum())
    if n == 0:
        raise ValueError("empty type vector")
    total = num_count_classes(game, counts)
    if total > MAX_CLASSES:
        raise PreconditionError(f"{total} count classes exceed the enumeration limit {MAX_CLASSES}")
    found = []
    for K in count_classes(game, counts):
        m = TypeActionDistribution.from_counts(K)
        if is_nash_class(game, m).ok:
            found.append(m)
    return NashSet(found, n, True)


def enumerate_nash_profiles(game: GameSpec, type_vector: Sequence[int]) -> NashSet:
    """Literal brute force over all admissible action profiles (small n only)."""
    types = tuple(int(t) for t in type_vector)
    choices = [game.constraints[w] for w in types]
    total = int(np.prod([len(c) for c in choices], dtype=float))
    if total > MAX_CLASSES:
        raise PreconditionError(f"{total} profiles exceed the enumeration limit {MAX_CLASSES}")
    seen: dict[bytes, TypeActionDistribution] = {}
    for actions in itertools.product(*choices):
        profile = ActionProfile(tuple(actions), types)
        m = profile.empirical(game)
        if m.key() in seen:
            continue
        gains = class_gains(game, m)
        worst = max(gains[w, x] for w, x in zip(types, actions))
        if worst <= NASH_TOL:
            seen[m.key()] = m
    return NashSet(list(seen.values()), len(types), True)


def best_response_dynamics(net, type_vector: Sequence[int], seed: int = 0,
                           max_sweeps: int = 10_000, trace: list | None = None) -> ActionProfile:
    """Round-robin improving moves from a seeded random start.

    Each accepted move lowers the player's cost by more than 1e-12 and so
    lowers the Rosenthal potential by the same amount; the potential is
    checked after every move. Ties between best responses go to the
    lowest action index.
    """
    if not getattr(net, "is_potential", False) or not hasattr(net, "incidence"):
        raise PreconditionError(f"{net!r} is not a congestion game; best-response dynamics may cycle")
    types = np.asarray(type_vector, dtype=np.int64)
    n = types.size
    if n == 0:
        raise ValueError("empty type vector")
    rng = np.random.default_rng(seed)
    actions = np.array([net.constraints[w][rng.integers(len(net.constraints[w]))] for w in types])
    inc = net.incidence
    # cost table c_e(k/n) for k = 0..n+1, with cumulative sums for the potential
    ks = np.arange(n + 2) / n
    table = np.array([c(ks) for c in net.cost_curves], dtype=float)
    cum = np.concatenate([np.zeros((table.shape[0], 1)), np.cumsum(table[:, 1:], axis=1)], axis=1)
    elem = np.arange(inc.shape[1])
    ne = inc[actions].sum(axis=0).astype(np.int64)

    def potential():
        return float(cum[elem, ne].sum())

    phi = potential()
    if trace is not None:
        trace.append(phi)
    for _ in range(max_sweeps):
        moved = False
        for i in range(n):
            w, x = types[i], actions[i]
            ix = inc[x]
            here = table[elem, ne][ix].sum()
            best_y, best_cost = x, here
            for y in net.constraints[w]:
                if y == x:
                    continue
                iy = inc[y]
                alt = table[elem, ne][iy & ix].sum() + table[elem, ne + 1][iy & ~ix].sum()
                if alt < best_cost:
                    best_y, best_cost = y, alt
            if here - best_cost > NASH_TOL:
                ne -= ix
                ne += inc[best_y]
                actions[i] = best_y
                new_phi = potential()
                if not new_phi < phi:
                    raise AssertionError(f"Rosenthal potential did not decrease ({phi} -> {new_phi})")
                phi = new_phi
                if trace is not None:
                    trace.append(phi)
                moved = True
        if not moved:
            return ActionProfile(tuple(int(a) for a in actions), tuple(int(t) for t in types))
    profile = ActionProfile(tuple(int(a) for a in actions), tuple(int(t) for t in types))
    gain = epsilon_nash_check(net, profile).max_gain
    raise ConvergenceError(f"no equilibrium after {max_sweeps} sweeps (max gain {gain:.3g})", gain)


def sample_nash(game, type_vector: Sequence[int], num_restarts: int = 10, seed: int = 0) -> NashSet:
    """Distinct equilibria reached by seeded best-response runs (a subset of the Nash set)."""
    found: dict[bytes, TypeActionDistribution] = {}
    for r in range(num_restarts):
        run_seed = np.random.SeedSequence([seed, r]).generate_state(1)[0]
        profile = best_response_dynamics(game, type_vector, seed=int(run_seed))
        m = profile.empirical(game)
        found.setdefault(m.key(), m)
    dists = sorted(found.values(), key=lambda d: d.counts.ravel().tolist())
    return NashSet(dists, len(type_vector), False)
