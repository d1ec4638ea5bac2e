"""Two-action entry games where payoffs depend on the population only through the entry share.

Action 1 means "enter", action 0 means "stay out". With ``p = m^x{1}``,

* the standard game has types {1, 2} and cost ``F(m, w, 1) = 3p - w``;
* the participation game has types {-1, 1} and cost ``F(m, w, 1) = -(2p + w)``;

and ``F(m, w, 0) = 0`` in both. Type index 0 is the low type, index 1
the high type, and ``lambda_q = (1 - q, q)`` puts mass q on the high type.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .game import GameSpec, is_cournot_nash
from .measures import TypeActionDistribution, tv_distance

VARIANTS = {
    "standard": {"type_values": (1.0, 2.0), "slope": -3.0},
    "participation": {"type_values": (-1.0, 1.0), "slope": 2.0},
}


class EntryGame(GameSpec):
    """Payoff ``x (slope * p + w)`` for action x and type value w; cost is its negative."""

    def __init__(self, variant: str = "standard"):
        if variant not in VARIANTS:
            raise ValueError(f"unknown entry-game variant {variant!r}")
        super().__init__(2, 2, [(0, 1), (0, 1)], name=f"entry-{variant}")
        self.variant = variant
        self.type_values = np.array(VARIANTS[variant]["type_values"])
        self.slope = VARIANTS[variant]["slope"]

    def entry_cost(self, p: float) -> np.ndarray:
        """Cost of entering for each type when a share ``p`` enters."""
        return -(self.slope * p + self.type_values)

    def costs(self, mass) -> np.ndarray:
        mass = mass.mass if isinstance(mass, TypeActionDistribution) else np.asarray(mass, float)
        p = mass[:, 1].sum()
        out = np.zeros((2, 2))
        out[:, 1] = self.entry_cost(p)
        return out

    def objective(self, mass, w: int, x: int) -> float:
        return float(self.costs(mass)[w, x])

    def unilateral_costs(self, mass, u: float) -> np.ndarray:
        mass = mass.mass if isinstance(mass, TypeActionDistribution) else np.asarray(mass, float)
        p = mass[:, 1].sum()
        out = np.zeros((2, 2, 2))
        # a player switching x -> y changes the entry share by u * (y - x)
        out[:, 0, 1] = self.entry_cost(p + u)
        out[:, 1, 1] = self.entry_cost(p)
        return out


def lambda_q(q: float) -> np.ndarray:
    return np.array([1.0 - q, q])


def analytic_cournot_nash(q: float) -> TypeActionDistribution:
    """The unique Cournot-Nash equilibrium of the standard entry game at lambda_q."""
    if not 0 <= q <= 1:
        raise ValueError("q must lie in [0, 1]")
    if q <= 1 / 3:
        mass = [[2 / 3, 1 / 3 - q], [0.0, q]]
    elif q < 2 / 3:
        mass = [[1 - q, 0.0], [0.0, q]]
    else:
        mass = [[1 - q, 0.0], [q - 2 / 3, 2 / 3]]
    return TypeActionDistribution(mass)


def standard_entrants(n_low: int, n_high: int) -> tuple[int, int]:
    """Number of entering (low, high) type players in the constructed n-player equilibrium.

    With q the high-type share: for 1/3 <= q <= 2/3 exactly the high types
    enter; for q < 1/3 all high types and floor(n(1/3 - q)) low types enter;
    for q > 2/3 only floor(2n/3) high types enter.
    """
    n = n_low + n_high
    if 3 * n_high < n:
        return (n - 3 * n_high) // 3, n_high
    if 3 * n_high <= 2 * n:
        return 0, n_high
    return 0, (2 * n) // 3


def construct_n_player_equilibrium(type_vector: Sequence[int], game: EntryGame | None = None):
    """An explicit pure Nash equilibrium of the standard entry game.

    ``type_vector`` holds type indices (0 for w = 1, 1 for w = 2). Among
    players of a type, the entrants are the ones with the lowest indices.
    """
    from .finite_nash import ActionProfile, epsilon_nash_check

    types = np.asarray(type_vector, dtype=np.int64)
    if types.size == 0:
        raise ValueError("empty type vector")
    if np.any((types < 0) | (types > 1)):
        raise ValueError("entry-game type indices are 0 or 1")
    k_low, k_high = standard_entrants(int(np.sum(types == 0)), int(np.sum(types == 1)))
    actions = np.zeros(types.size, dtype=np.int64)
    for w, k in ((0, k_low), (1, k_high)):
        actions[np.flatnonzero(types == w)[:k]] = 1
    profile = ActionProfile(tuple(int(a) for a in actions), tuple(int(t) for t in types))
    cert = epsilon_nash_check(game or EntryGame("standard"), profile, 0.0)
    if not cert.ok:
        raise AssertionError(f"constructed profile is not Nash (gain {cert.max_gain})")
    return profile


def standard_outcome_counts(n_low: int, n_high: int) -> np.ndarray:
    """Count matrix of the constructed equilibrium, without building the profile."""
    k_low, k_high = standard_entrants(n_low, n_high)
    return np.array([[n_low - k_low, k_low], [n_high - k_high, k_high]], dtype=np.int64)


def share_equilibria(game: EntryGame, lam, scan_step: float = 1e-6,
                     tol: float = 1e-9) -> list[TypeActionDistribution]:
    """All Cournot-Nash equilibria of an entry-share game, via the scalar entry share p.

    Given p, type w strictly prefers to enter when its entry cost is
    negative. An equilibrium share p must lie between the mass of strict
    entrants and the mass of strict-or-indifferent entrants. Indifference
    points are located by a scan of step ``scan_step`` refined by
    bisection; between consecutive indifference points the strict-entrant
    mass is constant and is itself a fixed point if it lies in that range.
    """
    lam = np.asarray(lam, dtype=float)
    grid = np.linspace(0.0, 1.0, int(round(1 / scan_step)) + 1)
    g = -(game.slope * grid[:, None] + game.type_values[None, :])  # entry cost per type
    roots = []
    for w in range(2):
        if lam[w] <= 0:
            continue
        vals = g[:, w]
        for i in np.flatnonzero(vals == 0):
            roots.append(grid[i])
        for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0):
            roots.append(brentq(lambda p: game.entry_cost(p)[w], grid[i], grid[i + 1], xtol=1e-15))
    roots = sorted(set(roots))

    candidates = []
    for p in roots:
        cost = game.entry_cost(p)
        strict = (cost < -tol) & (lam > 0)
        indiff = (np.abs(cost) <= tol) & (lam > 0)
        lo = lam[strict].sum()
        hi = lo + lam[indiff].sum()
        if lo - tol <= p <= hi + tol:
            mass = np.zeros((2, 2))
            mass[strict, 1] = lam[strict]
            fill = min(max(p - lo, 0.0), lam[indiff].sum())
            for w in np.flatnonzero(indiff):
                take = min(fill, lam[w])
                mass[w, 1] = take
                fill -= take
            mass[:, 0] = lam - mass[:, 1]
            candidates.append(mass)
    edges = [0.0] + roots + [1.0]
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        mid = 0.5 * (a + b)
        enters = (game.entry_cost(mid) < 0) & (lam > 0)
        p = lam[enters].sum()
        inside = (a < p < b) or (p == a == 0.0) or (p == b == 1.0)
        if inside:
            mass = np.zeros((2, 2))
            mass[enters, 1] = lam[enters]
            mass[:, 0] = lam - mass[:, 1]
            candidates.append(mass)

    out: list[TypeActionDistribution] = []
    for mass in candidates:
        m = TypeActionDistribution(mass)
        if not is_cournot_nash(game, m, tol).ok:
            continue
        if any(tv_distance(m, o) <= 1e-9 for o in out):
            continue
        out.append(m)
    out.sort(key=lambda d: -d.mass[:, 1].sum())
    return out


def participation_equilibria(q: float) -> list[TypeActionDistribution]:
    """All Cournot-Nash equilibria of the participation game at lambda_q."""
    if not 0 <= q <= 1:
        raise ValueError("q must lie in [0, 1]")
    # entry costs are linear in p, so a coarse scan already brackets every root
    return share_equilibria(EntryGame("participation"), lambda_q(q), scan_step=1e-3)
