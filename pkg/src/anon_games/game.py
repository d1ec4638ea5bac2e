"""Anonymous games with finite type and action sets.

A game is an objective ``F(m, w, x)`` (the cost to a type-``w`` player
choosing action ``x`` when the population plays ``m``) together with a
constraint map ``C(w)`` of admissible actions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import least_squares

from .measures import TypeActionDistribution, check_type_distribution, tv_distance

SUPPORT_ATOL = 1e-12


class PreconditionError(ValueError):
    """An input violates a mathematical precondition of the requested operation."""


class NashCertificate(NamedTuple):
    ok: bool
    max_gain: float


def _as_mass(m) -> np.ndarray:
    return m.mass if isinstance(m, TypeActionDistribution) else np.asarray(m, dtype=float)


class GameSpec:
    """An anonymous game on ``num_types x num_actions``.

    Parameters
    ----------
    num_types, num_actions : int
    constraints : sequence of sequences
        ``constraints[w]`` lists the admissible action indices of type ``w``.
    objective : callable, optional
        ``objective(mass, w, x) -> float``. Subclasses may override
        :meth:`costs` instead.
    """

    #: best-response dynamics terminate (exact potential game)
    is_potential = False
    #: the objective is a congestion cost, so Frank-Wolfe applies
    is_congestion = False

    def __init__(self, num_types: int, num_actions: int,
                 constraints: Sequence[Sequence[int]],
                 objective: Callable[[np.ndarray, int, int], float] | None = None,
                 name: str = "game"):
        if len(constraints) != num_types:
            raise ValueError(f"{len(constraints)} constraint lists for {num_types} types")
        cons = []
        for w, actions in enumerate(constraints):
            actions = tuple(sorted({int(a) for a in actions}))
            if not actions:
                raise ValueError(f"type {w} has no admissible action")
            if actions[0] < 0 or actions[-1] >= num_actions:
                raise ValueError(f"type {w} lists an action outside 0..{num_actions - 1}")
            cons.append(actions)
        self.num_types = int(num_types)
        self.num_actions = int(num_actions)
        self.constraints = tuple(cons)
        self.admissible = np.zeros((num_types, num_actions), dtype=bool)
        for w, actions in enumerate(cons):
            self.admissible[w, list(actions)] = True
        self._objective = objective
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.num_types, self.num_actions

    def objective(self, mass, w: int, x: int) -> float:
        if self._objective is None:
            return float(self.costs(_as_mass(mass))[w, x])
        return float(self._objective(_as_mass(mass), w, x))

    def costs(self, mass) -> np.ndarray:
        """Matrix of ``F(m, w, x)`` over every (type, action) pair."""
        mass = _as_mass(mass)
        out = np.empty(self.shape)
        for w in range(self.num_types):
            for x in range(self.num_actions):
                out[w, x] = self._objective(mass, w, x)
        return out

    def unilateral_costs(self, mass, u: float) -> np.ndarray:
        """``D[w, x, y] = F(m + u(delta_(w,y) - delta_(w,x)), w, y)``.

        Entries for inadmissible x or y are left as ``nan``.
        """
        mass = _as_mass(mass)
        out = np.full((self.num_types, self.num_actions, self.num_actions), np.nan)
        if u == 0:
            c = self.costs(mass)
            for w, acts in enumerate(self.constraints):
                for x in acts:
                    out[w, x, list(acts)] = c[w, list(acts)]
            return out
        for w, acts in enumerate(self.constraints):
            for x in acts:
                for y in acts:
                    shifted = mass.copy()
                    shifted[w, x] -= u
                    shifted[w, y] += u
                    out[w, x, y] = self.objective(shifted, w, y)
        return out

    def pair_gains(self, mass, u: float = 0.0) -> np.ndarray:
        """Deviation gain for every admissible pair; ``nan`` elsewhere."""
        mass = _as_mass(mass)
        c = self.costs(mass)
        d = self.unilateral_costs(mass, u)
        best = np.min(np.where(np.isnan(d), np.inf, d), axis=2)
        with np.errstate(invalid="ignore"):
            return np.where(self.admissible, c - best, np.nan)

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r}, types={self.num_types}, actions={self.num_actions})"


def deviation_gain(game: GameSpec, m, u: float, w: int, x: int) -> float:
    """Cost reduction available to a player of size ``u`` at pair (w, x)."""
    mass = _as_mass(m)
    if x not in game.constraints[w]:
        raise PreconditionError(f"action {x} is not admissible for type {w}")
    if not 0 <= u <= 1:
        raise ValueError("player size u must lie in [0, 1]")
    if u > 0 and mass[w, x] < u - SUPPORT_ATOL:
        raise PreconditionError(
            f"mass {mass[w, x]:.6g} at ({w}, {x}) is below the player size {u:.6g}")
    here = game.objective(mass, w, x)
    best = here
    for y in game.constraints[w]:
        if y == x:
            continue
        shifted = mass.copy()
        shifted[w, x] -= u
        shifted[w, y] += u
        best = min(best, game.objective(shifted, w, y))
    return here - best


def is_cournot_nash(game: GameSpec, m, tol: float = 1e-9) -> NashCertificate:
    """Check that a.e. type-action pair of ``m`` is an admissible best response."""
    mass = _as_mass(m)
    support = mass > SUPPORT_ATOL
    if np.any(support & ~game.admissible):
        return NashCertificate(False, float("inf"))
    gains = game.pair_gains(mass, 0.0)
    worst = float(np.max(gains[support])) if support.any() else 0.0
    return NashCertificate(worst <= tol, worst)


def nash_gap(game: GameSpec, m) -> float:
    """Mass-weighted best-response gap; zero exactly at Cournot-Nash equilibria."""
    mass = _as_mass(m)
    c = game.costs(mass)
    best = np.min(np.where(game.admissible, c, np.inf), axis=1)
    return float(np.sum(np.where(game.admissible, mass * (c - best[:, None]), 0.0)))


@dataclass(frozen=True)
class AdmissibleSet:
    """The set A(lambda) of admissible distributions with type marginal lambda."""

    lam: np.ndarray
    admissible: np.ndarray

    def contains(self, m, atol: float = 1e-9) -> bool:
        mass = _as_mass(m)
        return (np.all(mass[~self.admissible] <= atol)
                and np.allclose(mass.sum(axis=1), self.lam, atol=atol))

    def uniform(self) -> np.ndarray:
        rows = self.admissible / self.admissible.sum(axis=1, keepdims=True)
        return rows * self.lam[:, None]

    def random_point(self, rng: np.random.Generator) -> np.ndarray:
        out = np.zeros(self.admissible.shape)
        for w in range(out.shape[0]):
            acts = np.flatnonzero(self.admissible[w])
            out[w, acts] = rng.dirichlet(np.ones(acts.size)) * self.lam[w]
        return out


def admissible_project(lam, constraints) -> AdmissibleSet:
    if isinstance(constraints, GameSpec):
        mask = constraints.admissible
    else:
        num_actions = 1 + max(max(c) for c in constraints)
        mask = np.zeros((len(constraints), num_actions), dtype=bool)
        for w, acts in enumerate(constraints):
            mask[w, list(acts)] = True
    lam = check_type_distribution(lam, mask.shape[0])
    mask = mask.copy()
    mask.setflags(write=False)
    return AdmissibleSet(lam, mask)


def vertex_for_scores(A: AdmissibleSet, scores) -> TypeActionDistribution:
    """Extreme point of A(lambda) minimising the linear functional ``<scores, m>``.

    Each type puts all of its mass on its cheapest admissible action;
    ties go to the lowest action index.
    """
    return TypeActionDistribution(_vertex_mass(A, scores))


def _vertex_mass(A: AdmissibleSet, scores) -> np.ndarray:
    scores = np.asarray(scores, dtype=float)
    masked = np.where(A.admissible, scores, np.inf)
    best = np.argmin(masked, axis=1)  # argmin returns the first minimiser
    out = np.zeros(A.admissible.shape)
    out[np.arange(out.shape[0]), best] = A.lam
    return out


# brute-force enumeration of Cournot-Nash equilibria

MAX_BRUTEFORCE_CELLS = 12
MAX_GRID_POINTS = 2_000_000


def _compositions(total: int, parts: int) -> np.ndarray:
    """All non-negative integer vectors of length ``parts`` summing to ``total``."""
    if parts == 1:
        return np.array([[total]], dtype=np.int64)
    rows = []
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        row = []
        for b in bars:
            row.append(b - prev - 1)
            prev = b
        row.append(total + parts - 1 - prev - 1)
        rows.append(row)
    return np.array(rows, dtype=np.int64)


def _polish(game: GameSpec, lam: np.ndarray, m0: np.ndarray, supports) -> np.ndarray | None:
    """Solve the indifference equations on a fixed support, starting from m0."""
    free = []  # (w, actions in support)
    base = np.zeros_like(m0)
    for w, sup in enumerate(supports):
        if lam[w] <= 0:
            continue
        if len(sup) == 1:
            base[w, sup[0]] = lam[w]
        else:
            free.append((w, list(sup)))
    if not free:
        return base

    def unpack(z):
        mass = base.copy()
        i = 0
        for w, sup in free:
            k = len(sup) - 1
            mass[w, sup[:-1]] = z[i:i + k]
            mass[w, sup[-1]] = lam[w] - z[i:i + k].sum()
            i += k
        return mass

    def residuals(z):
        mass = unpack(z)
        c = game.costs(np.clip(mass, 0, None))
        res = []
        for w, sup in free:
            res.extend(c[w, sup[:-1]] - c[w, sup[-1]])
            res.append(1e3 * min(0.0, mass[w, sup[-1]]))
        return np.asarray(res)

    z0, lo, hi = [], [], []
    for w, sup in free:
        share = m0[w, sup]
        share = share / share.sum() * lam[w] if share.sum() > 0 else np.full(len(sup), lam[w] / len(sup))
        z0.extend(share[:-1])
        lo.extend([0.0] * (len(sup) - 1))
        hi.extend([lam[w]] * (len(sup) - 1))
    z0 = np.clip(np.asarray(z0), lo, hi)
    try:
        sol = least_squares(residuals, z0, bounds=(lo, hi), xtol=1e-15, ftol=1e-15, gtol=1e-15,
                            max_nfev=200)
    except ValueError:
        return None
    mass = np.clip(unpack(sol.x), 0, None)
    mass[mass < SUPPORT_ATOL] = 0.0
    rows = mass.sum(axis=1)
    ok = rows > 0
    mass[ok] *= (lam[ok] / rows[ok])[:, None]
    return mass


def enumerate_cournot_nash_bruteforce(game: GameSpec, lam, grid_steps: int = 200,
                                      tol: float = 1e-8) -> list[TypeActionDistribution]:
    """All Cournot-Nash equilibria with type marginal ``lam``, by exhaustive grid scan.

    Every grid point of A(lambda) at resolution ``1/grid_steps`` is scored by
    its Nash gap. Grid points that already certify are kept; every other
    local minimum of the gap is polished by solving the indifference
    equations on nearby supports, and kept if the result certifies at ``tol``.
    Results are pairwise more than 1e-6 apart in total variation.
    """
    if game.num_types * game.num_actions > MAX_BRUTEFORCE_CELLS:
        raise PreconditionError(
            f"grid enumeration needs |W|*|X| <= {MAX_BRUTEFORCE_CELLS}, "
            f"got {game.num_types * game.num_actions}")
    lam = check_type_distribution(lam, game.num_types)
    per_type = []
    for w, acts in enumerate(game.constraints):
        if lam[w] > 0:
            per_type.append(_compositions(grid_steps, len(acts)))
        else:
            per_type.append(np.zeros((1, len(acts)), dtype=np.int64))
    sizes = [len(c) for c in per_type]
    total = int(np.prod(sizes))
    if total > MAX_GRID_POINTS:
        raise PreconditionError(f"grid has {total} points (limit {MAX_GRID_POINTS})")

    # neighbour moves inside each type's composition list
    lookups = [{tuple(row): i for i, row in enumerate(c)} for c in per_type]
    strides = np.cumprod([1] + sizes[::-1][:-1])[::-1]

    def mass_at(idx_tuple):
        mass = np.zeros(game.shape)
        for w, i in enumerate(idx_tuple):
            mass[w, list(game.constraints[w])] = per_type[w][i] / grid_steps * lam[w]
        return mass

    index_tuples = list(itertools.product(*[range(s) for s in sizes]))
    masses = np.array([mass_at(t) for t in index_tuples])
    costs = np.array([game.costs(mm) for mm in masses])
    adm = game.admissible
    best = np.min(np.where(adm, costs, np.inf), axis=2)
    excess = np.where(adm, costs - best[:, :, None], 0.0)
    gaps = np.sum(masses * excess, axis=(1, 2))
    viol = np.max(np.where(masses > SUPPORT_ATOL, excess, 0.0), axis=(1, 2))

    def neighbours(flat):
        t = index_tuples[flat]
        for w in range(game.num_types):
            row = per_type[w][t[w]]
            for a in range(row.size):
                if row[a] == 0:
                    continue
                for b in range(row.size):
                    if a == b:
                        continue
                    nrow = row.copy()
                    nrow[a] -= 1
                    nrow[b] += 1
                    j = lookups[w][tuple(nrow)]
                    yield flat + (j - t[w]) * int(strides[w])

    found: list[np.ndarray] = []
    certified = viol <= tol
    for flat in np.flatnonzero(certified):
        found.append(masses[flat])
    polished: list[np.ndarray] = []
    for flat in np.flatnonzero(~certified):
        nbrs = list(neighbours(flat))
        if any(gaps[j] < gaps[flat] for j in nbrs):
            continue
        spread = max((np.max(np.abs(costs[j] - costs[flat])[adm]) for j in nbrs), default=0.0)
        delta = 2.0 * spread + 1e-9
        m0 = masses[flat]
        options = []
        for w, acts in enumerate(game.constraints):
            c = costs[flat][w, list(acts)]
            near = [a for a, cv in zip(acts, c) if cv - c.min() <= delta]
            subsets = [s for r in range(1, len(near) + 1) for s in itertools.combinations(near, r)]
            options.append(subsets)
        combos = list(itertools.product(*options))
        if len(combos) > 256:
            combos = [tuple(tuple(o[-1]) for o in options)]
        for supports in combos:
            cand = _polish(game, lam, m0, supports)
            if cand is None or not is_cournot_nash(game, cand, tol).ok:
                continue
            if any(tv_distance(cand, p) <= 1e-6 for p in polished + found):
                continue
            polished.append(cand)

    out = [TypeActionDistribution(m, validate=False) for m in found + polished]
    out.sort(key=lambda d: tuple(np.round(d.mass.ravel(), 12)))
    return out
