"""scikit-learn style wrapper: fit a type distribution from samples, read off equilibria."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, column_or_1d

from .game import GameSpec, is_cournot_nash
from .measures import TypeActionDistribution, tv_distance


def check_type_vector(X, num_types: int) -> np.ndarray:
    """Coerce samples of type indices (shape ``(n,)`` or ``(n, 1)``) to a 1-d int array."""
    arr = check_array(X, ensure_2d=False, dtype=None)
    arr = column_or_1d(arr)
    if arr.size and not np.all(np.equal(np.mod(arr, 1), 0)):
        raise ValueError("type samples must be integer indices")
    arr = arr.astype(np.int64)
    if np.any((arr < 0) | (arr >= num_types)):
        raise ValueError(f"type indices must lie in 0..{num_types - 1}")
    return arr


def resolve_game(game) -> GameSpec:
    """Accept a GameSpec, a bundled scenario name or a network/entry config dict."""
    if isinstance(game, GameSpec):
        return game
    from .config import SCENARIOS, build_game
    if isinstance(game, str):
        if game not in SCENARIOS:
            raise ValueError(f"unknown scenario {game!r}")
        if game.startswith("entry-"):
            return build_game({"entry": game.split("-", 1)[1]})
        return build_game({"network": game})
    return build_game(game)


class CournotNashEstimator(BaseEstimator, TransformerMixin):
    """Estimate the type distribution from samples and solve for the nonatomic equilibrium.

    Parameters
    ----------
    game : GameSpec or str
        The game, or a bundled scenario name such as ``"pigou"`` or
        ``"entry-standard"``.
    gap_tol : float
        Frank-Wolfe duality-gap threshold for congestion networks.
    seed : int
        Seed for best-response dynamics in :meth:`predict`.

    Attributes
    ----------
    type_distribution_ : ndarray of shape (num_types,)
    equilibria_ : list of TypeActionDistribution
    equilibrium_ : TypeActionDistribution
        The first entry of ``equilibria_``.
    """

    def __init__(self, game="entry-standard", gap_tol: float = 1e-9, seed: int = 0):
        self.game = game
        self.gap_tol = gap_tol
        self.seed = seed

    def _solve(self, game, lam):
        if getattr(game, "variant", None) is not None:
            from .entry import share_equilibria
            return share_equilibria(game, lam)
        if getattr(game, "is_congestion", False):
            from .nonatomic import SolverConfig, solve_cournot_nash
            return [solve_cournot_nash(game, lam, SolverConfig(gap_tol=self.gap_tol)).m_star]
        from .game import enumerate_cournot_nash_bruteforce
        return enumerate_cournot_nash_bruteforce(game, lam)

    def fit(self, X, y=None):
        game = resolve_game(self.game)
        types = check_type_vector(X, game.num_types)
        if types.size == 0:
            raise ValueError("need at least one type sample")
        lam = np.bincount(types, minlength=game.num_types) / types.size
        self.game_ = game
        self.type_distribution_ = lam
        self.equilibria_ = self._solve(game, lam)
        if not self.equilibria_:
            raise RuntimeError("no equilibrium found at the fitted type distribution")
        self.equilibrium_ = self.equilibria_[0]
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        """Equilibrium mixed action of each sample's type: rows of ``m(w, .) / lambda(w)``."""
        check_is_fitted(self)
        types = check_type_vector(X, self.game_.num_types)
        m = self.equilibrium_.mass
        rows = m.sum(axis=1, keepdims=True)
        cond = np.divide(m, rows, out=np.zeros_like(m), where=rows > 0)
        return cond[types]

    def predict(self, X) -> np.ndarray:
        """Actions of a pure Nash equilibrium of the n-player game with these types."""
        check_is_fitted(self)
        game = self.game_
        types = check_type_vector(X, game.num_types)
        if getattr(game, "variant", None) == "standard":
            from .entry import construct_n_player_equilibrium
            return np.array(construct_n_player_equilibrium(types, game).actions)
        if getattr(game, "is_potential", False) and hasattr(game, "incidence"):
            from .finite_nash import best_response_dynamics
            return np.array(best_response_dynamics(game, types, seed=self.seed).actions)
        from .finite_nash import count_classes, is_nash_class, type_counts
        for K in count_classes(game, type_counts(types, game.num_types)):
            if is_nash_class(game, TypeActionDistribution.from_counts(K)).ok:
                actions = np.empty(types.size, dtype=np.int64)
                for w in range(game.num_types):
                    idx = np.flatnonzero(types == w)
                    actions[idx] = np.repeat(np.arange(game.num_actions), K[w])
                return actions
        raise RuntimeError("the n-player game has no pure Nash equilibrium for these types")

    def score(self, X, y=None) -> float:
        """Negative TV distance between the predicted n-player outcome and the fitted equilibrium."""
        from .measures import empirical_distribution
        types = check_type_vector(X, self.game_.num_types)
        emp = empirical_distribution(types, self.predict(types), self.game_.shape)
        return -min(tv_distance(emp, m) for m in self.equilibria_)

    def certify(self, tol: float = 1e-9) -> bool:
        check_is_fitted(self)
        return all(is_cournot_nash(self.game_, m, tol).ok for m in self.equilibria_)
