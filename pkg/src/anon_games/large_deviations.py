"""Rate functions of equilibrium events and finite-n probability experiments.

Types are i.i.d. draws from ``lambda0``. The probability that the
equilibrium distribution lands in an event A decays like ``exp(-n I(A))``
with ``I(A) = inf{H(lambda | lambda0) : some equilibrium of lambda lies in A}``.
This module evaluates I(A) by a search over the type simplex and checks
the decay against exact binomial/multinomial sums or Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp
from statsmodels.stats.proportion import proportion_confint

from .measures import (TypeActionDistribution, check_type_distribution, relative_entropy,
                       set_distance, tv_distance)

RELATIONS = ("<=", ">=", "between")
EquilibriumMap = Callable[[np.ndarray], Sequence[TypeActionDistribution]]


@dataclass(frozen=True)
class EventSpec:
    """The event ``{m : functional(m) <relation> threshold}``.

    ``lipschitz`` bounds the change of the functional per unit of total
    variation. ``closed=False`` marks an open event (strict inequality).
    """

    functional: Callable[[TypeActionDistribution], float]
    relation: str
    threshold: float | tuple[float, float]
    closed: bool = True
    lipschitz: float = 1.0
    label: str = ""

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ValueError(f"relation must be one of {RELATIONS}")
        if self.relation == "between" and len(self.threshold) != 2:
            raise ValueError("'between' needs a (low, high) threshold pair")

    def contains(self, m: TypeActionDistribution, strict: bool | None = None, slack: float = 0.0) -> bool:
        strict = (not self.closed) if strict is None else strict
        v = float(self.functional(m))
        if self.relation == "<=":
            r = self.threshold - slack
            return v < r if strict else v <= r + 1e-12
        if self.relation == ">=":
            r = self.threshold + slack
            return v > r if strict else v >= r - 1e-12
        lo, hi = self.threshold
        lo, hi = lo + slack, hi - slack
        return lo < v < hi if strict else lo - 1e-12 <= v <= hi + 1e-12

    def interior(self) -> "EventSpec":
        return EventSpec(self.functional, self.relation, self.threshold, False, self.lipschitz,
                         self.label + " (interior)")

    @classmethod
    def action_share(cls, action: int, relation: str, threshold, **kw) -> "EventSpec":
        return cls(ActionShare(action), relation, threshold,
                   label=kw.pop("label", f"m^x{{{action}}} {relation} {threshold}"), **kw)

    @classmethod
    def pair_mass(cls, w: int, x: int, relation: str, threshold, **kw) -> "EventSpec":
        return cls(PairMass(w, x), relation, threshold,
                   label=kw.pop("label", f"m{{({w},{x})}} {relation} {threshold}"), **kw)

    @classmethod
    def element_load(cls, net, element, relation: str, threshold, **kw) -> "EventSpec":
        return cls(ElementLoad(net, net.element_index(element)), relation, threshold,
                   label=kw.pop("label", f"load[{element}] {relation} {threshold}"), **kw)


@dataclass(frozen=True)
class ActionShare:
    action: int

    def __call__(self, m):
        return float(m.mass[:, self.action].sum())


@dataclass(frozen=True)
class PairMass:
    w: int
    x: int

    def __call__(self, m):
        return float(m.mass[self.w, self.x])


@dataclass(frozen=True, eq=False)
class ElementLoad:
    net: object
    element: int

    def __call__(self, m):
        return float(self.net.loads(m)[self.element])


@dataclass
class RateFunctionResult:
    value: float
    minimizers: list = field(default_factory=list)  # (lambda, m) pairs
    lower_value: float = math.inf
    infima_agree: bool = False

    @property
    def minimizer_set(self) -> list[TypeActionDistribution]:
        return [m for _, m in self.minimizers]


# --- simplex search -------------------------------------------------------

def _embed(lam0: np.ndarray, support: np.ndarray, sub: np.ndarray) -> np.ndarray:
    lam = np.zeros_like(lam0)
    lam[support] = sub
    return lam / lam.sum()


def _hits(eq_map: EquilibriumMap, event: EventSpec, lam: np.ndarray, strict: bool):
    return [m for m in eq_map(lam) if event.contains(m, strict=strict)]


def _boundary(eq_map, event, strict, lam_in, lam_out, iters=60):
    """Bisect the segment from a feasible to an infeasible point; return the last feasible point."""
    a, b = lam_in, lam_out
    for _ in range(iters):
        mid = 0.5 * (a + b)
        if _hits(eq_map, event, mid, strict):
            a = mid
        else:
            b = mid
        if np.max(np.abs(b - a)) < 1e-14:
            break
    return a


def _search_1d(eq_map, event, lam0, support, resolution, strict):
    q0 = lam0[support[1]] / lam0[support].sum()
    qs = np.arange(resolution + 1) / resolution

    def lam_of(q):
        return _embed(lam0, support, np.array([1 - q, q]))

    def feasible(q):
        return bool(_hits(eq_map, event, lam_of(q), strict))

    def edge(q_in, q_out):
        a, b = q_in, q_out
        for _ in range(60):
            mid = 0.5 * (a + b)
            if feasible(mid):
                a = mid
            else:
                b = mid
        return a

    feas = np.array([feasible(q) for q in qs])
    cands = []
    # entropy is convex in q with its minimum at q0, so within each feasible
    # run the best point is q0 itself or the run end nearest to it
    i = 0
    while i <= resolution:
        if not feas[i]:
            i += 1
            continue
        j = i
        while j < resolution and feas[j + 1]:
            j += 1
        if qs[i] <= q0 <= qs[j] and feasible(q0):
            cands.append(q0)
        elif qs[j] < q0:
            cands.append(edge(qs[j], qs[j + 1]) if j < resolution else qs[j])
        elif qs[i] > q0:
            cands.append(edge(qs[i], qs[i - 1]) if i > 0 else qs[i])
        else:
            cands.extend([qs[i], qs[j]])
        i = j + 1
    return [lam_of(q) for q in cands]


def _search_nd(eq_map, event, lam0, support, resolution, strict):
    from .game import _compositions

    k = support.size
    comps = _compositions(resolution, k)
    pts = comps / resolution
    sub0 = lam0[support] / lam0[support].sum()
    feasible = []
    for p in pts:
        lam = _embed(lam0, support, p)
        if _hits(eq_map, event, lam, strict):
            feasible.append(p)
    if not feasible:
        return []
    feasible = np.array(feasible)
    H = np.array([relative_entropy(p, sub0) for p in feasible])
    order = np.argsort(H)[:min(10, len(H))]
    out = []
    for idx in order:
        p = feasible[idx].copy()
        h = H[idx]
        step = 1.0 / resolution
        while step > 1e-12:
            improved = False
            for a in range(k):
                for b in range(k):
                    if a == b or p[a] <= 0:
                        continue
                    d = min(step, p[a])
                    trial = p.copy()
                    trial[a] -= d
                    trial[b] += d
                    ht = relative_entropy(trial, sub0)
                    if ht < h and _hits(eq_map, event, _embed(lam0, support, trial), strict):
                        p, h, improved = trial, ht, True
            if not improved:
                step /= 2
        out.append(_embed(lam0, support, p))
    return out


def _minimize(eq_map, event, lam0, resolution, strict):
    support = np.flatnonzero(lam0 > 0)
    if support.size == 1:
        cands = [lam0.copy()] if _hits(eq_map, event, lam0, strict) else []
    elif support.size == 2:
        cands = _search_1d(eq_map, event, lam0, support, resolution, strict)
    else:
        cands = _search_nd(eq_map, event, lam0, support, resolution, strict)
    scored = []
    for lam in cands:
        hits = _hits(eq_map, event, lam, strict)
        if hits:
            scored.append((relative_entropy(lam, lam0), lam, hits))
    return scored


def rate_function(game, lambda0, event: EventSpec, eq_map: EquilibriumMap | None = None,
                  resolution: int | None = None, cfg=None) -> RateFunctionResult:
    """Entropy cost ``I(A)`` of the cheapest type distribution whose equilibria meet the event.

    ``eq_map(lam)`` returns the Cournot-Nash equilibria at ``lam``; when
    several are returned, the event only needs to contain one of them.
    Congestion games without a map use the Frank-Wolfe solver, after a
    uniqueness probe at ``lambda0``.
    """
    lam0 = check_type_distribution(lambda0, game.num_types)
    if eq_map is None:
        eq_map = default_equilibrium_map(game, lam0, cfg)
    support = np.flatnonzero(lam0 > 0)
    if resolution is None:
        resolution = 400 if support.size <= 3 else 40
    scored = _minimize(eq_map, event, lam0, resolution, strict=False)
    if not scored:
        return RateFunctionResult(math.inf, [], math.inf, True)
    value = min(s[0] for s in scored)
    minimizers = []
    for h, lam, hits in sorted(scored, key=lambda s: s[0]):
        if h > value + 1e-8:
            continue
        for m in hits:
            if any(tv_distance(m, o) <= 1e-5 for _, o in minimizers):
                continue
            minimizers.append((lam, m))
    open_scored = _minimize(eq_map, event, lam0, resolution, strict=True)
    lower = min((s[0] for s in open_scored), default=math.inf)
    agree = (lower == value == math.inf) or abs(lower - value) <= 1e-8
    return RateFunctionResult(value, minimizers, lower, agree)


def default_equilibrium_map(game, lam0, cfg=None) -> EquilibriumMap:
    from .game import PreconditionError
    from .nonatomic import SolverConfig, solve_cournot_nash, uniqueness_probe

    if not getattr(game, "is_congestion", False):
        raise PreconditionError("no equilibrium map given and the game has no built-in solver")
    cfg = cfg or SolverConfig()
    unique, spread = uniqueness_probe(game, lam0, cfg)
    if not unique:
        raise PreconditionError(
            f"equilibria at lambda0 are not unique (spread {spread:.3g}); pass an explicit eq_map")
    return lambda lam: [solve_cournot_nash(game, lam, cfg).m_star]


def positivity_check(result: RateFunctionResult, event: EventSpec, eq_map_at_lambda0) -> bool:
    """The rate is positive whenever no equilibrium at lambda0 meets the closed event."""
    eqs = eq_map_at_lambda0
    if any(event.contains(m, strict=False) for m in eqs):
        return True
    return result.value > 0


# --- exact oracles ----------------------------------------------------------

def _multinomial_logpmf(counts: np.ndarray, lam: np.ndarray) -> float:
    n = counts.sum()
    with np.errstate(divide="ignore"):
        logp = np.where(counts > 0, counts * np.log(np.where(lam > 0, lam, 1.0)), 0.0)
    if np.any((counts > 0) & (lam <= 0)):
        return -math.inf
    return float(gammaln(n + 1) - gammaln(counts + 1).sum() + logp.sum())


class EntryScenario:
    """Standard entry game under the constructed n-player equilibrium selection.

    ``outcome(counts)`` maps per-type counts to the induced count matrix.
    """

    name = "entry-standard"

    def __init__(self):
        from .entry import EntryGame
        self.game = EntryGame("standard")

    def outcome(self, type_counts) -> TypeActionDistribution:
        from .entry import standard_outcome_counts
        return TypeActionDistribution.from_counts(standard_outcome_counts(int(type_counts[0]),
                                                                          int(type_counts[1])))

    def eq_map(self, lam):
        from .entry import analytic_cournot_nash
        return [analytic_cournot_nash(lam[1] / lam.sum())]


def _type_count_table(n: int, lam0: np.ndarray):
    """All type-count vectors for n players with their log-probabilities."""
    from .game import _compositions
    k = lam0.size
    if k == 2:
        c1 = np.arange(n + 1)
        counts = np.stack([n - c1, c1], axis=1)
    else:
        counts = _compositions(n, k)
    logp = np.array([_multinomial_logpmf(c, lam0) for c in counts])
    keep = np.isfinite(logp)
    return counts[keep], logp[keep]


def exact_log_probability(scenario, lam0, event: EventSpec, n: int) -> float:
    lam0 = np.asarray(lam0, float)
    counts, logp = _type_count_table(n, lam0)
    inside = np.array([event.contains(scenario.outcome(c)) for c in counts])
    if not inside.any():
        return -math.inf
    return float(logsumexp(logp[inside]))


def wilson_interval(successes: int, trials: int, alpha: float = 0.05) -> tuple[float, float]:
    lo, hi = proportion_confint(successes, trials, alpha=alpha, method="wilson")
    return float(lo), float(hi)


def trial_seed(seed: int, trial: int) -> np.random.Generator:
    """Independent generator for one trial, stable under budget and worker changes."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial)]))


def _mc_chunk(args):
    scenario, lam0, event, n, seed, start, stop = args
    hits = 0
    for t in range(start, stop):
        rng = trial_seed(seed, t)
        counts = rng.multinomial(n, lam0)
        hits += bool(event.contains(scenario.outcome(counts)))
    return hits


def monte_carlo_probability(scenario, lam0, event, n, budget, seed, workers=1):
    from .parallel import map_chunks
    lam0 = np.asarray(lam0, float)
    hits = sum(map_chunks(_mc_chunk, [(scenario, lam0, event, n, seed)], budget, workers))
    lo, hi = wilson_interval(hits, budget)
    return hits, lo, hi


@dataclass
class DecayRow:
    n: int
    log_prob: float
    slope: float
    ci_low: float = math.nan
    ci_high: float = math.nan
    wall_time_ms: float = 0.0


def decay_slope_experiment(scenario, lambda0, event: EventSpec, n_grid: Sequence[int],
                           mode: str = "exact", budget: int = 0, seed: int = 0,
                           workers: int = 1) -> list[DecayRow]:
    """``-(1/n) log P(mu_n in A)`` along ``n_grid``.

    ``mode="exact"`` sums the multinomial law of the type counts;
    ``mode="mc"`` estimates the probability with ``budget`` draws and
    reports Wilson 95% bounds on the log-probability.
    """
    import time

    lam0 = check_type_distribution(lambda0)
    rows = []
    for n in n_grid:
        t0 = time.perf_counter()
        if mode == "exact":
            lp = exact_log_probability(scenario, lam0, event, n)
            row = DecayRow(n, lp, -lp / n if lp > -math.inf else math.inf)
        elif mode == "mc":
            if budget <= 0:
                raise ValueError("Monte Carlo mode needs a positive budget")
            hits, lo, hi = monte_carlo_probability(scenario, lam0, event, n, budget, seed, workers)
            p = hits / budget
            lp = math.log(p) if p > 0 else -math.inf
            row = DecayRow(n, lp, -lp / n if p > 0 else math.inf,
                           math.log(lo) if lo > 0 else -math.inf, math.log(hi))
        else:
            raise ValueError("mode must be 'exact' or 'mc'")
        row.wall_time_ms = 1e3 * (time.perf_counter() - t0)
        rows.append(row)
    return rows


def conditional_limit_experiment(scenario, lambda0, event: EventSpec, n: int, epsilon: float,
                                 limit_set: Sequence[TypeActionDistribution]) -> tuple[float, float]:
    """Conditional mean distance to ``limit_set`` and tail ``P(d >= epsilon)`` given the event.

    Computed exactly from the conditioned law of the type counts.
    """
    lam0 = check_type_distribution(lambda0)
    counts, logp = _type_count_table(n, lam0)
    outcomes = [scenario.outcome(c) for c in counts]
    inside = np.array([event.contains(m) for m in outcomes])
    if not inside.any():
        raise ValueError(f"the event has probability zero at n={n}")
    logw = logp[inside] - logsumexp(logp[inside])
    w = np.exp(logw)
    dist = np.array([set_distance(m, limit_set) for m, ok in zip(outcomes, inside) if ok])
    mean = float(np.sum(w * dist))
    far = dist >= epsilon - 1e-12
    tail = float(np.exp(logsumexp(logw[far]))) if far.any() else 0.0
    return mean, tail


# --- rare equilibria --------------------------------------------------------

@dataclass
class RareRow:
    n: int
    freq: float
    ci_low: float
    ci_high: float
    bound: float
    hits: int = 0
    budget: int = 0
    wall_time_ms: float = 0.0


class _NashSetCache:
    def __init__(self, game, event):
        self.game, self.event = game, event
        self.memo: dict[tuple, bool] = {}

    def hit(self, counts) -> bool:
        from .finite_nash import count_classes, is_nash_class
        key = tuple(int(c) for c in counts)
        if key not in self.memo:
            found = False
            for K in count_classes(self.game, np.asarray(counts)):
                m = TypeActionDistribution.from_counts(K)
                if self.event.contains(m, strict=False) and is_nash_class(self.game, m).ok:
                    found = True
                    break
            self.memo[key] = found
        return self.memo[key]


_RARE_CACHES: dict = {}


def _rare_chunk(args):
    game, event, lam0, n, seed, start, stop = args
    key = (id(game), id(event))
    if key not in _RARE_CACHES:
        # the cache keeps game and event alive, so their ids cannot be reused
        _RARE_CACHES[key] = _NashSetCache(game, event)
    cache = _RARE_CACHES[key]
    hits = 0
    for t in range(start, stop):
        counts = trial_seed(seed, t).multinomial(n, lam0)
        hits += cache.hit(counts)
    return hits


def rare_equilibrium_probability(game, lambda0, event: EventSpec, n_grid: Sequence[int],
                                 budget: int, seed: int = 0, eq_map: EquilibriumMap | None = None,
                                 rate: RateFunctionResult | None = None,
                                 workers: int = 1) -> tuple[list[RareRow], RateFunctionResult]:
    """Frequency of ``{some n-player equilibrium lies in E}`` against ``exp(-n I)``.

    The Nash set of each sampled type vector is enumerated exhaustively
    (by count classes, memoised on the type counts). The rate ``I`` is the
    entropy cost over all equilibria of all type distributions meeting E.
    """
    import time

    from .finite_nash import MAX_CLASSES, num_count_classes
    from .parallel import map_chunks

    lam0 = check_type_distribution(lambda0, game.num_types)
    if rate is None:
        rate = rate_function(game, lam0, event, eq_map)
    for n in n_grid:
        worst = max(num_count_classes(game, np.full(game.num_types, n)), 1)
        if worst > MAX_CLASSES:
            raise ValueError(f"Nash-set enumeration at n={n} exceeds the class limit")
    rows = []
    for n in n_grid:
        t0 = time.perf_counter()
        hits = sum(map_chunks(_rare_chunk, [(game, event, lam0, n, seed)], budget, workers))
        lo, hi = wilson_interval(hits, budget)
        bound = math.exp(-n * rate.value) if math.isfinite(rate.value) else 0.0
        rows.append(RareRow(n, hits / budget, lo, hi, bound, hits, budget,
                            1e3 * (time.perf_counter() - t0)))
    return rows, rate
