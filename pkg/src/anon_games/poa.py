"""Average cost and price of anarchy, for the nonatomic limit and for n players."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .game import PreconditionError, enumerate_cournot_nash_bruteforce, MAX_BRUTEFORCE_CELLS
from .measures import TypeActionDistribution, check_type_distribution

MODES = ("exhaustive", "sampled")


@dataclass
class PoAResult:
    worst_nash_cost: float
    social_opt_cost: float
    poa: float
    exhaustive: bool
    opt_exact: bool = True
    argmax_nash: TypeActionDistribution | None = None
    argmin_opt: TypeActionDistribution | None = None


def average_cost(game, m) -> float:
    """Integral of the cost against m: ``sum_{w,x} m(w,x) F(m,w,x)``."""
    if getattr(game, "is_congestion", False):
        return game.social_cost(m)
    mass = m.mass if isinstance(m, TypeActionDistribution) else np.asarray(m, float)
    F = game.costs(m)
    on = mass > 0
    return float(np.sum(mass[on] * F[on]))


def _ratio(num: float, den: float) -> float:
    if den <= 0:
        raise PreconditionError(f"social optimum cost {den} is not positive; PoA undefined")
    return num / den


def _require_positive(net, lam) -> None:
    if not getattr(net, "is_congestion", False):
        raise PreconditionError("PoA needs V > 0, which is only certified for congestion games")
    if not net.positivity_condition(lam):
        raise PreconditionError(
            "some admissible route has no element with positive cost; V may vanish and PoA is undefined")


def poa_nonatomic(net, lam, cfg=None, probe: bool = True) -> PoAResult:
    """``sup V over equilibria / inf V over A(lambda)`` for a nonatomic congestion game.

    Element costs are non-decreasing, so the potential is convex and every
    equilibrium has the same element costs; V equals the sum over types of
    ``lambda(w)`` times the cheapest route cost and is the same for all
    equilibria. With ``probe=True`` this is cross-checked on small games
    by brute-force enumeration whenever the solver finds several equilibria.
    """
    from .nonatomic import SolverConfig, solve_cournot_nash, solve_social_optimum, uniqueness_probe

    lam = check_type_distribution(lam, net.num_types)
    _require_positive(net, lam)
    cfg = cfg or SolverConfig()
    eq = solve_cournot_nash(net, lam, cfg)
    worst, arg = net.social_cost(eq.m_star), eq.m_star
    if probe and not all(c.strictly_increasing for c in net.cost_curves):
        unique, _ = uniqueness_probe(net, lam, cfg)
        if not unique and net.num_types * net.num_actions <= MAX_BRUTEFORCE_CELLS:
            for m in enumerate_cournot_nash_bruteforce(net, lam):
                v = net.social_cost(m)
                if v > worst:
                    worst, arg = v, m
    opt = solve_social_optimum(net, lam, cfg)
    return PoAResult(worst, opt.objective_value, _ratio(worst, opt.objective_value), True,
                     not opt.heuristic, arg, opt.m_star)


# --- n players ---------------------------------------------------------------

def _lattice_opt_by_rounding(net, counts, cfg=None):
    """Round the relaxed optimum to the 1/n lattice, then improve by single-player moves."""
    from .nonatomic import solve_social_optimum

    n = int(counts.sum())
    lam = counts / n
    relaxed = solve_social_optimum(net, lam, cfg).m_star.mass * n
    K = np.zeros(net.shape, dtype=np.int64)
    for w in range(net.num_types):
        acts = list(net.constraints[w])
        row = relaxed[w, acts]
        base = np.floor(row).astype(np.int64)
        short = int(counts[w] - base.sum())
        base[np.argsort(-(row - base), kind="stable")[:short]] += 1
        K[w, acts] = base
    best = net.social_cost(TypeActionDistribution.from_counts(K))
    improved = True
    while improved:
        improved = False
        for w in range(net.num_types):
            for x in net.constraints[w]:
                if K[w, x] == 0:
                    continue
                for y in net.constraints[w]:
                    if y == x:
                        continue
                    K[w, x] -= 1
                    K[w, y] += 1
                    v = net.social_cost(TypeActionDistribution.from_counts(K))
                    if v < best - 1e-15:
                        best, improved = v, True
                    else:
                        K[w, x] += 1
                        K[w, y] -= 1
    return best, TypeActionDistribution.from_counts(K)


def poa_from_counts(game, counts, mode: str = "exhaustive", seed: int = 0) -> PoAResult:
    """PoA_n for the type-count vector ``counts`` (players are anonymous)."""
    from .finite_nash import (MAX_CLASSES, count_classes, is_nash_class, num_count_classes,
                              sample_nash)

    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    counts = np.asarray(counts, dtype=np.int64)
    n = int(counts.sum())
    if n == 0:
        raise ValueError("empty type vector")
    _require_positive(game, counts / n)
    total = num_count_classes(game, counts)
    feasible = total <= MAX_CLASSES
    if mode == "exhaustive" and not feasible:
        raise PreconditionError(f"{total} count classes exceed the enumeration limit {MAX_CLASSES}")

    worst = -math.inf
    opt = math.inf
    arg_nash = arg_opt = None
    if feasible:
        for K in count_classes(game, counts):
            m = TypeActionDistribution.from_counts(K)
            v = game.social_cost(m)
            if v < opt:
                opt, arg_opt = v, m
            if mode == "exhaustive" and v > worst and is_nash_class(game, m).ok:
                worst, arg_nash = v, m
        opt_exact = True
    else:
        opt, arg_opt = _lattice_opt_by_rounding(game, counts)
        opt_exact = False
    if mode == "sampled":
        types = np.repeat(np.arange(game.num_types), counts)
        for m in sample_nash(game, types, seed=seed):
            v = game.social_cost(m)
            if v > worst:
                worst, arg_nash = v, m
    if arg_nash is None:
        raise PreconditionError("the Nash set is empty; PoA is undefined for this draw")
    return PoAResult(worst, opt, _ratio(worst, opt), mode == "exhaustive", opt_exact,
                     arg_nash, arg_opt)


def poa_finite(game, type_vector: Sequence[int], mode: str = "exhaustive", seed: int = 0) -> PoAResult:
    """Worst Nash cost over the lattice optimum for the n-player game with these types.

    ``mode="sampled"`` replaces the Nash enumeration by best-response runs,
    so its PoA is a lower bound (``exhaustive=False``).
    """
    types = np.asarray(type_vector, dtype=np.int64)
    if types.size == 0:
        raise ValueError("empty type vector")
    if np.any((types < 0) | (types >= game.num_types)):
        raise ValueError("type index out of range")
    return poa_from_counts(game, np.bincount(types, minlength=game.num_types), mode, seed)


# --- supremum over type distributions -----------------------------------------

MAX_SUP_TYPES = 4


def poa_sup_over_types(net, lambda0, grid_resolution: int = 100, cfg=None) -> tuple[float, np.ndarray]:
    """``R = sup PoA(lambda)`` over type distributions absolutely continuous w.r.t. lambda0.

    A grid over the supported sub-simplex is refined by a shrinking
    pattern search around the best grid points. Returns ``(R, lambda)``.
    """
    from .game import _compositions

    lam0 = check_type_distribution(lambda0, net.num_types)
    if net.num_types > MAX_SUP_TYPES:
        raise PreconditionError(f"sup over types is limited to {MAX_SUP_TYPES} types")
    support = np.flatnonzero(lam0 > 0)
    k = support.size

    def embed(p):
        lam = np.zeros(net.num_types)
        lam[support] = p
        return lam

    def value(p):
        return poa_nonatomic(net, embed(p), cfg, probe=False).poa

    if k == 1:
        return value(np.ones(1)), embed(np.ones(1))
    pts = _compositions(grid_resolution, k) / grid_resolution
    vals = np.array([value(p) for p in pts])
    best_v, best_p = -math.inf, None
    for idx in np.argsort(-vals, kind="stable")[:3]:
        p, v = pts[idx].copy(), vals[idx]
        step = 1.0 / grid_resolution
        while step > 1e-7:
            improved = False
            for a in range(k):
                for b in range(k):
                    if a == b or p[a] <= 0:
                        continue
                    trial = p.copy()
                    d = min(step, p[a])
                    trial[a] -= d
                    trial[b] += d
                    vt = value(trial)
                    if vt > v:
                        p, v, improved = trial, vt, True
            if not improved:
                step /= 2
        if v > best_v:
            best_v, best_p = v, p
    return float(best_v), embed(best_p)


# --- tail experiment ----------------------------------------------------------

@dataclass
class TailRow:
    n: int
    freq: float
    hits: int
    budget: int
    ci_low: float
    ci_high: float
    max_poa: float
    wall_time_ms: float = 0.0


@dataclass
class DrawRecord:
    n: int
    trial: int
    poa: float
    worst_nash_cost: float
    social_opt_cost: float


def poa_tail_experiment(net, lambda0, n_grid: Sequence[int], budget: int, epsilon: float,
                        seed: int = 0, R: float | None = None, workers: int = 1,
                        grid_resolution: int = 100):
    """Frequency of ``PoA_n >= R + epsilon`` over i.i.d. type draws, for each n.

    Exhaustive PoA_n depends only on the type counts, so it is computed
    once per distinct count vector. Returns ``(rows, draws, R)``.
    """
    import time

    from .large_deviations import trial_seed, wilson_interval
    from .parallel import resolve_workers

    lam0 = check_type_distribution(lambda0, net.num_types)
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if R is None:
        R, _ = poa_sup_over_types(net, lam0, grid_resolution)
    rows, draws = [], []
    for n in n_grid:
        t0 = time.perf_counter()
        samples = [tuple(int(c) for c in trial_seed(seed, t).multinomial(n, lam0)) for t in range(budget)]
        distinct = sorted(set(samples))
        results = _map_counts(net, distinct, resolve_workers(workers))
        table = dict(zip(distinct, results))
        hits = 0
        for t, c in enumerate(samples):
            res = table[c]
            hits += res.poa >= R + epsilon
            draws.append(DrawRecord(n, t, res.poa, res.worst_nash_cost, res.social_opt_cost))
        lo, hi = wilson_interval(hits, budget)
        rows.append(TailRow(n, hits / budget, hits, budget, lo, hi,
                            max(table[c].poa for c in distinct), 1e3 * (time.perf_counter() - t0)))
    return rows, draws, R


def _poa_counts_job(args):
    net, counts = args
    return poa_from_counts(net, np.array(counts))


def _map_counts(net, distinct, workers):
    jobs = [(net, c) for c in distinct]
    if workers == 1 or len(jobs) == 1:
        return [_poa_counts_job(j) for j in jobs]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_poa_counts_job, jobs))
