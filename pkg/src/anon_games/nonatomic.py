"""Cournot-Nash equilibria and social optima of nonatomic congestion games.

Both problems minimise a convex function over A(lambda), a product of
scaled simplices, so Frank-Wolfe applies: its linear oracle is a
per-type best response to the gradient.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .congestion import CongestionNetwork
from .game import (AdmissibleSet, PreconditionError, SUPPORT_ATOL, _vertex_mass,
                   admissible_project, is_cournot_nash)
from .measures import TypeActionDistribution, tv_distance

STEP_RULES = ("exact", "2/(k+2)")
VARIANTS = ("pairwise", "standard")
#: certification tolerance is this multiple of the duality-gap threshold
CERT_FACTOR = 10.0


@dataclass
class SolverConfig:
    max_iters: int = 20000
    gap_tol: float = 1e-9
    step_rule: str = "exact"
    restarts: int = 1
    variant: str = "pairwise"
    seed: int = 0

    def __post_init__(self):
        if self.gap_tol <= 0:
            raise ValueError("gap_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"step_rule must be one of {STEP_RULES}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.variant == "pairwise" and self.step_rule != "exact":
            raise ValueError("pairwise steps need exact line search")


@dataclass
class SolveResult:
    m_star: TypeActionDistribution
    objective_value: float
    gap: float
    iterations: int
    certified: bool
    max_violation: float
    heuristic: bool = False
    history: list = field(default_factory=list, repr=False)


def _support_violation(A: AdmissibleSet, m: np.ndarray, grad: np.ndarray) -> float:
    masked = np.where(A.admissible, grad, np.inf)
    best = masked.min(axis=1, keepdims=True)
    excess = np.where((m > SUPPORT_ATOL) & A.admissible, grad - best, 0.0)
    return float(excess.max()) if excess.size else 0.0


def _line_search(grad_fn, m, d, gamma_max):
    def slope(gamma):
        return float(np.sum(grad_fn(m + gamma * d) * d))

    if slope(gamma_max) <= 0:
        return gamma_max
    if slope(0.0) >= 0:
        return 0.0
    return brentq(slope, 0.0, gamma_max, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def frank_wolfe(A: AdmissibleSet, value_fn, grad_fn, cfg: SolverConfig, start=None):
    """Minimise a convex function over A(lambda).

    Returns ``(mass, gap, violation, iterations, history)``. The run stops
    when the duality gap is below ``cfg.gap_tol`` and no supported pair is
    more than ``CERT_FACTOR * gap_tol`` worse than its type's best action.
    """
    # default start: the vertex best responding to the gradient at the barycentre
    m = _vertex_mass(A, grad_fn(A.uniform())) if start is None else np.array(start, dtype=float)
    history = [value_fn(m)]
    gap = viol = np.inf
    k = 0
    for k in range(cfg.max_iters):
        g = grad_fn(m)
        s = _vertex_mass(A, g)
        gap = max(float(np.sum(g * (m - s))), 0.0)
        viol = _support_violation(A, m, g)
        if gap <= cfg.gap_tol and viol <= CERT_FACTOR * cfg.gap_tol:
            break
        if cfg.variant == "pairwise":
            # per type, shift mass from the worst supported action to the best
            # one, with a separate line search for each type
            moved = False
            for w in range(m.shape[0]):
                if w:
                    g = grad_fn(m)
                on = (m[w] > 0) & A.admissible[w]
                if not on.any():
                    continue
                toward = int(np.where(A.admissible[w], g[w], np.inf).argmin())
                away = int(np.where(on, g[w], -np.inf).argmax())
                if away == toward or g[w, away] - g[w, toward] <= 0:
                    continue
                d = np.zeros_like(m)
                d[w, toward] = m[w, away]
                d[w, away] = -m[w, away]
                gamma = _line_search(grad_fn, m, d, 1.0)
                if gamma > 0:
                    m = m + gamma * d
                    m[w, away] = 0.0 if gamma == 1.0 else m[w, away]
                    moved = True
            if not moved:
                break
            m[np.abs(m) < SUPPORT_ATOL * 1e-3] = 0.0
            m = np.clip(m, 0.0, None)
            history.append(value_fn(m))
            continue
        else:
            d = s - m
            if cfg.step_rule == "exact":
                gamma = _line_search(grad_fn, m, d, 1.0)
            else:
                gamma = 2.0 / (k + 2.0)
        if gamma <= 0:
            break
        m = m + gamma * d
        m[np.abs(m) < SUPPORT_ATOL * 1e-3] = 0.0
        m = np.clip(m, 0.0, None)
        history.append(value_fn(m))
    else:
        g = grad_fn(m)
        s = _vertex_mass(A, g)
        gap = max(float(np.sum(g * (m - s))), 0.0)
        viol = _support_violation(A, m, g)
        k = cfg.max_iters
    rows = m.sum(axis=1)
    ok = rows > 0
    m[ok] *= (A.lam[ok] / rows[ok])[:, None]
    return m, gap, viol, k, history


def _require_congestion(net):
    if not getattr(net, "is_congestion", False):
        raise PreconditionError(
            f"{net!r} is not a congestion game; Frank-Wolfe needs a potential with gradient F")


def solve_cournot_nash(net: CongestionNetwork, lam, cfg: SolverConfig | None = None,
                       start=None) -> SolveResult:
    """Cournot-Nash equilibrium as the minimiser of the Beckmann potential on A(lambda)."""
    _require_congestion(net)
    cfg = cfg or SolverConfig()
    A = admissible_project(lam, net)
    m, gap, viol, iters, hist = frank_wolfe(A, net.potential, net.costs, cfg, start)
    cert = is_cournot_nash(net, m, CERT_FACTOR * cfg.gap_tol)
    return SolveResult(TypeActionDistribution(m, validate=False), net.potential(m), gap, iters,
                       cert.ok and gap <= cfg.gap_tol, cert.max_gain, history=hist)


def solve_social_optimum(net: CongestionNetwork, lam, cfg: SolverConfig | None = None) -> SolveResult:
    """Minimise the average cost V(m) = sum_e load_e c_e(load_e) over A(lambda)."""
    _require_congestion(net)
    cfg = cfg or SolverConfig()
    A = admissible_project(lam, net)
    convex = all(c.marginal_convex for c in net.cost_curves)
    starts = [None]
    if not convex or cfg.restarts > 1:
        rng = np.random.default_rng(cfg.seed)
        starts += [A.random_point(rng) for _ in range(max(cfg.restarts, 8 if not convex else 1) - 1)]
    best = None
    for start in starts:
        m, gap, viol, iters, hist = frank_wolfe(A, net.social_cost, net.marginal_cost_gradient,
                                                cfg, start)
        value = net.social_cost(m)
        if best is None or value < best[1]:
            best = (m, value, gap, viol, iters, hist)
    m, value, gap, viol, iters, hist = best
    certified = gap <= cfg.gap_tol and viol <= CERT_FACTOR * cfg.gap_tol
    return SolveResult(TypeActionDistribution(m, validate=False), value, gap, iters,
                       certified and convex, viol, heuristic=not convex, history=hist)


def uniqueness_probe(net: CongestionNetwork, lam, cfg: SolverConfig | None = None,
                     num_starts: int = 8, seed: int = 0) -> tuple[bool, float]:
    """Solve from random admissible starts; report whether all solutions coincide."""
    _require_congestion(net)
    cfg = cfg or SolverConfig()
    A = admissible_project(lam, net)
    rng = np.random.default_rng(seed)
    sols = [solve_cournot_nash(net, lam, cfg, start=A.random_point(rng)).m_star
            for _ in range(num_starts)]
    spread = max((tv_distance(a, b) for a, b in itertools.combinations(sols, 2)), default=0.0)
    return spread <= 1e-6, spread
