"""Congestion games: element cost curves, loads, and the Beckmann potential."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import networkx as nx
import numpy as np

from .game import GameSpec, PreconditionError, _as_mass
from .measures import TypeActionDistribution, check_type_distribution

COST_KINDS = ("constant", "linear", "polynomial", "piecewise")


@dataclass(frozen=True)
class CostCurve:
    """Non-decreasing, non-negative element cost ``c(t)`` on loads ``t >= 0``.

    Constant, linear and polynomial curves are stored as ascending
    polynomial coefficients. Piecewise-linear curves interpolate
    ``values`` at ``breaks`` (starting at 0) and extend the last slope.
    """

    kind: str
    coeffs: tuple[float, ...] = ()
    breaks: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in COST_KINDS:
            raise ValueError(f"unknown cost kind {self.kind!r}")
        if self.kind == "piecewise":
            b, v = np.asarray(self.breaks, float), np.asarray(self.values, float)
            if b.size < 2 or b.size != v.size or b[0] != 0 or np.any(np.diff(b) <= 0):
                raise ValueError("piecewise cost needs increasing breaks starting at 0")
            if np.any(v < 0) or np.any(np.diff(v) < 0):
                raise ValueError("piecewise cost values must be non-negative and non-decreasing")
        else:
            if not self.coeffs or any(c < 0 for c in self.coeffs):
                raise ValueError("cost coefficients must be non-negative")

    @classmethod
    def constant(cls, b: float) -> "CostCurve":
        return cls("constant", (float(b),))

    @classmethod
    def linear(cls, a: float, b: float = 0.0) -> "CostCurve":
        return cls("linear", (float(b), float(a)))

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]) -> "CostCurve":
        return cls("polynomial", tuple(float(c) for c in coeffs))

    @classmethod
    def piecewise(cls, breaks: Sequence[float], values: Sequence[float]) -> "CostCurve":
        return cls("piecewise", breaks=tuple(map(float, breaks)), values=tuple(map(float, values)))

    @classmethod
    def from_dict(cls, d: dict) -> "CostCurve":
        kind = d.get("kind")
        if kind == "constant":
            return cls.constant(d.get("b", d.get("value", 0.0)))
        if kind == "linear":
            return cls.linear(d["a"], d.get("b", 0.0))
        if kind == "polynomial":
            return cls.polynomial(d["coeffs"])
        if kind == "piecewise":
            return cls.piecewise(d["breaks"], d["values"])
        raise ValueError(f"unknown cost kind {kind!r}")

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "b": self.coeffs[0]}
        if self.kind == "linear":
            return {"kind": "linear", "a": self.coeffs[1], "b": self.coeffs[0]}
        if self.kind == "polynomial":
            return {"kind": "polynomial", "coeffs": list(self.coeffs)}
        return {"kind": "piecewise", "breaks": list(self.breaks), "values": list(self.values)}

    def _pieces(self):
        b = np.asarray(self.breaks)
        v = np.asarray(self.values)
        slopes = np.diff(v) / np.diff(b)
        return b, v, slopes

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind != "piecewise":
            return np.polynomial.polynomial.polyval(t, self.coeffs)
        b, v, slopes = self._pieces()
        return np.where(t <= b[-1], np.interp(t, b, v), v[-1] + slopes[-1] * (t - b[-1]))

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind != "piecewise":
            d = np.polynomial.polynomial.polyder(self.coeffs) if len(self.coeffs) > 1 else [0.0]
            return np.polynomial.polynomial.polyval(t, d)
        b, _, slopes = self._pieces()
        # right derivative
        idx = np.clip(np.searchsorted(b, t, side="right") - 1, 0, slopes.size - 1)
        return slopes[idx]

    def antiderivative(self, t):
        """Closed-form ``int_0^t c(s) ds``."""
        t = np.asarray(t, dtype=float)
        if self.kind != "piecewise":
            return np.polynomial.polynomial.polyval(t, np.polynomial.polynomial.polyint(self.coeffs))
        b, v, slopes = self._pieces()
        seg_area = 0.5 * (v[1:] + v[:-1]) * np.diff(b)
        cum = np.concatenate([[0.0], np.cumsum(seg_area)])
        idx = np.clip(np.searchsorted(b, t, side="right") - 1, 0, slopes.size - 1)
        dt = t - b[idx]
        return cum[idx] + v[idx] * dt + 0.5 * slopes[idx] * dt ** 2

    def marginal(self, t):
        """Marginal social cost ``d/dt [t c(t)] = c(t) + t c'(t)``."""
        return self(t) + np.asarray(t, dtype=float) * self.derivative(t)

    @property
    def strictly_increasing(self) -> bool:
        """Differentiable with ``c' > 0`` on (0, 1]."""
        if self.kind == "piecewise":
            return False
        return any(c > 0 for c in self.coeffs[1:])

    @property
    def positive_after_zero(self) -> bool:
        """``c(t) > 0`` for every ``t > 0``."""
        if self.kind == "piecewise":
            b, v, slopes = self._pieces()
            return v[0] > 0 or slopes[0] > 0
        return any(c > 0 for c in self.coeffs)

    @property
    def marginal_convex(self) -> bool:
        """Whether ``t c(t)`` is convex, making social cost minimisation convex."""
        if self.kind != "piecewise":
            return True
        return bool(np.all(np.diff(self._pieces()[2]) >= 0))


class CongestionNetwork(GameSpec):
    """A congestion game: each action is a nonempty set of elements.

    ``F(m, w, x)`` is the summed cost of the elements of ``x`` at their
    current loads; the type only enters through the constraints.
    """

    is_potential = True
    is_congestion = True

    def __init__(self, elements: Sequence[str], costs: Sequence[CostCurve],
                 actions: Sequence[Sequence[int]], constraints: Sequence[Sequence[int]],
                 types: Sequence[str] | None = None, name: str = "network",
                 graph: dict | None = None, lambda0=None):
        if len(elements) != len(costs):
            raise ValueError("one cost curve per element is required")
        super().__init__(len(constraints), len(actions), constraints, name=name)
        self.elements = tuple(str(e) for e in elements)
        self.cost_curves = tuple(costs)
        inc = np.zeros((len(actions), len(elements)), dtype=bool)
        for j, act in enumerate(actions):
            if len(act) == 0:
                raise ValueError(f"action {j} uses no element")
            inc[j, list(act)] = True
        inc.setflags(write=False)
        self.incidence = inc
        self.actions = tuple(tuple(a) for a in actions)
        self.types = tuple(types) if types is not None else tuple(str(w) for w in range(len(constraints)))
        self.graph = graph
        self.lambda0 = None if lambda0 is None else check_type_distribution(lambda0, self.num_types)
        self._inc_f = inc.astype(float)

    # loads and costs

    def loads(self, m) -> np.ndarray:
        if isinstance(m, TypeActionDistribution) and m.counts is not None:
            return (m.counts.sum(axis=0) @ self.incidence.astype(np.int64)) / m.denominator
        return _as_mass(m).sum(axis=0) @ self._inc_f

    def element_costs(self, loads) -> np.ndarray:
        return np.array([c(t) for c, t in zip(self.cost_curves, loads)], dtype=float)

    def action_costs(self, m) -> np.ndarray:
        return self._inc_f @ self.element_costs(self.loads(m))

    def costs(self, m) -> np.ndarray:
        return np.broadcast_to(self.action_costs(m), self.shape).copy()

    def objective(self, m, w: int, x: int) -> float:
        return float(self.action_costs(m)[x])

    def unilateral_costs(self, m, u: float) -> np.ndarray:
        ell = self.loads(m)
        A = self._inc_f
        c_here = self.element_costs(ell)
        if not u:
            c_more = c_here
        elif (isinstance(m, TypeActionDistribution) and m.counts is not None
              and u * m.denominator == 1):
            n = m.denominator
            c_more = self.element_costs((m.counts.sum(axis=0) @ self.incidence.astype(np.int64) + 1) / n)
        else:
            c_more = self.element_costs(ell + u)
        # stay on shared elements, add u to elements new to y
        d = (A * c_here) @ A.T + ((1 - A) * c_more) @ A.T
        out = np.broadcast_to(d, (self.num_types,) + d.shape).copy()
        mask = self.admissible[:, :, None] & self.admissible[:, None, :]
        out[~mask] = np.nan
        return out

    def potential(self, m) -> float:
        ell = self.loads(m)
        return float(sum(c.antiderivative(t) for c, t in zip(self.cost_curves, ell)))

    def social_cost(self, m) -> float:
        ell = self.loads(m)
        return float(np.dot(ell, self.element_costs(ell)))

    def marginal_cost_gradient(self, m) -> np.ndarray:
        ell = self.loads(m)
        marg = np.array([c.marginal(t) for c, t in zip(self.cost_curves, ell)], dtype=float)
        return np.broadcast_to(self._inc_f @ marg, self.shape).copy()

    def rosenthal_potential(self, element_counts, n: int) -> float:
        """Discrete potential ``sum_e sum_{k=1}^{n_e} c_e(k / n)``."""
        total = 0.0
        for c, k in zip(self.cost_curves, element_counts):
            if k > 0:
                total += float(np.sum(c(np.arange(1, int(k) + 1) / n)))
        return total

    def element_index(self, e) -> int:
        if isinstance(e, (int, np.integer)):
            if not 0 <= e < len(self.elements):
                raise KeyError(f"unknown element {e!r}")
            return int(e)
        try:
            return self.elements.index(str(e))
        except ValueError:
            raise KeyError(f"unknown element {e!r}") from None

    def positivity_condition(self, lam=None) -> bool:
        """Every admissible route (of a type in the support) has an element with c(t) > 0 for t > 0."""
        pos = np.array([c.positive_after_zero for c in self.cost_curves])
        route_ok = (self.incidence & pos).any(axis=1)
        for w, acts in enumerate(self.constraints):
            if lam is not None and lam[w] <= 0:
                continue
            if not route_ok[list(acts)].all():
                return False
        return True

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "elements": [{"id": e, "cost": c.to_dict()} for e, c in zip(self.elements, self.cost_curves)],
            "actions": [[self.elements[i] for i in a] for a in self.actions],
            "types": [{"id": t, "actions": list(acts)} for t, acts in zip(self.types, self.constraints)],
        }
        if self.lambda0 is not None:
            d["lambda0"] = self.lambda0.tolist()
        return d


def load(net: CongestionNetwork, m, e) -> float:
    """Fraction of the population whose action uses element ``e``."""
    return float(net.loads(m)[net.element_index(e)])


def objective(net: CongestionNetwork, m, w: int, x: int) -> float:
    return net.objective(m, w, x)


def potential(net: CongestionNetwork, m) -> float:
    """Beckmann potential ``U(m) = sum_e int_0^{load_e} c_e(s) ds``."""
    return net.potential(m)


def potential_gradient(net: CongestionNetwork, m) -> np.ndarray:
    """Partial derivatives of U in the coordinates m(w, x); equal to F(m, w, x)."""
    return net.costs(m)


def social_cost(net: CongestionNetwork, m) -> float:
    return net.social_cost(m)


def uniqueness_span_check(net: CongestionNetwork, lam, atol: float = 1e-9) -> bool:
    """Sufficient condition for a unique minimiser of U on A(lambda).

    Checks that the matrices ``(lambda_i 1{e in x_j})_{ij}``, one per
    element, span every row-stochastic matrix supported on the admissible
    pairs.
    """
    lam = check_type_distribution(lam, net.num_types)
    for e, c in zip(net.elements, net.cost_curves):
        if not c.strictly_increasing:
            raise PreconditionError(
                f"element {e!r} has a {c.kind} cost; the span test needs c' > 0")
    W, X = net.shape
    Q = np.stack([(lam[:, None] * net._inc_f[None, :, k]).ravel() for k in range(len(net.elements))],
                 axis=1)
    basis = []
    first = [acts[0] for acts in net.constraints]
    anchor = np.zeros((W, X))
    anchor[np.arange(W), first] = 1.0
    basis.append(anchor.ravel())
    for w, acts in enumerate(net.constraints):
        for x in acts[1:]:
            b = np.zeros((W, X))
            b[w, x] = 1.0
            b[w, acts[0]] = -1.0
            basis.append(b.ravel())
    B = np.stack(basis, axis=1)
    coef, *_ = np.linalg.lstsq(Q, B, rcond=None)
    resid = np.abs(Q @ coef - B).max()
    return bool(resid <= atol)


# route generation and instance files

def _as_multidigraph(graph) -> nx.MultiDiGraph:
    if isinstance(graph, nx.MultiDiGraph):
        return graph
    G = nx.MultiDiGraph()
    for v in graph.get("vertices", []):
        G.add_node(v)
    for edge in graph["edges"]:
        G.add_edge(edge["from"], edge["to"], key=edge["id"])
    return G


def generate_routes(graph, od: tuple, max_hops: int | None = None) -> list[tuple[str, ...]]:
    """All simple directed paths from ``od[0]`` to ``od[1]``, as edge-id tuples.

    Routes are returned in lexicographic order of their edge-id sequences.
    """
    G = _as_multidigraph(graph)
    source, target = od
    if source not in G or target not in G:
        raise PreconditionError(f"vertex missing for pair {od!r}")
    routes = sorted(tuple(k for _, _, k in path)
                    for path in nx.all_simple_edge_paths(G, source, target, cutoff=max_hops))
    if not routes:
        raise PreconditionError(f"no route from {source!r} to {target!r}; C(w) would be empty")
    return routes


def _is_simple_path(G: nx.MultiDiGraph, route, source, target) -> bool:
    ends = {}
    for u, v, k in G.edges(keys=True):
        ends[k] = (u, v)
    at, seen = source, {source}
    for k in route:
        if k not in ends or ends[k][0] != at:
            return False
        at = ends[k][1]
        if at in seen:
            return False
        seen.add(at)
    return at == target


def network_from_dict(spec: dict) -> CongestionNetwork:
    elements = [el["id"] for el in spec["elements"]]
    costs = [CostCurve.from_dict(el["cost"]) for el in spec["elements"]]
    index = {e: i for i, e in enumerate(elements)}
    graph = spec.get("graph")
    types = spec["types"]
    actions: list[tuple[str, ...]] = []
    constraints: list[list[int]] = []

    def action_id(route):
        route = tuple(route)
        if route not in actions:
            actions.append(route)
        return actions.index(route)

    if "actions" in spec:
        for a in spec["actions"]:
            action_id(a)
    for t in types:
        if "actions" in t:
            acts = [a if isinstance(a, int) else action_id(a) for a in t["actions"]]
        elif graph is not None and "source" in t:
            routes = generate_routes(graph, (t["source"], t["target"]), spec.get("max_hops"))
            acts = [action_id(r) for r in routes]
        else:
            raise ValueError(f"type {t.get('id')!r} has neither actions nor a source/target pair")
        constraints.append(acts)
    if graph is not None:
        G = _as_multidigraph(graph)
        for t, acts in zip(types, constraints):
            if "source" not in t:
                continue
            for j in acts:
                if not _is_simple_path(G, actions[j], t["source"], t["target"]):
                    raise ValueError(f"action {actions[j]!r} is not a simple "
                                     f"{t['source']}->{t['target']} path")
    try:
        act_idx = [[index[e] for e in a] for a in actions]
    except KeyError as exc:
        raise ValueError(f"action uses unknown element {exc.args[0]!r}") from None
    return CongestionNetwork(elements, costs, act_idx, constraints,
                             types=[t.get("id", str(i)) for i, t in enumerate(types)],
                             name=spec.get("name", "network"), graph=graph,
                             lambda0=spec.get("lambda0"))


BUNDLED_NETWORKS = ("pigou", "braess", "grid3x3")


def load_network(source) -> CongestionNetwork:
    """Load a network from a dict, a JSON path, or a bundled instance name."""
    if isinstance(source, dict):
        return network_from_dict(source)
    name = str(source)
    stem = name[:-5] if name.endswith(".json") else name
    path = Path(name)
    if not path.exists() and stem in BUNDLED_NETWORKS:
        text = resources.files("anon_games.data.networks").joinpath(f"{stem}.json").read_text("utf-8")
    else:
        text = path.read_text(encoding="utf-8")
    return network_from_dict(json.loads(text))
