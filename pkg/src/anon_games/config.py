"""Scenario configuration: parsing, validation and game construction."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .congestion import BUNDLED_NETWORKS, load_network
from .entry import VARIANTS, EntryGame, lambda_q
from .game import GameSpec
from .large_deviations import EventSpec
from .measures import check_type_distribution

EXPERIMENTS = ("lln", "solve", "nash-set", "rate-function", "decay-slope", "conditional-limit",
               "rare-equilibrium", "poa", "poa-tail")

SCENARIOS = {
    "pigou": "Two parallel s-t links, constant cost 1 and linear cost t.",
    "braess": "Braess network with a free shortcut; the equilibrium uses it and costs 4/3 of the optimum.",
    "grid3x3": "3x3 directed grid with linear costs and two origin-destination types.",
    "entry-standard": "Two-action entry game with cost 3p - w of entering, types w in {1, 2}.",
    "entry-participation": "Participation game with cost -(2p + w) of entering, types w in {-1, 1}.",
}


class ConfigError(ValueError):
    """A configuration that cannot be parsed or violates a stated invariant."""


@dataclass
class ScenarioConfig:
    game_spec: dict
    lambda0: np.ndarray
    experiment: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    output: str | None = None
    raw: dict = field(default_factory=dict)

    def build_game(self) -> GameSpec:
        return build_game(self.game_spec)


def read_json(path) -> dict:
    """Parse a JSON file, turning syntax errors into position-annotated ConfigErrors."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def bundled_config_names() -> list[str]:
    root = resources.files("anon_games.data.configs")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def resolve_config_path(name) -> Path | None:
    """A filesystem path, or the bundled config of that name (``None`` if neither exists)."""
    path = Path(name)
    if path.exists():
        return path
    stem = path.name[:-5] if path.name.endswith(".json") else path.name
    if stem in bundled_config_names():
        with resources.as_file(resources.files("anon_games.data.configs").joinpath(f"{stem}.json")) as p:
            return Path(p)
    return None


def build_game(spec: dict) -> GameSpec:
    if "entry" in spec:
        return EntryGame(spec["entry"])
    if "network" in spec:
        return load_network(spec["network"])
    if "inline" in spec:
        return inline_game(spec["inline"])
    raise ConfigError("game needs one of 'entry', 'network' or 'inline'")


def inline_game(d: dict) -> GameSpec:
    """Game with costs affine in m: ``F(m,w,x) = base[w][x] + sum_{w',x'} interaction[w][x][w'][x'] m(w',x')``."""
    W, X = int(d["num_types"]), int(d["num_actions"])
    base = np.asarray(d["base"], dtype=float)
    inter = np.asarray(d.get("interaction", np.zeros((W, X, W, X))), dtype=float)
    if base.shape != (W, X) or inter.shape != (W, X, W, X):
        raise ConfigError("inline game: base must be W x X and interaction W x X x W x X")

    class AffineGame(GameSpec):
        def costs(self, mass):
            mass = np.asarray(getattr(mass, "mass", mass), dtype=float)
            return base + np.einsum("abcd,cd->ab", inter, mass)

    return AffineGame(W, X, d.get("constraints", [list(range(X))] * W), name=d.get("name", "inline"))


def build_event(d: dict, game=None) -> EventSpec:
    kind = d.get("kind")
    relation = d.get("relation", "<=")
    threshold = d["threshold"]
    if isinstance(threshold, list):
        threshold = tuple(threshold)
    kw = {"closed": d.get("closed", True)}
    if kind == "action_share":
        return EventSpec.action_share(int(d["action"]), relation, threshold, **kw)
    if kind == "pair_mass":
        return EventSpec.pair_mass(int(d["type"]), int(d["action"]), relation, threshold, **kw)
    if kind == "element_load":
        if game is None or not getattr(game, "is_congestion", False):
            raise ConfigError("element_load events need a congestion network")
        return EventSpec.element_load(game, d["element"], relation, threshold, **kw)
    raise ConfigError(f"unknown event kind {kind!r}")


def _game_ref_ok(spec: dict) -> None:
    if "entry" in spec:
        if spec["entry"] not in VARIANTS:
            raise ConfigError(f"unknown entry-game variant {spec['entry']!r}")
    elif "network" in spec:
        ref = spec["network"]
        if isinstance(ref, str) and ref.removesuffix(".json") not in BUNDLED_NETWORKS \
                and not Path(ref).exists():
            raise ConfigError(f"referenced network file {ref!r} does not exist")
    elif "inline" not in spec:
        raise ConfigError("game needs one of 'entry', 'network' or 'inline'")


def parse_config(d: dict) -> ScenarioConfig:
    """Check the invariants of a scenario dict and return the parsed config."""
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    game_spec = d.get("game")
    if isinstance(game_spec, str):
        if game_spec not in SCENARIOS:
            raise ConfigError(f"unknown scenario {game_spec!r}; known: {', '.join(SCENARIOS)}")
        game_spec = ({"entry": game_spec.split("-", 1)[1]} if game_spec.startswith("entry-")
                     else {"network": game_spec})
    if not isinstance(game_spec, dict):
        raise ConfigError("missing 'game'")
    _game_ref_ok(game_spec)
    experiment = d.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {experiment!r}")
    params = d.get("params", {})
    n_grid = params.get("n_grid")
    if n_grid is not None:
        if not n_grid or any(int(a) >= int(b) for a, b in zip(n_grid, n_grid[1:])):
            raise ConfigError("n_grid must be non-empty and strictly increasing")
        if any(int(n) < 1 for n in n_grid):
            raise ConfigError("n_grid entries must be positive")
    if "budget" in params and int(params["budget"]) < 1:
        raise ConfigError("budget must be at least 1")
    if "epsilon" in params and float(params["epsilon"]) <= 0:
        raise ConfigError("epsilon must be positive")
    seed = d.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise ConfigError("seed must be an integer in [0, 2^64)")

    game = build_game(game_spec)
    if "q" in d:
        lam = lambda_q(float(d["q"]))
    elif "lambda0" in d:
        lam = d["lambda0"]
    elif getattr(game, "lambda0", None) is not None:
        lam = game.lambda0
    else:
        raise ConfigError("missing 'lambda0' (or 'q' for entry games)")
    try:
        lam = check_type_distribution(lam, game.num_types)
    except ValueError as exc:
        raise ConfigError(f"lambda0: {exc}") from None
    if "event" in params:
        build_event(params["event"], game)
    return ScenarioConfig(game_spec, lam, experiment, params, seed, d.get("output"), d)


def load_config(path) -> ScenarioConfig:
    resolved = resolve_config_path(path)
    if resolved is None:
        raise ConfigError(f"config {path!r} not found (neither a file nor a bundled config)")
    return parse_config(read_json(resolved))
