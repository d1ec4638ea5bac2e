"""``anon-games`` command line: run, validate and list scenarios."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import (EXPERIMENTS, SCENARIOS, ConfigError, ScenarioConfig, build_event,
                     bundled_config_names, load_config)
from .game import PreconditionError, is_cournot_nash
from .measures import TypeActionDistribution, tv_distance

EXIT_OK, EXIT_IO, EXIT_PRECONDITION = 0, 1, 2


# --- helpers -------------------------------------------------------------------

def _num(x):
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def _mass(m: TypeActionDistribution):
    return [[float(v) for v in row] for row in m.mass]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, TypeActionDistribution):
        return _mass(obj)
    return _num(obj)


class Output:
    """Collects the result summary, tables and plot series of one run."""

    def __init__(self):
        self.result: dict = {}
        self.tables: dict[str, tuple[list, list]] = {}
        self.plots: dict[str, tuple[list, list]] = {}

    def table(self, name, header, rows):
        self.tables[name] = (header, rows)

    def plot(self, name, header, rows):
        self.plots[name] = (header, rows)


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_num(v) for v in r])


def _entry_eq_map(game):
    from .entry import share_equilibria
    return lambda lam: share_equilibria(game, lam, scan_step=1e-3)


def _eq_map(cfg: ScenarioConfig, game):
    if getattr(game, "variant", None) is not None:
        if cfg.params.get("eq_map") == "bruteforce":
            from .game import enumerate_cournot_nash_bruteforce
            return lambda lam: enumerate_cournot_nash_bruteforce(game, lam, grid_steps=100)
        return _entry_eq_map(game)
    return None


def _entry_scenario(game):
    from .large_deviations import EntryScenario
    if getattr(game, "variant", None) != "standard":
        raise PreconditionError("n-player probabilities need the constructed equilibrium "
                                "selection, available for the standard entry game only")
    return EntryScenario()


# --- experiments -----------------------------------------------------------------

def exp_lln(cfg, game, out, workers):
    """Median TV distance between the n-player equilibrium and the nonatomic one."""
    from .large_deviations import trial_seed

    n_grid = cfg.params.get("n_grid", [100, 1000, 10000])
    trials = int(cfg.params.get("trials", 100))
    lam0 = cfg.lambda0
    if getattr(game, "variant", None) == "standard":
        from .entry import analytic_cournot_nash, standard_outcome_counts
        target = analytic_cournot_nash(float(lam0[1]))

        def outcome(counts, rng):
            return TypeActionDistribution.from_counts(standard_outcome_counts(*map(int, counts)))
    elif getattr(game, "is_congestion", False):
        from .finite_nash import best_response_dynamics
        from .nonatomic import solve_cournot_nash
        target = solve_cournot_nash(game, lam0).m_star

        def outcome(counts, rng):
            types = np.repeat(np.arange(game.num_types), counts)
            seed = int(rng.integers(2 ** 63))
            return best_response_dynamics(game, types, seed=seed).empirical(game)
    else:
        raise PreconditionError("lln needs the standard entry game or a congestion network")
    rows = []
    for n in n_grid:
        tvs = []
        for t in range(trials):
            rng = trial_seed(cfg.seed, t)
            counts = rng.multinomial(int(n), lam0)
            tvs.append(tv_distance(outcome(counts, rng), target))
        rows.append([int(n), float(np.median(tvs)), float(np.mean(tvs)), float(np.max(tvs))])
    out.result.update(target=target, trials=trials,
                      rows=[dict(zip(("n", "median_tv", "mean_tv", "max_tv"), r)) for r in rows])
    out.table("lln", ["n", "median_tv", "mean_tv", "max_tv"], rows)
    out.plot("lln_median_tv", ["n", "median_tv"], [r[:2] for r in rows])


def exp_solve(cfg, game, out, workers):
    """Nonatomic equilibria (and, for networks, the social optimum) at lambda0 or along a q grid."""
    if getattr(game, "variant", None) is not None:
        from .entry import analytic_cournot_nash, lambda_q, share_equilibria
        qs = cfg.params.get("q_grid", [float(cfg.lambda0[1])])
        entries, rows = [], []
        for q in qs:
            eqs = share_equilibria(game, lambda_q(q))
            item = {"q": q, "equilibria": [_mass(m) for m in eqs],
                    "certified": [is_cournot_nash(game, m, 1e-12).ok for m in eqs]}
            if game.variant == "standard":
                ref = analytic_cournot_nash(q)
                item["closed_form"] = _mass(ref)
                item["max_abs_diff"] = max(float(np.max(np.abs(m.mass - ref.mass))) for m in eqs)
            entries.append(item)
            for m in eqs:
                rows.append([q] + [float(v) for v in m.mass.ravel()])
        out.result["solutions"] = entries
        out.table("equilibria", ["q", "m00", "m01", "m10", "m11"], rows)
        out.plot("entry_share", ["q", "entry_share"], [[r[0], r[2] + r[4]] for r in rows])
        return
    if not getattr(game, "is_congestion", False):
        from .game import enumerate_cournot_nash_bruteforce
        eqs = enumerate_cournot_nash_bruteforce(game, cfg.lambda0)
        out.result["equilibria"] = [_mass(m) for m in eqs]
        return
    from .nonatomic import SolverConfig, solve_cournot_nash, solve_social_optimum
    scfg = SolverConfig(**cfg.params.get("solver", {}))
    eq = solve_cournot_nash(game, cfg.lambda0, scfg)
    opt = solve_social_optimum(game, cfg.lambda0, scfg)
    out.result.update(
        equilibrium=eq.m_star, potential=eq.objective_value, gap=eq.gap, certified=eq.certified,
        max_violation=eq.max_violation, iterations=eq.iterations,
        nash_check=is_cournot_nash(game, eq.m_star, 1e-6).ok,
        element_loads=game.loads(eq.m_star), optimum=opt.m_star, social_cost=opt.objective_value,
        optimum_certified=opt.certified, optimum_heuristic=opt.heuristic)
    if cfg.params.get("bruteforce", False):
        from .game import enumerate_cournot_nash_bruteforce
        bf = enumerate_cournot_nash_bruteforce(game, cfg.lambda0,
                                               int(cfg.params.get("grid_steps", 200)))
        out.result["bruteforce"] = [_mass(m) for m in bf]
        out.result["bruteforce_tv"] = min((tv_distance(eq.m_star, m) for m in bf), default=None)
    out.table("convergence", ["iteration", "potential"], list(enumerate(eq.history)))
    out.table("loads", ["element", "load", "cost"],
              [[e, float(l), float(c(l))] for e, l, c in
               zip(game.elements, game.loads(eq.m_star), game.cost_curves)])
    out.plot("potential_trace", ["iteration", "potential"], list(enumerate(eq.history)))


def exp_nash_set(cfg, game, out, workers):
    from .finite_nash import enumerate_nash_set
    if "type_vector" in cfg.params:
        types = [int(t) for t in cfg.params["type_vector"]]
    else:
        counts = cfg.params.get("type_counts")
        if counts is None:
            raise ConfigError("nash-set needs 'type_vector' or 'type_counts'")
        types = list(np.repeat(np.arange(game.num_types), counts))
    ns = enumerate_nash_set(game, types)
    out.result.update(n=ns.n, exhaustive=ns.exhaustive, size=len(ns),
                      nash_set=[m.counts.tolist() for m in ns])
    out.table("nash_set", ["index", "type", "action", "count"],
              [[i, w, x, int(m.counts[w, x])] for i, m in enumerate(ns)
               for w in range(game.num_types) for x in range(game.num_actions)])


def exp_rate_function(cfg, game, out, workers):
    from .large_deviations import positivity_check, rate_function
    event = build_event(cfg.params["event"], game)
    eq_map = _eq_map(cfg, game)
    res = rate_function(game, cfg.lambda0, event, eq_map, cfg.params.get("resolution"))
    at0 = eq_map(cfg.lambda0) if eq_map else []
    out.result.update(rate=res.value, lower_rate=res.lower_value, infima_agree=res.infima_agree,
                      minimizers=[{"lambda": lam, "m": m} for lam, m in res.minimizers],
                      positivity_ok=positivity_check(res, event, at0) if at0 else None)
    out.table("minimizers", ["lambda", "m"],
              [[json.dumps(_jsonable(l)), json.dumps(_mass(m))] for l, m in res.minimizers])


def exp_decay_slope(cfg, game, out, workers):
    from .large_deviations import decay_slope_experiment, rate_function
    scen = _entry_scenario(game)
    event = build_event(cfg.params["event"], game)
    mode = cfg.params.get("mode", "exact")
    rows = decay_slope_experiment(scen, cfg.lambda0, event, cfg.params.get("n_grid", [100, 1000]),
                                  mode, int(cfg.params.get("budget", 0)), cfg.seed, workers)
    rate = rate_function(game, cfg.lambda0, event, scen.eq_map)
    out.result.update(rate=rate.value, mode=mode,
                      rows=[{"n": r.n, "log_prob": r.log_prob, "slope": r.slope,
                             "ci_low": r.ci_low, "ci_high": r.ci_high} for r in rows],
                      slope_error=[abs(r.slope - rate.value) for r in rows])
    header = ["n", "log_prob", "slope", "ci_low", "ci_high", "wall_time_ms"]
    out.table("decay", header, [[r.n, r.log_prob, r.slope, r.ci_low, r.ci_high, r.wall_time_ms]
                                for r in rows])
    out.plot("decay_slope", ["n", "slope", "rate"], [[r.n, r.slope, rate.value] for r in rows])


def exp_conditional_limit(cfg, game, out, workers):
    from .large_deviations import conditional_limit_experiment, rate_function
    scen = _entry_scenario(game)
    event = build_event(cfg.params["event"], game)
    eps = float(cfg.params.get("epsilon", 0.05))
    rate = rate_function(game, cfg.lambda0, event, scen.eq_map)
    limit = rate.minimizer_set
    rows = []
    for n in cfg.params.get("n_grid", [100, 250, 500]):
        mean, tail = conditional_limit_experiment(scen, cfg.lambda0, event, int(n), eps, limit)
        rows.append([int(n), mean, tail])
    out.result.update(rate=rate.value, limit_set=limit, epsilon=eps,
                      rows=[dict(zip(("n", "mean_tv", "tail_prob"), r)) for r in rows])
    out.table("conditional_limit", ["n", "mean_tv", "tail_prob"], rows)
    out.plot("conditional_tail", ["n", "tail_prob"], [[r[0], r[2]] for r in rows])


def exp_rare_equilibrium(cfg, game, out, workers):
    from .large_deviations import rare_equilibrium_probability
    event = build_event(cfg.params["event"], game)
    rows, rate = rare_equilibrium_probability(
        game, cfg.lambda0, event, cfg.params.get("n_grid", [50, 100]),
        int(cfg.params.get("budget", 10000)), cfg.seed, _eq_map(cfg, game), workers=workers)
    factor = float(cfg.params.get("safety_factor", 10.0))
    out.result.update(rate=rate.value, minimizers=[{"lambda": l, "m": m} for l, m in rate.minimizers],
                      safety_factor=factor,
                      rows=[{"n": r.n, "freq": r.freq, "hits": r.hits, "budget": r.budget,
                             "ci_low": r.ci_low, "ci_high": r.ci_high, "bound": r.bound,
                             "within_bound": r.ci_high <= factor * r.bound} for r in rows])
    out.table("rare_equilibrium", ["n", "freq", "ci_low", "ci_high", "bound", "wall_time_ms"],
              [[r.n, r.freq, r.ci_low, r.ci_high, r.bound, r.wall_time_ms] for r in rows])
    out.plot("rare_frequency", ["n", "freq", "bound"], [[r.n, r.freq, r.bound] for r in rows])


def exp_poa(cfg, game, out, workers):
    from .poa import poa_finite, poa_nonatomic
    res = poa_nonatomic(game, cfg.lambda0)
    out.result.update(poa=res.poa, worst_nash_cost=res.worst_nash_cost,
                      social_opt_cost=res.social_opt_cost, exhaustive=res.exhaustive,
                      equilibrium=res.argmax_nash, optimum=res.argmin_opt)
    finite = []
    for tv in cfg.params.get("type_vectors", []):
        r = poa_finite(game, tv, cfg.params.get("mode", "exhaustive"))
        finite.append({"type_vector": tv, "poa": r.poa, "worst_nash_cost": r.worst_nash_cost,
                       "social_opt_cost": r.social_opt_cost, "exhaustive": r.exhaustive})
    out.result["finite"] = finite
    out.table("poa", ["n", "poa", "worst_nash_cost", "social_opt_cost", "exhaustive"],
              [["inf", res.poa, res.worst_nash_cost, res.social_opt_cost, res.exhaustive]]
              + [[len(f["type_vector"]), f["poa"], f["worst_nash_cost"], f["social_opt_cost"],
                  f["exhaustive"]] for f in finite])


def exp_poa_tail(cfg, game, out, workers):
    from .poa import poa_sup_over_types, poa_tail_experiment
    res = int(cfg.params.get("grid_resolution", 100))
    R, lam_star = poa_sup_over_types(game, cfg.lambda0, res)
    rows, draws, _ = poa_tail_experiment(
        game, cfg.lambda0, cfg.params.get("n_grid", [4, 8, 12]),
        int(cfg.params.get("budget", 10000)), float(cfg.params.get("epsilon", 0.05)),
        cfg.seed, R=R, workers=workers)
    out.result.update(R=R, argmax_lambda=lam_star,
                      rows=[{"n": r.n, "freq": r.freq, "hits": r.hits, "budget": r.budget,
                             "ci_low": r.ci_low, "ci_high": r.ci_high, "max_poa": r.max_poa}
                            for r in rows])
    out.table("poa_tail", ["n", "freq", "ci_low", "ci_high", "max_poa", "wall_time_ms"],
              [[r.n, r.freq, r.ci_low, r.ci_high, r.max_poa, r.wall_time_ms] for r in rows])
    out.table("poa_draws", ["n", "draw_seed", "poa", "worst_nash_cost", "social_opt_cost"],
              [[d.n, d.trial, d.poa, d.worst_nash_cost, d.social_opt_cost] for d in draws])
    out.plot("poa_tail", ["n", "freq"], [[r.n, r.freq] for r in rows])


RUNNERS = {
    "lln": exp_lln, "solve": exp_solve, "nash-set": exp_nash_set,
    "rate-function": exp_rate_function, "decay-slope": exp_decay_slope,
    "conditional-limit": exp_conditional_limit, "rare-equilibrium": exp_rare_equilibrium,
    "poa": exp_poa, "poa-tail": exp_poa_tail,
}
assert set(RUNNERS) == set(EXPERIMENTS)


# --- commands ----------------------------------------------------------------------

def run_config(cfg: ScenarioConfig, output_dir: Path, workers: int | None = None) -> dict:
    """Run one experiment and write result.json, tables and plot data under ``output_dir``."""
    from .parallel import resolve_workers

    workers = resolve_workers(workers)
    game = cfg.build_game()
    out = Output()
    RUNNERS[cfg.experiment](cfg, game, out, workers)
    summary = {"version": __version__, "experiment": cfg.experiment, "config": cfg.raw,
               "result": _jsonable(out.result)}
    output_dir.mkdir(parents=True, exist_ok=True)
    (output_dir / "plotdata").mkdir(exist_ok=True)
    text = json.dumps(summary, indent=2, sort_keys=True, allow_nan=False) + "\n"
    (output_dir / "result.json").write_text(text, encoding="utf-8")
    for name, (header, rows) in out.tables.items():
        _write_csv(output_dir / f"{name}.csv", header, rows)
    for name, (header, rows) in out.plots.items():
        _write_csv(output_dir / "plotdata" / f"{name}.csv", header, rows)
    return summary


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out_dir = Path(args.output or cfg.output or Path("results") / Path(args.config).stem)
    summary = run_config(cfg, out_dir, args.workers)
    print(f"{cfg.experiment}: wrote {out_dir / 'result.json'}")
    brief = {k: v for k, v in summary["result"].items() if not isinstance(v, (list, dict))}
    if brief:
        print(json.dumps(brief, sort_keys=True))
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(f"ok: {args.config} ({cfg.experiment} on {json.dumps(cfg.game_spec, sort_keys=True)})")
    return EXIT_OK


def cmd_list(args) -> int:
    print("scenarios:")
    for name, desc in SCENARIOS.items():
        print(f"  {name:<20} {desc}")
    print("bundled configs:")
    for name in bundled_config_names():
        print(f"  {name}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="anon-games", description="Anonymous-game experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the experiment of a scenario config")
    r.add_argument("config", help="config path or bundled config name")
    r.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: $ANON_GAMES_WORKERS or 1)")
    r.add_argument("--output", default=None, help="output directory")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)
    ls = sub.add_parser("list", help="list bundled scenarios and configs")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PreconditionError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (ConfigError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
