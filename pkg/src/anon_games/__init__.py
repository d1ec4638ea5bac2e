"""Equilibria of anonymous games: Cournot-Nash limits, congestion networks, large deviations and PoA."""

__version__ = "0.1.0"

from .measures import (TypeActionDistribution, check_type_distribution, empirical_distribution,
                       marginal_action, marginal_type, relative_entropy, set_distance, tv_distance)
from .game import (AdmissibleSet, GameSpec, NashCertificate, PreconditionError, admissible_project,
                   deviation_gain, enumerate_cournot_nash_bruteforce, is_cournot_nash, nash_gap)
from .congestion import (CongestionNetwork, CostCurve, generate_routes, load_network,
                         network_from_dict, uniqueness_span_check)
from .entry import (EntryGame, analytic_cournot_nash, construct_n_player_equilibrium, lambda_q,
                    participation_equilibria, share_equilibria)
from .finite_nash import (ActionProfile, ConvergenceError, NashSet, best_response_dynamics,
                          enumerate_nash_set, epsilon_nash_check, sample_nash)
from .nonatomic import (SolverConfig, SolveResult, solve_cournot_nash, solve_social_optimum,
                        uniqueness_probe)
from .large_deviations import (EntryScenario, EventSpec, RateFunctionResult,
                               conditional_limit_experiment, decay_slope_experiment,
                               rare_equilibrium_probability, rate_function)
from .poa import (PoAResult, average_cost, poa_finite, poa_nonatomic, poa_sup_over_types,
                  poa_tail_experiment)

__all__ = [
    "__version__",
    "TypeActionDistribution", "check_type_distribution", "empirical_distribution",
    "marginal_action", "marginal_type", "relative_entropy", "set_distance", "tv_distance",
    "AdmissibleSet", "GameSpec", "NashCertificate", "PreconditionError", "admissible_project",
    "deviation_gain", "enumerate_cournot_nash_bruteforce", "is_cournot_nash", "nash_gap",
    "CongestionNetwork", "CostCurve", "generate_routes", "load_network", "network_from_dict",
    "uniqueness_span_check",
    "EntryGame", "analytic_cournot_nash", "construct_n_player_equilibrium", "lambda_q",
    "participation_equilibria", "share_equilibria",
    "ActionProfile", "ConvergenceError", "NashSet", "best_response_dynamics",
    "enumerate_nash_set", "epsilon_nash_check", "sample_nash",
    "SolverConfig", "SolveResult", "solve_cournot_nash", "solve_social_optimum",
    "uniqueness_probe",
    "EntryScenario", "EventSpec", "RateFunctionResult", "conditional_limit_experiment",
    "decay_slope_experiment", "rare_equilibrium_probability", "rate_function",
    "PoAResult", "average_cost", "poa_finite", "poa_nonatomic", "poa_sup_over_types",
    "poa_tail_experiment",
]
