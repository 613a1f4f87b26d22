"""Robust solutions for multi-defender Stackelberg security games.

Approximate Nash equilibria and alpha-core structures built by water-filling
against a softmax attacker, with brute-force grid verifiers and perturbation
checks.
"""

from .abf import Abf, check_axioms, derive_scale, induce_distribution, lipschitz_bound
from .alloc import AllocResult, NoLevelPointError, alloc, find_level_input, gc_alloc
from .core import (
    CoalitionStructure,
    CoreLpSolution,
    build_core_solution,
    build_subset_resistant,
    check_gamma_deviation,
    constructive_revenge,
    core_lp,
    verify_alpha_core,
)
from .equilibrium import NeConstants, PreconditionError, SolveReport, calc_ne, ne_constants, verify_ne
from .game import GameError, GameSpec, StrategyProfile, min_max_height
from .oracle import ExampleGame, example, grid_best_deviation
from .robustness import PerturbationSpec, certify_robust, game_distance, perturb_game, robustness_constant

__all__ = [
    "Abf",
    "check_axioms",
    "derive_scale",
    "induce_distribution",
    "lipschitz_bound",
    "AllocResult",
    "NoLevelPointError",
    "alloc",
    "find_level_input",
    "gc_alloc",
    "CoalitionStructure",
    "CoreLpSolution",
    "build_core_solution",
    "build_subset_resistant",
    "check_gamma_deviation",
    "constructive_revenge",
    "core_lp",
    "verify_alpha_core",
    "NeConstants",
    "PreconditionError",
    "SolveReport",
    "calc_ne",
    "ne_constants",
    "verify_ne",
    "GameError",
    "GameSpec",
    "StrategyProfile",
    "min_max_height",
    "ExampleGame",
    "example",
    "grid_best_deviation",
    "PerturbationSpec",
    "certify_robust",
    "game_distance",
    "perturb_game",
    "robustness_constant",
]

__version__ = "0.1.0"
