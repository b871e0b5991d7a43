"""Solvers for sequential table selection where sharing a table lowers its
value and customers learn the hidden state from each other's signals."""

from crgame.bayes import (
    DecisionContext,
    StrategyTable,
    TrialRecord,
    best_response,
    expected_utility,
    signal_partition,
    simulate_realization,
    solve_game,
    successor_distribution,
)
from crgame.core import (
    Belief,
    GameSpec,
    SignalHistory,
    UtilityRule,
    belief_from_history,
    belief_update,
    binary_signal_model,
    mirrored_spec,
    utility,
)
from crgame.montecarlo import (
    Deviation,
    ExperimentConfig,
    ExperimentResult,
    deviation_experiment,
    exact_expectation,
    run_trials,
    sweep,
)
from crgame.perfect import (
    equilibrium_grouping,
    is_equilibrium_grouping,
    play_sequential_perfect,
    prune_candidates,
    subgame_perfect_action,
)

__all__ = [
    "Belief",
    "DecisionContext",
    "Deviation",
    "ExperimentConfig",
    "ExperimentResult",
    "GameSpec",
    "SignalHistory",
    "StrategyTable",
    "TrialRecord",
    "UtilityRule",
    "belief_from_history",
    "belief_update",
    "best_response",
    "binary_signal_model",
    "deviation_experiment",
    "equilibrium_grouping",
    "exact_expectation",
    "expected_utility",
    "is_equilibrium_grouping",
    "mirrored_spec",
    "play_sequential_perfect",
    "prune_candidates",
    "run_trials",
    "signal_partition",
    "simulate_realization",
    "solve_game",
    "subgame_perfect_action",
    "successor_distribution",
    "sweep",
    "utility",
]
