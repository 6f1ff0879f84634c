"""Risk-sensitive average-cost control on finite Markov models.

Solves the discounted multiplicative functional equation in the log
domain, recovers average-cost optimality through the vanishing-discount
limit, verifies the entropy-penalized game that underlies the
construction, and diagnoses when the approach breaks down.
"""

from .average import (
    AverageConstant,
    AverageSolution,
    DiscountSweepResult,
    GrowthRateEstimate,
    PolicyRiskEvaluation,
    SweepEntry,
    VerificationReport,
    default_beta_grid,
    discount_sweep,
    estimate_average_constant,
    evaluate_policy_risk,
    growth_rate,
    optimality_residual,
    relative_value,
    solve_average,
    verify_optimality,
)
from .bellman import (
    DiscountedSolution,
    LogValueFunction,
    SolverConvergenceError,
    bellman_apply,
    solve_discounted,
    solve_untruncated,
    truncation_sweep,
)
from .diagnostics import (
    ConditionBReport,
    Example1Report,
    HittingCostSolution,
    condition_b_bound,
    condition_b_scan,
    example1_report,
    hitting_exp_cost,
    stopping_set,
)
from .entropy import (
    as_prob_vector,
    log_mgf,
    log_mgf_rows,
    relative_entropy,
    tilt,
    variational_gap,
)
from .game import (
    AdmissibilityCertificate,
    EntropyBoundReport,
    InadmissibleOpponentError,
    OpponentKernel,
    admissibility_check,
    discounted_game_cost,
    entropy_bound_check,
    game_cost_finite,
    log_mgf_horizon,
    opponent_tilt,
    random_tilted_opponent,
)
from .model import (
    FiniteMDP,
    ModelFormatError,
    ModelValidationError,
    RandomizedMarkovPolicy,
    Regime,
    StationaryPolicy,
    ValidationReport,
    Violation,
    classify_regime,
    enumerate_stationary_policies,
    load_model,
    make_example1,
    neutral_average_cost,
    sample_stationary_policies,
    save_model,
    validate_model,
)

__version__ = "0.1.0"

__all__ = [
    "AverageConstant",
    "AverageSolution",
    "AdmissibilityCertificate",
    "ConditionBReport",
    "DiscountSweepResult",
    "DiscountedSolution",
    "EntropyBoundReport",
    "Example1Report",
    "FiniteMDP",
    "GrowthRateEstimate",
    "HittingCostSolution",
    "InadmissibleOpponentError",
    "LogValueFunction",
    "ModelFormatError",
    "ModelValidationError",
    "OpponentKernel",
    "PolicyRiskEvaluation",
    "RandomizedMarkovPolicy",
    "Regime",
    "SolverConvergenceError",
    "StationaryPolicy",
    "SweepEntry",
    "ValidationReport",
    "VerificationReport",
    "Violation",
    "admissibility_check",
    "as_prob_vector",
    "bellman_apply",
    "classify_regime",
    "condition_b_bound",
    "condition_b_scan",
    "default_beta_grid",
    "discount_sweep",
    "discounted_game_cost",
    "entropy_bound_check",
    "enumerate_stationary_policies",
    "estimate_average_constant",
    "evaluate_policy_risk",
    "example1_report",
    "game_cost_finite",
    "growth_rate",
    "hitting_exp_cost",
    "load_model",
    "log_mgf",
    "log_mgf_horizon",
    "log_mgf_rows",
    "make_example1",
    "neutral_average_cost",
    "opponent_tilt",
    "optimality_residual",
    "random_tilted_opponent",
    "relative_entropy",
    "relative_value",
    "sample_stationary_policies",
    "save_model",
    "solve_average",
    "solve_discounted",
    "solve_untruncated",
    "stopping_set",
    "tilt",
    "truncation_sweep",
    "validate_model",
    "variational_gap",
    "verify_optimality",
]
