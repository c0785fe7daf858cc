"""Simulation and maximum score estimation for one-to-one TU matching markets."""

from matchscore.de import DEConfig, DEResult, maximize
from matchscore.equilibrium import (
    EquilibriumError,
    MatchingOutcome,
    ObservedData,
    StabilityReport,
    extract_transfers,
    solve_assignment,
    verify_stability,
)
from matchscore.estimator import Candidate, CompiledScore, Estimate, GridResult, ScoreValue, estimate, objective_grid, score
from matchscore.inequalities import (
    Family,
    InequalitySet,
    Model,
    ScoreConfig,
    build_inequalities,
    count_formula,
    evaluate_inequality,
)
from matchscore.market import (
    AgentRef,
    Case,
    Market,
    ProductionSpec,
    generate_market,
    joint_production,
    production_matrix,
    value_matrix,
)
from matchscore.montecarlo import (
    ExperimentSummary,
    Scenario,
    lambda_sweep,
    run_experiment,
    run_replication,
    unmatched_threshold_scan,
)

__version__ = "0.1.0"
