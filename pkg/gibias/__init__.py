# pygibias/gibias/__init__.py
# Copyright (C) 2025-2026 The pygibias developers
# SPDX-License-Identifier: LGPL-3.0-or-later

"""
pygibias - rational learning under risk with the Gittins index, and the
status-quo, salience and overestimation biases it produces.
"""

__version__ = "0.1.0"
__author__ = "The pygibias developers"

from .decision import (
    Action,
    CostTable,
    ModelInputError,
    PayoffSpec,
    costs_to_payoffs,
    critical_probability_costs,
    critical_probability_payoffs,
    discount_for_lifetime,
    emt_rule,
    expected_cost,
    expected_payoff,
    mean_lifetime,
)
from .belief import (
    BeliefState,
    Observation,
    Outcome,
    elicit_prior,
    estimate_band,
    init_prior,
    parse_run,
    point_estimate,
    update,
    update_many,
)
from .gittins import (
    Decision,
    GittinsIndex,
    IndexResourceError,
    IndexTable,
    build_table,
    decide,
    index_payoff,
    lattice_sweep,
    normalized_index,
)
from .simulation import (
    Pattern,
    Scenario,
    Trajectory,
    classify,
    generate_scenario,
    run_ensemble,
    run_gi,
)
from .oracle import (
    DpResult,
    Strategy,
    TrueModel,
    compare_policies,
    dp_index,
    dp_optimal,
    lifetime_equivalence,
    policy_value_mc,
)
from .experiments import (
    BiasReport,
    ConfigError,
    ExperimentConfig,
    InvariantViolation,
    load_config,
)

__all__ = [
    "Action",
    "BeliefState",
    "BiasReport",
    "ConfigError",
    "CostTable",
    "Decision",
    "DpResult",
    "ExperimentConfig",
    "GittinsIndex",
    "IndexResourceError",
    "IndexTable",
    "InvariantViolation",
    "ModelInputError",
    "Observation",
    "Outcome",
    "Pattern",
    "PayoffSpec",
    "Scenario",
    "Strategy",
    "Trajectory",
    "TrueModel",
    "build_table",
    "classify",
    "compare_policies",
    "costs_to_payoffs",
    "critical_probability_costs",
    "critical_probability_payoffs",
    "decide",
    "discount_for_lifetime",
    "dp_index",
    "dp_optimal",
    "elicit_prior",
    "emt_rule",
    "estimate_band",
    "expected_cost",
    "expected_payoff",
    "generate_scenario",
    "index_payoff",
    "init_prior",
    "lattice_sweep",
    "lifetime_equivalence",
    "load_config",
    "mean_lifetime",
    "normalized_index",
    "parse_run",
    "point_estimate",
    "policy_value_mc",
    "run_ensemble",
    "run_gi",
    "update",
    "update_many",
]
