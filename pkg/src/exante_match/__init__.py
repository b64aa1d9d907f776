"""Ex-ante cutoff matching with state-dependent preferences and public signals."""

import sys

from exante_match.clearing import (
    ClearingConfig,
    ClearingResult,
    NonConvergence,
    apply_operator,
    coordinate_update,
    greatest_market_clearing,
    least_market_clearing,
    no_deterministic_clearing_witness,
    rural_hospital_check,
    verify_market_clearing,
)
from exante_match.decisions import (
    GeneralDecisionProfile,
    NaiveRule,
    check_gross_substitutes,
    check_obedience,
    lift_naive,
    naive_decide,
)
from exante_match.demand import (
    admission_probabilities,
    choice_set,
    cutoff_distribution,
    demand,
    matching_distribution,
    student_outcomes,
)
from exante_match.information import (
    Signal,
    apply_garbling,
    belief_distribution,
    check_bayes_plausible,
    full_disclosure,
    is_more_informative,
    null_signal,
    partition_signal,
    posterior,
    profile_more_informative,
    uniform_profile,
)
from exante_match.model import (
    MarketInstance,
    MatchingError,
    TieError,
    make_instance,
    rank,
    validate_instance,
)
from exante_match.oracle import SimulationConfig, enumerate_outcomes, simulate
from exante_match.scenario import Scenario, ScenarioError, dump_scenario, load_scenario
from exante_match.welfare import (
    corollary1_check,
    expected_program_utility,
    expected_utility,
    pareto_compare,
    rank_distribution,
    rank_distributions,
    serial_dictatorship,
    student_utilities,
    welfare_monotonicity_check,
    welfare_report,
)

__all__ = [name for name, obj in dict(globals()).items()
           if not name.startswith("_") and not isinstance(obj, type(sys))]
