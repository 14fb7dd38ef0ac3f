"""Reward recovery for social-media interaction strategies via maximum-entropy IRL."""

from .analytics import CohortReport, aggregate_cohort, emit_report, log_odds_tokens
from .encoding import FEATURE_MATRIX, build_feature_matrix, encode_state_action, estimate_transitions
from .ingestion import (
    Cohort,
    EventKind,
    RawEvent,
    StanceRule,
    UserLabel,
    apply_bot_threshold,
    apply_stance_threshold,
    parse_events,
)
from .irl import (
    SolverConfig,
    empirical_feature_expectations,
    estimate_rewards,
    expected_visitation,
    extract_weights,
    soft_value_iteration,
)
from .model import Action, RewardProfile, State, StateActionPair, Trajectory, pair_index
from .simulator import generate_trajectories, recovery_experiment
from .trajectory import build_trajectory, filter_eligible

__version__ = "0.1.0"
