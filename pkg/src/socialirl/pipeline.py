"""End-to-end glue: event log -> trajectory store -> reward profiles."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .encoding import FEATURE_MATRIX, estimate_transitions
from .errors import SocialIRLError
from .ingestion import (
    DEFAULT_BOT_THRESHOLD,
    STANDARD,
    StanceRule,
    UserLabel,
    filter_stance,
    group_by_user,
    read_events,
    read_labels,
)
from .irl import DEFAULT_CONFIG, SolverConfig, estimate_rewards
from .model import RewardProfile, Trajectory
from .trajectory import DEFAULT_MIN_ACTIONS, DEFAULT_MIN_RESPONSES, build_trajectories, filter_eligible

log = logging.getLogger(__name__)


@dataclass
class BuildResult:
    trajectories: list[Trajectory]
    eligible: list[Trajectory]
    n_events: int
    n_malformed: int
    n_dropped_replies: int
    labels: dict[str, UserLabel] = field(default_factory=dict)

    @property
    def users_in(self) -> int:
        return len(self.trajectories)

    @property
    def n_steps(self) -> int:
        return sum(len(t) for t in self.eligible)

    def summary(self) -> str:
        return (
            f"users_in={self.users_in} users_eligible={len(self.eligible)} steps={self.n_steps} "
            f"events={self.n_events} dropped_replies={self.n_dropped_replies} malformed={self.n_malformed}"
        )


def build(
    events_path,
    labels_path=None,
    rule: StanceRule = STANDARD,
    bot_threshold: float = DEFAULT_BOT_THRESHOLD,
    strict_parse: bool = False,
    max_gap_seconds: int | None = None,
    min_actions: int = DEFAULT_MIN_ACTIONS,
    min_responses: int = DEFAULT_MIN_RESPONSES,
) -> BuildResult:
    parsed = read_events(events_path, strict=strict_parse)
    kept, dropped = filter_stance(parsed.events, rule)
    if dropped:
        log.info("stance rule dropped %d replies", dropped)
    trajs = build_trajectories(group_by_user(kept), rule, max_gap_seconds)
    labels = read_labels(labels_path, bot_threshold) if labels_path else {}
    return BuildResult(
        trajectories=trajs,
        eligible=filter_eligible(trajs, min_actions, min_responses),
        n_events=len(parsed.events),
        n_malformed=parsed.n_malformed,
        n_dropped_replies=dropped,
        labels=labels,
    )


def _estimate_one(args) -> RewardProfile | None:
    traj, T, cfg, alpha = args
    if T is None:
        T = estimate_transitions(traj, alpha)
    try:
        return estimate_rewards(traj, FEATURE_MATRIX, T, cfg)
    except SocialIRLError as exc:
        log.warning("user %s: %s", traj.user_id, exc)
        return None


def estimate_profiles(
    trajectories: list[Trajectory],
    cfg: SolverConfig = DEFAULT_CONFIG,
    alpha: float = 1.0,
    pool_transitions: bool = False,
    jobs: int = 1,
) -> list[RewardProfile]:
    """One reward profile per user, ordered by user id whatever ``jobs`` is.

    Transitions are estimated per user unless ``pool_transitions`` is set.
    Users the solver rejects are logged and left out.
    """
    trajectories = sorted(trajectories, key=lambda t: t.user_id)
    T_pooled: np.ndarray | None = estimate_transitions(trajectories, alpha) if pool_transitions else None
    tasks = [(t, T_pooled, cfg, alpha) for t in trajectories]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_estimate_one, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_estimate_one(t) for t in tasks]
    return [p for p in results if p is not None]
