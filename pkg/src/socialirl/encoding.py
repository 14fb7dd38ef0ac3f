"""Fixed 6x16 feature matrix and per-user transition estimates."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .model import (
    FEATURE_NAMES,
    N_ACTIONS,
    N_FEATURES,
    N_PAIRS,
    N_STATES,
    Action,
    State,
    Trajectory,
    pair_from_index,
)

DEFAULT_ALPHA = 1.0


def encode_state_action(state: State | str, action: Action | str) -> np.ndarray:
    """Binary feature vector ordered (t, p+, p-, tw, rt, rp).

    ``n`` and ``nt`` have no indicator row, so they leave their half at zero.
    """
    state, action = State(state), Action(action)
    vec = np.zeros(N_FEATURES)
    if state is not State.N:
        vec[state.index] = 1.0
    if action is not Action.NT:
        vec[3 + action.index] = 1.0
    return vec


def build_feature_matrix() -> np.ndarray:
    """6x16 matrix whose column j encodes the pair with index j. Read-only."""
    F = np.column_stack([encode_state_action(*pair_from_index(j)) for j in range(N_PAIRS)])
    F.setflags(write=False)
    return F


FEATURE_MATRIX = build_feature_matrix()


def dump_feature_matrix(F: np.ndarray = FEATURE_MATRIX) -> str:
    """Feature matrix as comma-separated text with a header of pair labels."""
    cols = ["feature"] + [f"{s.value}|{a.value}" for s, a in map(pair_from_index, range(N_PAIRS))]
    lines = [",".join(cols)]
    for name, row in zip(FEATURE_NAMES, F):
        lines.append(",".join([name] + [str(int(v)) for v in row]))
    return "\n".join(lines) + "\n"


def count_transitions(trajectories: Trajectory | Iterable[Trajectory]) -> np.ndarray:
    """Counts ``C[a, s, s']`` of observed (s, a) -> s' moves between consecutive steps."""
    if isinstance(trajectories, Trajectory):
        trajectories = [trajectories]
    counts = np.zeros((N_ACTIONS, N_STATES, N_STATES))
    for traj in trajectories:
        steps = traj.steps
        for (s, a), (s_next, _) in zip(steps, steps[1:]):
            counts[a.index, s.index, s_next.index] += 1
    return counts


def transitions_from_counts(counts: np.ndarray, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    counts = np.asarray(counts, dtype=float)
    totals = counts.sum(axis=2, keepdims=True)
    denom = totals + N_STATES * alpha
    with np.errstate(invalid="ignore", divide="ignore"):
        P = (counts + alpha) / denom
    P = np.where(denom > 0, P, 1.0 / N_STATES)
    return P


def estimate_transitions(
    trajectories: Trajectory | Iterable[Trajectory], alpha: float = DEFAULT_ALPHA
) -> np.ndarray:
    """Laplace-smoothed transition tensor ``P[a, s, s']``.

    ``P = (count + alpha) / (row_count + 4 * alpha)``; rows never observed
    with ``alpha == 0`` fall back to uniform. Passing several trajectories
    pools their counts.
    """
    return transitions_from_counts(count_transitions(trajectories), alpha)


def check_transition_model(T: np.ndarray, atol: float = 1e-12) -> None:
    T = np.asarray(T)
    if T.shape != (N_ACTIONS, N_STATES, N_STATES):
        raise ValueError(f"transition tensor must have shape (4, 4, 4), got {T.shape}")
    if np.any(T < 0) or np.any(T > 1):
        raise ValueError("transition probabilities must lie in [0, 1]")
    if not np.allclose(T.sum(axis=2), 1.0, rtol=0, atol=atol):
        raise ValueError("transition rows must sum to 1")


def uniform_transitions() -> np.ndarray:
    return np.full((N_ACTIONS, N_STATES, N_STATES), 1.0 / N_STATES)

