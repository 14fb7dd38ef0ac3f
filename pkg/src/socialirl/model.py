"""MDP vocabulary: states, actions, state-action pairs, trajectories, reward profiles."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Sequence

import numpy as np

N_STATES = 4
N_ACTIONS = 4
N_PAIRS = N_STATES * N_ACTIONS
N_FEATURES = 6

# row order of the feature matrix and of every weight vector
FEATURE_NAMES = ("t", "p+", "p-", "tw", "rt", "rp")


class State(str, Enum):
    """Network response the user is currently exposed to."""

    T = "t"  # got reshared
    P_POS = "p+"  # got supportive reply/mention
    P_NEG = "p-"  # got opposing reply/mention
    N = "n"  # no engagement

    @property
    def index(self) -> int:
        return _STATE_INDEX[self]


class Action(str, Enum):
    """What the user does in response."""

    TW = "tw"  # new content
    RT = "rt"  # reshare
    RP = "rp"  # reply/mention
    NT = "nt"  # nothing

    @property
    def index(self) -> int:
        return _ACTION_INDEX[self]


STATES: tuple[State, ...] = tuple(State)
ACTIONS: tuple[Action, ...] = tuple(Action)
_STATE_INDEX = {s: i for i, s in enumerate(STATES)}
_ACTION_INDEX = {a: i for i, a in enumerate(ACTIONS)}


def pair_index(state: State | str, action: Action | str) -> int:
    """Index of a state-action pair: ``4 * state.index + action.index``."""
    return N_ACTIONS * State(state).index + Action(action).index


def pair_from_index(index: int) -> tuple[State, Action]:
    if not 0 <= index < N_PAIRS:
        raise ValueError(f"pair index out of range: {index}")
    s, a = divmod(index, N_ACTIONS)
    return STATES[s], ACTIONS[a]


@dataclass(frozen=True)
class StateActionPair:
    state: State
    action: Action

    @property
    def index(self) -> int:
        return pair_index(self.state, self.action)

    def __str__(self) -> str:
        return f"({self.state.value},{self.action.value})"


PAIRS: tuple[StateActionPair, ...] = tuple(
    StateActionPair(*pair_from_index(i)) for i in range(N_PAIRS)
)


@dataclass(frozen=True)
class Trajectory:
    """Chronological (state, action) steps of one user.

    ``timestamps[k]`` is the epoch second at which step ``k`` opened.
    """

    user_id: str
    steps: tuple[tuple[State, Action], ...] = ()
    timestamps: tuple[int, ...] = ()

    def __post_init__(self):
        steps = tuple((State(s), Action(a)) for s, a in self.steps)
        object.__setattr__(self, "steps", steps)
        if not self.timestamps:
            object.__setattr__(self, "timestamps", (0,) * len(steps))
        else:
            object.__setattr__(self, "timestamps", tuple(int(t) for t in self.timestamps))
        if len(self.timestamps) != len(steps):
            raise ValueError(
                f"{len(steps)} steps but {len(self.timestamps)} timestamps for user {self.user_id!r}"
            )
        ts = self.timestamps
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError(f"timestamps decrease in trajectory of user {self.user_id!r}")

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self) -> Iterator[tuple[State, Action]]:
        return iter(self.steps)

    @property
    def pair_indices(self) -> np.ndarray:
        return np.array([pair_index(s, a) for s, a in self.steps], dtype=np.int64)

    @property
    def n_actions(self) -> int:
        """Steps where the user actually did something."""
        return sum(1 for _, a in self.steps if a is not Action.NT)

    @property
    def n_responses(self) -> int:
        """Steps opened by a network response."""
        return sum(1 for s, _ in self.steps if s is not State.N)


@dataclass(frozen=True)
class RewardProfile:
    """Recovered reward structure of one user.

    ``rewards`` is indexed by :func:`pair_index`; ``weights`` follows
    :data:`FEATURE_NAMES`.
    """

    user_id: str
    rewards: np.ndarray
    weights: np.ndarray
    converged: bool
    grad_norm: float
    iterations: int = 0
    n_steps: int = 0
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        rewards = np.asarray(self.rewards, dtype=float).reshape(N_PAIRS)
        weights = np.asarray(self.weights, dtype=float).reshape(N_FEATURES)
        if not (np.all(np.isfinite(rewards)) and np.all(np.isfinite(weights))):
            raise ValueError(f"non-finite reward profile for user {self.user_id!r}")
        rewards.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "weights", weights)

    def reward(self, state: State | str, action: Action | str) -> float:
        return float(self.rewards[pair_index(state, action)])

    def reward_table(self) -> np.ndarray:
        """Rewards as a 4x4 ``[state, action]`` array."""
        return self.rewards.reshape(N_STATES, N_ACTIONS)


def trajectory_from_pairs(user_id: str, pairs: Sequence[tuple[str, str]]) -> Trajectory:
    """Convenience constructor from string tags, timestamps 0..n-1."""
    return Trajectory(user_id, tuple(pairs), tuple(range(len(pairs))))
