"""Synthetic trajectories from a known reward, and the simulate-then-recover check.

Randomness: every trajectory ``i`` draws from its own numpy ``Generator``
backed by PCG64, seeded with ``SeedSequence([seed, i])``. Each step consumes
exactly two uniforms from ``Generator.random()``: one for the action, one for
the next state, each sampled by inverse CDF over the canonical order. The
first state uses one extra uniform at the start of the stream.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import spearmanr

from .encoding import FEATURE_MATRIX, check_transition_model, estimate_transitions
from .ingestion import EventKind, RawEvent
from .irl import DEFAULT_CONFIG, SolverConfig, estimate_rewards, soft_value_iteration
from .model import ACTIONS, N_ACTIONS, N_STATES, STATES, Action, RewardProfile, State, Trajectory

# Documented recovery fixture. Reward weights ordered (t, p+, p-, tw, rt, rp):
# reshares pay most, replies are costly, supportive replies are sought.
FIXTURE_THETA = np.array([0.5, 1.0, -1.0, 0.5, 2.0, -1.5])
# Plain gradient ascent at the default step 0.1 needs ~1400 iterations on the
# fixture; step 1.0 converges in ~140 to the same weights.
FIXTURE_CONFIG = SolverConfig(learning_rate=1.0)


def fixture_transitions(stay: float = 0.55) -> np.ndarray:
    """Action-steered dynamics: each action favours one next state.

    tw -> t, rt -> p+, rp -> p-, nt -> n with probability ``stay``, the rest
    spread evenly. Without this coupling, state weights cannot affect the
    choice of action and are not identifiable.
    """
    other = (1.0 - stay) / (N_STATES - 1)
    T = np.full((N_ACTIONS, N_STATES, N_STATES), other)
    for a in range(N_ACTIONS):
        T[a, :, a] = stay
    return T


FIXTURE_TRANSITIONS = fixture_transitions()

LOW_DATA_STEPS = 500

_EPOCH0 = 1_645_000_000
_STEP_SECONDS = 3600
_REACT_SECONDS = 60


def _rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))


def _draw(cdf: np.ndarray, u: float) -> int:
    return min(int(np.searchsorted(cdf, u, side="right")), len(cdf) - 1)


def sample_trajectories(
    policy: np.ndarray,
    T: np.ndarray,
    count: int,
    length: int,
    seed: int,
    initial: np.ndarray | None = None,
    user_prefix: str = "sim",
) -> list[Trajectory]:
    """Roll ``policy`` through ``T``; see the module docstring for the RNG contract."""
    if count < 1 or length < 1:
        raise ValueError("count and length must be >= 1")
    initial = np.full(N_STATES, 1.0 / N_STATES) if initial is None else np.asarray(initial, float)
    init_cdf = np.cumsum(initial)
    pol_cdf = np.cumsum(policy, axis=1)
    T_cdf = np.cumsum(T, axis=2)
    width = len(str(count - 1))
    out = []
    for i in range(count):
        rng = _rng(seed, i)
        s = _draw(init_cdf, rng.random())
        steps = []
        for _ in range(length):
            u_a, u_s = rng.random(2)
            a = _draw(pol_cdf[s], u_a)
            steps.append((STATES[s], ACTIONS[a]))
            s = _draw(T_cdf[a, s], u_s)
        stamps = tuple(_EPOCH0 + k * _STEP_SECONDS for k in range(length))
        out.append(Trajectory(f"{user_prefix}-{i:0{width}d}", tuple(steps), stamps))
    return out


def generate_trajectories(
    theta_true: np.ndarray,
    T: np.ndarray = FIXTURE_TRANSITIONS,
    cfg: SolverConfig = DEFAULT_CONFIG,
    count: int = 200,
    length: int = 50,
    seed: int = 0,
    initial: np.ndarray | None = None,
    user_prefix: str = "sim",
    reward_offset: float = 0.0,
) -> list[Trajectory]:
    """Sample trajectories from the soft-optimal policy of ``R = F.T @ theta_true``.

    ``reward_offset`` is added to all 16 rewards; it leaves the policy, and
    hence the samples, unchanged.
    """
    theta_true = np.asarray(theta_true, dtype=float)
    if theta_true.shape != (6,):
        raise ValueError(f"theta must have 6 entries, got {theta_true.shape}")
    check_transition_model(T, atol=1e-9)
    policy = soft_value_iteration(FEATURE_MATRIX.T @ theta_true + reward_offset, T, cfg)
    return sample_trajectories(policy, T, count, length, seed, initial, user_prefix)


def trajectory_to_events(traj: Trajectory, seed: int = 0, index: int = 0) -> list[RawEvent]:
    """Render a trajectory as raw events in the ingestion format.

    A step ``(s, a)`` becomes a response event at the step time (unless
    ``s`` is ``n``) followed 60 s later by the own action (unless ``a`` is
    ``nt``). Reply stances are drawn uniformly from (0.5, 1] for ``p+`` and
    [0, 0.5] for ``p-``. ``(n, nt)`` steps leave no trace; a ``(s, nt)``
    step directly followed by ``(n, a)`` rebuilds as ``(s, a)``, since
    nothing in an event log tells the two apart.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index, 1])))
    events = []
    uid = traj.user_id
    for k, ((s, a), ts) in enumerate(zip(traj.steps, traj.timestamps)):
        ts = ts if ts > 0 else _EPOCH0 + k * _STEP_SECONDS
        if s is State.T:
            events.append(RawEvent(uid, ts, EventKind.GOT_RESHARED))
        elif s is State.P_POS:
            events.append(RawEvent(uid, ts, EventKind.GOT_REPLY, stance=float(1.0 - 0.5 * rng.random())))
        elif s is State.P_NEG:
            events.append(RawEvent(uid, ts, EventKind.GOT_REPLY, stance=float(0.5 * rng.random())))
        if a is not Action.NT:
            kind = {Action.TW: EventKind.OWN_POST, Action.RT: EventKind.OWN_RESHARE, Action.RP: EventKind.OWN_REPLY}[a]
            events.append(RawEvent(uid, ts + _REACT_SECONDS, kind))
    return events


def action_histogram(trajectories) -> dict[str, int]:
    counts = {a.value: 0 for a in ACTIONS}
    for traj in trajectories:
        for _, a in traj.steps:
            counts[a.value] += 1
    return counts


def rank_correlation(x: np.ndarray, y: np.ndarray) -> float:
    """Spearman's rho with average ranks for ties; nan if either side is constant."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return float(spearmanr(x, y).statistic)


def argmax_agreement(r_true: np.ndarray, r_hat: np.ndarray) -> int:
    """Number of states whose best action is the same under both reward vectors."""
    a = np.asarray(r_true).reshape(N_STATES, N_ACTIONS).argmax(axis=1)
    b = np.asarray(r_hat).reshape(N_STATES, N_ACTIONS).argmax(axis=1)
    return int(np.sum(a == b))


@dataclass
class RecoveryReport:
    spearman: float
    argmax_agreement: int
    true_rewards: np.ndarray
    profile: RewardProfile
    n_steps: int
    low_data: bool
    action_histogram: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "spearman": self.spearman,
            "argmax_agreement": self.argmax_agreement,
            "low_data": self.low_data,
            "n_steps": self.n_steps,
            "converged": self.profile.converged,
            "grad_norm": self.profile.grad_norm,
            "iterations": self.profile.iterations,
            "true_rewards": [float(x) for x in self.true_rewards],
            "recovered_rewards": [float(x) for x in self.profile.rewards],
            "recovered_weights": [float(x) for x in self.profile.weights],
            "action_histogram": self.action_histogram,
        }


def recovery_experiment(
    theta_true: np.ndarray,
    T: np.ndarray = FIXTURE_TRANSITIONS,
    cfg: SolverConfig = DEFAULT_CONFIG,
    count: int = 200,
    length: int = 50,
    seed: int = 0,
    alpha: float = 1.0,
    trajectories: list[Trajectory] | None = None,
) -> RecoveryReport:
    """Sample from ``theta_true``, re-estimate, and score the agreement.

    All sampled trajectories are treated as one agent; transitions are
    re-estimated from them (Laplace ``alpha``). Runs below
    ``LOW_DATA_STEPS`` total steps are flagged ``low_data``.
    """
    if trajectories is None:
        trajectories = generate_trajectories(theta_true, T, cfg, count, length, seed)
    T_hat = estimate_transitions(trajectories, alpha)
    profile = estimate_rewards(trajectories, FEATURE_MATRIX, T_hat, cfg, min_length=0, user_id="recovered")
    r_true = FEATURE_MATRIX.T @ np.asarray(theta_true, dtype=float)
    n_steps = sum(len(t) for t in trajectories)
    low = n_steps < LOW_DATA_STEPS
    if low:
        warnings.warn(f"recovery run on only {n_steps} steps; estimates are unreliable", RuntimeWarning)
    return RecoveryReport(
        spearman=rank_correlation(r_true, profile.rewards),
        argmax_agreement=argmax_agreement(r_true, profile.rewards),
        true_rewards=r_true,
        profile=profile,
        n_steps=n_steps,
        low_data=low,
        action_histogram=action_histogram(trajectories),
    )


# Cohort fixture behind the bundled dataset: bots post and reshare, chase
# reshares and supportive replies; humans reply and reshare, engage with
# opposition.
BOT_THETA = np.array([1.0, 1.0, -0.5, 1.5, 1.0, -1.0])
HUMAN_THETA = np.array([0.2, 0.3, 0.5, -0.5, 0.8, 1.0])


def cohort_dataset(
    n_bots: int = 20,
    n_humans: int = 30,
    min_steps: int = 4,
    max_steps: int = 40,
    seed: int = 7,
    T: np.ndarray = FIXTURE_TRANSITIONS,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> tuple[list[RawEvent], dict[str, float]]:
    """Synthetic labeled population: events for every user plus bot scores.

    User ``i`` gets a length drawn from ``[min_steps, max_steps]`` and its
    own sampling stream, so short users fall below the eligibility gates.
    Bot scores are drawn from (0.55, 1.0) for bots and [0, 0.45) for humans.
    """
    rng = _rng(seed, 2**32 - 1)  # population-level stream, disjoint from per-user ones
    n = n_bots + n_humans
    lengths = rng.integers(min_steps, max_steps + 1, size=n)
    policies = {
        True: soft_value_iteration(FEATURE_MATRIX.T @ BOT_THETA, T, cfg),
        False: soft_value_iteration(FEATURE_MATRIX.T @ HUMAN_THETA, T, cfg),
    }
    events: list[RawEvent] = []
    scores: dict[str, float] = {}
    for i in range(n):
        is_bot = i < n_bots
        (traj,) = sample_trajectories(policies[is_bot], T, 1, int(lengths[i]), seed + 1000 * (i + 1))
        uid = f"user-{i:03d}"
        shift = i * 86_400
        traj = Trajectory(uid, traj.steps, tuple(t + shift for t in traj.timestamps))
        events.extend(trajectory_to_events(traj, seed, i))
        score = 0.55 + 0.45 * rng.random() if is_bot else 0.45 * rng.random()
        scores[uid] = round(float(score), 4)
    events.sort(key=lambda e: (e.user_id, e.ts))
    return events, scores
