"""Maximum-entropy inverse reinforcement learning on the 4-state, 4-action MDP.

Rewards are linear in the fixed features, ``R = F.T @ theta``. Each gradient
step plans with discounted soft value iteration under the current rewards,
rolls the resulting stochastic policy forward to get model feature
expectations, and moves ``theta`` toward the empirical ones.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .encoding import FEATURE_MATRIX, check_transition_model, estimate_transitions
from .errors import ConvergenceError, EligibilityError, NumericalError, StoreError
from .model import (
    FEATURE_NAMES,
    N_ACTIONS,
    N_FEATURES,
    N_PAIRS,
    N_STATES,
    RewardProfile,
    Trajectory,
)

PROFILE_HEADER = (
    ["user_id", "converged", "grad_norm"]
    + [f"r_{j}" for j in range(N_PAIRS)]
    + [f"w_{name}" for name in FEATURE_NAMES]
)


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    ``horizon=None`` rolls the model forward for as many steps as the data
    has. ``init`` is ``"zero"`` or ``"random"`` (normal, scale 0.1, drawn
    from ``seed``). ``discount_features`` weights step k by gamma**k in both
    the empirical and the model feature expectations.
    """

    gamma: float = 0.9
    learning_rate: float = 0.1
    max_iterations: int = 500
    gradient_tolerance: float = 1e-3
    value_iteration_tolerance: float = 1e-8
    max_value_iterations: int = 100_000
    horizon: int | None = None
    seed: int = 0
    init: str = "zero"
    discount_features: bool = False
    min_length: int = 5

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie strictly inside (0, 1), got {self.gamma}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if not (self.gradient_tolerance > 0 and self.value_iteration_tolerance > 0):
            raise ValueError("tolerances must be positive")
        if self.horizon is not None and self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.init not in ("zero", "random"):
            raise ValueError(f"init must be 'zero' or 'random', got {self.init!r}")


DEFAULT_CONFIG = SolverConfig()


def _logsumexp_rows(Q):
    m = Q.max(axis=1)
    return m + np.log(np.exp(Q - m[:, None]).sum(axis=1))


def _soft_values(R, T, gamma, tol, max_iter, v0=None):
    """Fixed point of V(s) = logsumexp_a [R(s,a) + gamma * E_{s'|s,a} V(s')].

    Returns (Q, V, n_iterations).
    """
    V = np.zeros(N_STATES) if v0 is None else np.array(v0, dtype=float)
    # T_sa[s, a, s'] so that T_sa @ V is the expected next value per (s, a)
    T_sa = np.ascontiguousarray(np.transpose(T, (1, 0, 2))) * gamma
    resid = math.inf
    for it in range(1, max_iter + 1):
        V_new = _logsumexp_rows(R + T_sa @ V)
        resid = float(np.max(np.abs(V_new - V)))
        if not math.isfinite(resid):
            raise NumericalError("soft value iteration produced non-finite values")
        V = V_new
        if resid < tol:
            break
    else:
        raise ConvergenceError(f"soft value iteration did not converge in {max_iter} sweeps", resid)
    return R + T_sa @ V, V, it


def _soft_values_newton(R, T, gamma, tol, max_iter, v0=None, max_newton=50):
    """Same fixed point as :func:`_soft_values`, reached by Newton steps.

    Each step solves ``(I - gamma * M_pi) dV = lse(Q) - V`` with ``M_pi`` the
    state chain under the current soft policy (soft policy iteration). Stops
    on the same sup-norm residual; falls back to plain sweeps otherwise.
    """
    V = np.zeros(N_STATES) if v0 is None else np.array(v0, dtype=float)
    T_sa = np.ascontiguousarray(np.transpose(T, (1, 0, 2))) * gamma
    eye = np.eye(N_STATES)
    for _ in range(max_newton):
        Q = R + T_sa @ V
        lse = _logsumexp_rows(Q)
        resid = np.abs(lse - V).max()
        if not math.isfinite(resid):
            raise NumericalError("soft value iteration produced non-finite values")
        if resid < tol:
            return R + T_sa @ lse, lse, 0
        pi = np.exp(Q - lse[:, None])
        # sum_a pi(a|s) * gamma * T[a, s, :]
        J = eye - np.einsum("sa,sak->sk", pi, T_sa)
        V = V + np.linalg.solve(J, lse - V)
    return _soft_values(R, T, gamma, tol, max_iter, V)


def soft_value_iteration(
    rewards: np.ndarray,
    T: np.ndarray,
    cfg: SolverConfig = DEFAULT_CONFIG,
    return_values: bool = False,
):
    """Soft-optimal stochastic policy ``pi[s, a]`` for pair rewards ``rewards``.

    Args:
        rewards: 16-vector indexed by pair index.
        T: transition tensor ``T[a, s, s']``.
        cfg: uses ``gamma``, ``value_iteration_tolerance`` and
            ``max_value_iterations``.
        return_values: also return ``(Q, V)``.

    Raises:
        ConvergenceError: sweep cap reached; carries the last sup-norm change.
    """
    R = np.asarray(rewards, dtype=float).reshape(N_STATES, N_ACTIONS)
    if not np.all(np.isfinite(R)):
        raise ValueError("rewards must be finite")
    T = np.asarray(T, dtype=float)
    check_transition_model(T, atol=1e-9)
    Q, V, _ = _soft_values(R, T, cfg.gamma, cfg.value_iteration_tolerance, cfg.max_value_iterations)
    policy = _policy(Q)
    if return_values:
        return policy, Q, V
    return policy


def _policy(Q):
    # max-subtracted softmax over actions
    return np.exp(Q - _logsumexp_rows(Q)[:, None])


def expected_visitation(
    policy: np.ndarray,
    T: np.ndarray,
    initial: np.ndarray,
    horizon: int,
    step_weights: Sequence[float] | None = None,
) -> np.ndarray:
    """Expected state-action visitation counts over ``horizon`` steps.

    ``D_1 = initial`` and ``D_{k+1}(s') = sum_{s,a} D_k(s) pi(a|s) T[a,s,s']``;
    the result is ``sum_k w_k D_k(s) pi(a|s)`` flattened by pair index, with
    ``w_k = 1`` unless ``step_weights`` is given. Unweighted, it sums to
    ``horizon``.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    initial = np.asarray(initial, dtype=float)
    if initial.shape != (N_STATES,) or np.any(initial < 0) or abs(initial.sum() - 1.0) > 1e-9:
        raise ValueError("initial must be a probability vector over the 4 states")
    if step_weights is not None and len(step_weights) != horizon:
        raise ValueError("step_weights must have one entry per step")
    policy = np.asarray(policy, dtype=float)
    T = np.asarray(T, dtype=float)
    # M[s, s'] = sum_a pi(a|s) T[a, s, s']
    M = np.einsum("sa,ask->sk", policy, T)
    D = initial
    occupancy = np.zeros(N_STATES)
    for k in range(horizon):
        w = 1.0 if step_weights is None else step_weights[k]
        occupancy += w * D
        D = D @ M
    return (occupancy[:, None] * policy).reshape(N_PAIRS)


def _as_list(trajectories) -> list[Trajectory]:
    if isinstance(trajectories, Trajectory):
        return [trajectories]
    return list(trajectories)


def _step_weights(lengths: Sequence[int], gamma: float | None) -> np.ndarray:
    """w_k = number of trajectories still running at step k (times gamma**k)."""
    lengths = np.asarray(lengths)
    horizon = int(lengths.max())
    alive = (lengths[None, :] > np.arange(horizon)[:, None]).sum(axis=1).astype(float)
    if gamma is not None:
        alive *= gamma ** np.arange(horizon)
    return alive


def empirical_feature_expectations(
    trajectories: Trajectory | Iterable[Trajectory],
    F: np.ndarray = FEATURE_MATRIX,
    discount: float | None = None,
) -> np.ndarray:
    """Average feature vector over all steps (gamma**k weighted if ``discount``)."""
    trajs = [t for t in _as_list(trajectories) if len(t)]
    if not trajs:
        raise ValueError("feature expectations need at least one step")
    counts = np.zeros(N_PAIRS)
    for traj in trajs:
        w = np.ones(len(traj)) if discount is None else discount ** np.arange(len(traj))
        np.add.at(counts, traj.pair_indices, w)
    return F @ (counts / counts.sum())


def initial_state_distribution(trajectories: Trajectory | Iterable[Trajectory]) -> np.ndarray:
    """Empirical distribution of first states."""
    d = np.zeros(N_STATES)
    for traj in _as_list(trajectories):
        if len(traj):
            d[traj.steps[0][0].index] += 1
    if d.sum() == 0:
        raise ValueError("no non-empty trajectory")
    return d / d.sum()


def model_feature_expectations(
    policy: np.ndarray,
    T: np.ndarray,
    initial: np.ndarray,
    step_weights: np.ndarray,
    F: np.ndarray = FEATURE_MATRIX,
) -> np.ndarray:
    E = expected_visitation(policy, T, initial, len(step_weights), step_weights)
    return F @ (E / np.sum(step_weights))


def _initial_theta(cfg: SolverConfig) -> np.ndarray:
    if cfg.init == "random":
        return np.random.default_rng(cfg.seed).normal(0.0, 0.1, N_FEATURES)
    return np.zeros(N_FEATURES)


def estimate_rewards(
    trajectories: Trajectory | Iterable[Trajectory],
    F: np.ndarray = FEATURE_MATRIX,
    T: np.ndarray | None = None,
    cfg: SolverConfig = DEFAULT_CONFIG,
    theta0: np.ndarray | None = None,
    min_length: int | None = None,
    user_id: str | None = None,
) -> RewardProfile:
    """Fit ``theta`` by gradient ascent on feature-expectation matching.

    ``trajectories`` is one user's trajectory, or several trajectories that
    share one reward (pooled). ``T`` defaults to the Laplace-smoothed
    estimate from the same data. The eligibility gate requires at least
    ``min_length`` (default ``cfg.min_length``) real actions and as many
    network responses; pass 0 to skip it.

    Stops once the sup-norm of the gradient drops below
    ``cfg.gradient_tolerance``, or after ``cfg.max_iterations`` updates.
    """
    trajs = [t for t in _as_list(trajectories) if len(t)]
    if not trajs:
        raise EligibilityError("no steps to learn from")
    min_length = cfg.min_length if min_length is None else min_length
    n_act = sum(t.n_actions for t in trajs)
    n_resp = sum(t.n_responses for t in trajs)
    if n_act < min_length or n_resp < min_length:
        raise EligibilityError(
            f"need >= {min_length} actions and responses, got {n_act} actions, {n_resp} responses"
        )
    if T is None:
        T = estimate_transitions(trajs)
    T = np.asarray(T, dtype=float)
    check_transition_model(T, atol=1e-9)
    F = np.asarray(F, dtype=float)

    disc = cfg.gamma if cfg.discount_features else None
    if cfg.horizon is None:
        weights = _step_weights([len(t) for t in trajs], disc)
    else:
        weights = _step_weights([cfg.horizon] * len(trajs), disc)
    initial = initial_state_distribution(trajs)
    target = empirical_feature_expectations(trajs, F, disc)

    theta = _initial_theta(cfg) if theta0 is None else np.array(theta0, dtype=float)
    V = None
    converged = False
    grad_norm = math.inf
    initial_grad_norm = None
    it = 0
    while True:
        R = (F.T @ theta).reshape(N_STATES, N_ACTIONS)
        Q, V, _ = _soft_values_newton(
            R, T, cfg.gamma, cfg.value_iteration_tolerance, cfg.max_value_iterations, V
        )
        policy = _policy(Q)
        grad = target - model_feature_expectations(policy, T, initial, weights, F)
        if not np.all(np.isfinite(grad)):
            raise NumericalError("non-finite gradient")
        grad_norm = float(np.max(np.abs(grad)))
        if initial_grad_norm is None:
            initial_grad_norm = grad_norm
        if grad_norm < cfg.gradient_tolerance:
            converged = True
            break
        if it >= cfg.max_iterations:
            break
        theta = theta + cfg.learning_rate * grad
        it += 1

    uid = trajs[0].user_id if user_id is None else user_id
    return RewardProfile(
        user_id=uid,
        rewards=F.T @ theta,
        weights=theta,
        converged=converged,
        grad_norm=grad_norm,
        iterations=it,
        n_steps=sum(len(t) for t in trajs),
        extra={"initial_grad_norm": initial_grad_norm, "policy": policy},
    )


def extract_weights(rewards: np.ndarray, F: np.ndarray = FEATURE_MATRIX) -> np.ndarray:
    """Least-squares ``theta`` with ``F.T @ theta ~= rewards``."""
    theta, *_ = np.linalg.lstsq(np.asarray(F, dtype=float).T, np.asarray(rewards, dtype=float), rcond=None)
    return theta


# -- per-user output records ------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def dump_profiles(profiles: Iterable[RewardProfile]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PROFILE_HEADER)
    for p in sorted(profiles, key=lambda p: p.user_id):
        w.writerow(
            [p.user_id, int(p.converged), _fmt(p.grad_norm)]
            + [_fmt(r) for r in p.rewards]
            + [_fmt(x) for x in p.weights]
        )
    return buf.getvalue()


def write_profiles(profiles: Iterable[RewardProfile], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dump_profiles(profiles))


def load_profiles(lines: Iterable[str]) -> list[RewardProfile]:
    reader = csv.reader(lines)
    header = next(reader, None)
    if header != PROFILE_HEADER:
        raise StoreError("profile file has an unexpected header")
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(PROFILE_HEADER):
            raise StoreError(f"line {lineno}: expected {len(PROFILE_HEADER)} fields, got {len(row)}")
        try:
            vals = [float(x) for x in row[2:]]
            out.append(
                RewardProfile(
                    user_id=row[0],
                    converged=bool(int(row[1])),
                    grad_norm=vals[0],
                    rewards=vals[1 : 1 + N_PAIRS],
                    weights=vals[1 + N_PAIRS :],
                )
            )
        except ValueError as exc:
            raise StoreError(f"line {lineno}: {exc}") from None
    return out


def read_profiles(path) -> list[RewardProfile]:
    with open(path, encoding="utf-8", newline="") as fh:
        return load_profiles(fh)

