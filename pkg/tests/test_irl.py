import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import normal_equations, random_transitions, soft_policy_oracle, visitation_oracle
from socialirl.encoding import FEATURE_MATRIX as F
from socialirl.encoding import estimate_transitions, uniform_transitions
from socialirl.errors import ConvergenceError, EligibilityError, StoreError
from socialirl.irl import (
    SolverConfig,
    _soft_values,
    _soft_values_newton,
    dump_profiles,
    empirical_feature_expectations,
    estimate_rewards,
    expected_visitation,
    extract_weights,
    load_profiles,
    soft_value_iteration,
)
from socialirl.model import Trajectory, pair_index
from socialirl.simulator import FIXTURE_CONFIG, FIXTURE_THETA, FIXTURE_TRANSITIONS


def traj(pairs, uid="u"):
    return Trajectory(uid, tuple(pairs), tuple(range(len(pairs))))


# -- soft value iteration ----------------------------------------------------


def test_constant_rewards_give_uniform_policy(rng):
    for c in (-3.0, 0.0, 7.5):
        pi = soft_value_iteration(np.full(16, c), random_transitions(rng))
        assert np.max(np.abs(pi - 0.25)) < 1e-9


def test_myopic_limit_is_softmax(rng):
    R = rng.normal(size=16)
    pi = soft_value_iteration(R, random_transitions(rng), SolverConfig(gamma=1e-12))
    Rm = R.reshape(4, 4)
    closed = np.exp(Rm) / np.exp(Rm).sum(axis=1, keepdims=True)
    assert np.max(np.abs(pi - closed)) < 1e-9


def test_matches_fixed_point_oracle():
    R = np.zeros(16)
    R[pair_index("t", "rt")] = 1.0
    T = uniform_transitions()
    pi = soft_value_iteration(R, T)
    assert np.max(np.abs(pi - soft_policy_oracle(R, T, 0.9))) < 1e-6


def test_matches_oracle_random_inputs(rng):
    for _ in range(5):
        R, T = rng.normal(size=16) * 2, random_transitions(rng)
        assert np.max(np.abs(soft_value_iteration(R, T) - soft_policy_oracle(R, T, 0.9))) < 1e-6


def test_newton_solver_agrees_with_sweeps(rng):
    for _ in range(20):
        R, T = rng.normal(size=(4, 4)) * 3, random_transitions(rng)
        for gamma in (0.5, 0.9, 0.99):
            Q1, V1, _ = _soft_values(R, T, gamma, 1e-12, 100_000)
            Q2, V2, _ = _soft_values_newton(R, T, gamma, 1e-12, 100_000)
            assert np.max(np.abs(V1 - V2)) < 1e-9
            assert np.max(np.abs(Q1 - Q2)) < 1e-9


def test_sweep_cap_raises_with_residual():
    cfg = SolverConfig(max_value_iterations=3)
    with pytest.raises(ConvergenceError) as exc:
        soft_value_iteration(np.ones(16), uniform_transitions(), cfg)
    assert exc.value.residual > 0


def test_large_rewards_are_stable():
    R = np.zeros(16)
    R[3] = 500.0
    pi = soft_value_iteration(R, uniform_transitions())
    assert np.all(np.isfinite(pi))
    assert pi[0, 3] == pytest.approx(1.0)


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        soft_value_iteration(np.full(16, np.nan), uniform_transitions())
    with pytest.raises(ValueError):
        soft_value_iteration(np.zeros(16), np.ones((4, 4, 4)))
    with pytest.raises(ValueError):
        SolverConfig(gamma=1.0)
    with pytest.raises(ValueError):
        SolverConfig(gamma=0.0)


rewards_st = arrays(np.float64, 16, elements=st.floats(-20, 20))


@given(rewards_st)
@settings(max_examples=60, deadline=None)
def test_policy_rows_sum_to_one(R):
    pi = soft_value_iteration(R, FIXTURE_TRANSITIONS)
    assert np.all((pi >= 0) & (pi <= 1))
    assert np.max(np.abs(pi.sum(axis=1) - 1)) < 1e-9


@given(rewards_st, st.sampled_from([-10.0, 1.0, 100.0]))
@settings(max_examples=30, deadline=None)
def test_shift_invariance(R, c):
    a = soft_value_iteration(R, FIXTURE_TRANSITIONS)
    b = soft_value_iteration(R + c, FIXTURE_TRANSITIONS)
    assert np.max(np.abs(a - b)) < 1e-6


# -- expected visitation -----------------------------------------------------


def test_horizon_one(rng):
    pi = soft_value_iteration(rng.normal(size=16), FIXTURE_TRANSITIONS)
    init = np.array([0.1, 0.2, 0.3, 0.4])
    E = expected_visitation(pi, FIXTURE_TRANSITIONS, init, 1)
    assert np.allclose(E, (init[:, None] * pi).ravel(), atol=1e-15)


@pytest.mark.parametrize("horizon", [1, 2, 7, 50])
def test_total_mass_equals_horizon(rng, horizon):
    pi = soft_value_iteration(rng.normal(size=16), random_transitions(rng))
    init = rng.dirichlet(np.ones(4))
    E = expected_visitation(pi, random_transitions(rng), init, horizon)
    assert E.sum() == pytest.approx(horizon, abs=1e-9)


def test_deterministic_cycle_closed_form():
    # every action moves s -> s+1 mod 4; uniform policy; start in state 0
    T = np.zeros((4, 4, 4))
    for a in range(4):
        for s in range(4):
            T[a, s, (s + 1) % 4] = 1.0
    pi = np.full((4, 4), 0.25)
    horizon = 10
    E = expected_visitation(pi, T, np.eye(4)[0], horizon).reshape(4, 4)
    # state s is visited at steps s, s+4, s+8, ... below the horizon
    visits = [len(range(s, horizon, 4)) for s in range(4)]
    assert np.allclose(E, np.array(visits)[:, None] * 0.25, atol=1e-9)


def test_identity_dynamics_point_mass():
    T = np.stack([np.eye(4)] * 4)
    E = expected_visitation(np.full((4, 4), 0.25), T, np.eye(4)[2], 6).reshape(4, 4)
    assert np.allclose(E[2], 1.5, atol=1e-9) and np.allclose(np.delete(E, 2, 0), 0, atol=1e-12)


def test_matches_matrix_power_oracle(rng):
    for _ in range(10):
        T = random_transitions(rng)
        pi = soft_value_iteration(rng.normal(size=16), T)
        init = rng.dirichlet(np.ones(4))
        h = int(rng.integers(1, 40))
        assert np.max(np.abs(expected_visitation(pi, T, init, h) - visitation_oracle(pi, T, init, h))) < 1e-9


def test_visitation_validates():
    pi = np.full((4, 4), 0.25)
    with pytest.raises(ValueError):
        expected_visitation(pi, uniform_transitions(), np.ones(4), 3)
    with pytest.raises(ValueError):
        expected_visitation(pi, uniform_transitions(), np.eye(4)[0], 0)


# -- feature expectations ----------------------------------------------------


def test_empirical_single_step():
    assert empirical_feature_expectations(traj([("t", "nt")])).tolist() == [1, 0, 0, 0, 0, 0]


def test_empirical_two_steps():
    assert empirical_feature_expectations(traj([("t", "tw"), ("n", "nt")])).tolist() == [0.5, 0, 0, 0.5, 0, 0]


def test_empirical_all_pairs():
    from socialirl.model import PAIRS

    t = traj([(p.state, p.action) for p in PAIRS])
    # direct summation over the 16 columns
    expect = [sum(F[r, j] for j in range(16)) / 16 for r in range(6)]
    assert np.allclose(empirical_feature_expectations(t), expect, atol=1e-15)


def test_empirical_empty():
    with pytest.raises(ValueError):
        empirical_feature_expectations(traj([]))


# -- reward estimation -------------------------------------------------------


def test_degenerate_trajectory_ranks_its_pair_highest():
    t = traj([("t", "rt")] * 10)
    prof = estimate_rewards(t, F, estimate_transitions(t))
    j = pair_index("t", "rt")
    others = np.delete(prof.rewards, j)
    assert prof.rewards[j] > others.max()


def test_eligibility_gate():
    t = traj([("t", "rt")] * 4)
    with pytest.raises(EligibilityError):
        estimate_rewards(t, F, estimate_transitions(t))
    with pytest.raises(EligibilityError):
        estimate_rewards(traj([]), F, uniform_transitions())
    # gate can be lowered explicitly
    estimate_rewards(t, F, estimate_transitions(t), min_length=4)


def test_true_init_beats_random_init(fixture_trajectories):
    T_hat = estimate_transitions(fixture_trajectories)
    cfg_r = SolverConfig(learning_rate=FIXTURE_CONFIG.learning_rate, init="random", seed=3)
    from_true = estimate_rewards(fixture_trajectories, F, T_hat, FIXTURE_CONFIG, theta0=FIXTURE_THETA)
    from_rand = estimate_rewards(fixture_trajectories, F, T_hat, cfg_r)
    assert from_true.converged and from_rand.converged
    assert from_true.extra["initial_grad_norm"] < from_rand.extra["initial_grad_norm"]
    assert from_true.iterations < from_rand.iterations


def test_converged_run_matches_expectations(fixture_trajectories):
    T_hat = estimate_transitions(fixture_trajectories)
    prof = estimate_rewards(fixture_trajectories, F, T_hat, FIXTURE_CONFIG)
    assert prof.converged
    pi = soft_policy_oracle(prof.rewards, T_hat, 0.9)
    first = np.bincount([t.steps[0][0].index for t in fixture_trajectories], minlength=4) / len(fixture_trajectories)
    model = F @ visitation_oracle(pi, T_hat, first, 50) / 50
    emp = empirical_feature_expectations(fixture_trajectories)
    assert np.max(np.abs(emp - model)) <= 1e-3


def test_determinism(fixture_trajectories):
    sub = fixture_trajectories[:20]
    a = estimate_rewards(sub, F, None, SolverConfig(init="random", seed=9))
    b = estimate_rewards(sub, F, None, SolverConfig(init="random", seed=9))
    assert a.rewards.tobytes() == b.rewards.tobytes()
    assert a.weights.tobytes() == b.weights.tobytes()
    assert (a.converged, a.grad_norm, a.iterations) == (b.converged, b.grad_norm, b.iterations)


STATE_SWAP = {"t": "p-", "p-": "t", "p+": "p+", "n": "n"}
ACTION_SWAP = {"tw": "rp", "rp": "tw", "rt": "rt", "nt": "nt"}


def test_relabeling_does_not_leak(fixture_trajectories):
    sub = fixture_trajectories[:10]
    relabeled = [
        Trajectory(t.user_id, tuple((STATE_SWAP[s.value], ACTION_SWAP[a.value]) for s, a in t.steps), t.timestamps)
        for t in sub
    ]
    p = estimate_rewards(sub, F, estimate_transitions(sub))
    q = estimate_rewards(relabeled, F, estimate_transitions(relabeled))
    for s in STATE_SWAP:
        for a in ACTION_SWAP:
            assert q.reward(STATE_SWAP[s], ACTION_SWAP[a]) == pytest.approx(p.reward(s, a), abs=1e-8)


def test_discounted_features_variant(fixture_trajectories):
    sub = fixture_trajectories[:50]
    plain = estimate_rewards(sub, F, None, FIXTURE_CONFIG)
    disc = estimate_rewards(sub, F, None, SolverConfig(learning_rate=1.0, discount_features=True))
    assert not np.allclose(plain.weights, disc.weights)
    assert np.all(np.isfinite(disc.rewards))


def test_fixed_horizon(fixture_trajectories):
    prof = estimate_rewards(fixture_trajectories[:20], F, None, SolverConfig(horizon=10, max_iterations=50))
    assert prof.iterations <= 50


# -- weight extraction -------------------------------------------------------


def test_extract_exact_span(rng):
    for _ in range(100):
        theta = rng.normal(size=6) * 3
        assert np.max(np.abs(extract_weights(F.T @ theta, F) - theta)) < 1e-9


def test_extract_zero():
    assert np.all(extract_weights(np.zeros(16), F) == 0)


def test_extract_off_span_matches_normal_equations(rng):
    for _ in range(20):
        R = rng.normal(size=16)
        assert np.max(np.abs(extract_weights(R, F) - normal_equations(F, R))) < 1e-9


# -- profile records ---------------------------------------------------------


def test_profile_round_trip(fixture_trajectories):
    prof = estimate_rewards(fixture_trajectories[:5], F, None, SolverConfig(max_iterations=20))
    text = dump_profiles([prof])
    header = text.splitlines()[0].split(",")
    assert header[:3] == ["user_id", "converged", "grad_norm"]
    assert header[-6:] == ["w_t", "w_p+", "w_p-", "w_tw", "w_rt", "w_rp"]
    (back,) = load_profiles(text.splitlines())
    assert back.rewards.tobytes() == prof.rewards.tobytes()
    assert back.weights.tobytes() == prof.weights.tobytes()
    assert back.grad_norm == prof.grad_norm and back.converged == prof.converged


def test_profile_bad_file():
    with pytest.raises(StoreError):
        load_profiles(["nope"])
