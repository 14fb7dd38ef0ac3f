import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from socialirl.errors import StoreError
from socialirl.ingestion import EventKind, RawEvent, StanceRule
from socialirl.model import Trajectory
from socialirl.trajectory import (
    build_trajectory,
    dump_trajectories,
    filter_eligible,
    load_trajectories,
)


def ev(kind, ts, stance=None, uid="u"):
    return RawEvent(uid, ts, EventKind(kind), stance)


def tags(traj):
    return [(s.value, a.value) for s, a in traj.steps]


def test_worked_example():
    events = [ev("own_post", 1), ev("got_reply", 2, 0.9), ev("got_reply", 3, 0.1), ev("own_reply", 4)]
    assert tags(build_trajectory(events)) == [("n", "tw"), ("p+", "nt"), ("p-", "rp")]


def test_series_of_posts():
    assert tags(build_trajectory([ev("own_post", 1), ev("own_post", 2)])) == [("n", "tw"), ("n", "tw")]


def test_repeated_reshares():
    traj = build_trajectory([ev("got_reshared", 1), ev("got_reshared", 2)])
    assert tags(traj) == [("t", "nt"), ("t", "nt")]


def test_empty_stream():
    traj = build_trajectory([], user_id="x")
    assert len(traj) == 0 and traj.user_id == "x"


def test_step_timestamps_are_opening_times():
    traj = build_trajectory([ev("got_reshared", 10), ev("own_reshare", 50), ev("own_post", 60)])
    assert tags(traj) == [("t", "rt"), ("n", "tw")]
    assert traj.timestamps == (10, 60)


def test_max_gap_splits_late_reactions():
    events = [ev("got_reshared", 10), ev("own_post", 1000)]
    assert tags(build_trajectory(events)) == [("t", "tw")]
    assert tags(build_trajectory(events, max_gap_seconds=100)) == [("t", "nt"), ("n", "tw")]


def test_strict_rule_skips_ambiguous_replies():
    events = [ev("got_reply", 1, 0.5), ev("own_reply", 2)]
    assert tags(build_trajectory(events, StanceRule.strict())) == [("n", "rp")]


def test_rejects_unsorted_or_mixed_users():
    with pytest.raises(ValueError):
        build_trajectory([ev("own_post", 5), ev("own_post", 1)])
    with pytest.raises(ValueError):
        build_trajectory([ev("own_post", 1), ev("own_post", 2, uid="v")])


kinds = st.sampled_from(list(EventKind))


@st.composite
def event_streams(draw, max_size=40):
    n = draw(st.integers(0, max_size))
    gaps = draw(st.lists(st.integers(0, 100), min_size=n, max_size=n))
    out, ts = [], 1
    for g in gaps:
        ts += g
        k = draw(kinds)
        out.append(ev(k, ts, draw(st.floats(0, 1)) if k is EventKind.GOT_REPLY else None))
    return out


@given(event_streams())
@settings(max_examples=200)
def test_conservation(events):
    traj = build_trajectory(events)
    n_own = sum(e.kind.is_own for e in events)
    assert traj.n_actions == n_own
    assert traj.n_responses == len(events) - n_own
    ts = traj.timestamps
    assert all(a <= b for a, b in zip(ts, ts[1:]))
    assert build_trajectory(events) == traj


def full(n_act, n_resp):
    steps = [("t", "tw")] * min(n_act, n_resp) + [("n", "rt")] * max(0, n_act - n_resp)
    steps += [("p-", "nt")] * max(0, n_resp - n_act)
    return Trajectory("u", tuple(steps), tuple(range(len(steps))))


def test_filter_examples():
    assert filter_eligible([full(5, 5)]) == [full(5, 5)]
    assert filter_eligible([full(4, 9)]) == []
    assert filter_eligible([full(9, 4)]) == []
    one = Trajectory("u", (("t", "tw"),), (1,))
    assert filter_eligible([one], min_actions=1, min_responses=1) == [one]


def test_filter_validates_arguments():
    with pytest.raises(ValueError):
        filter_eligible([], min_actions=0)
    with pytest.raises(ValueError):
        filter_eligible([], min_responses=-1)


def test_store_round_trip():
    trajs = [
        Trajectory("b", (("t", "tw"), ("n", "nt")), (3, 4)),
        Trajectory("a", (("p+", "rp"),), (7,)),
    ]
    text = dump_trajectories(trajs)
    assert text.splitlines()[0] == "user_id,step,state,action,ts"
    back = load_trajectories(text.splitlines())
    assert back == sorted(trajs, key=lambda t: t.user_id)


@pytest.mark.parametrize(
    "text",
    [
        "",
        "wrong,header\n",
        "user_id,step,state,action,ts\na,0,x,tw,1\n",
        "user_id,step,state,action,ts\na,0,t,tw\n",
        "user_id,step,state,action,ts\na,1,t,tw,1\n",
        "user_id,step,state,action,ts\na,0,t,tw,5\na,1,t,tw,1\n",
    ],
)
def test_corrupt_store(text):
    with pytest.raises(StoreError):
        load_trajectories(text.splitlines())
