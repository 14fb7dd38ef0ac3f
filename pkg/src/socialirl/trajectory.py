"""Turning per-user event streams into MDP trajectories."""

from __future__ import annotations

import csv
import io
from typing import Iterable, Sequence

from .errors import StoreError
from .ingestion import STANDARD, EventKind, RawEvent, Stance, StanceRule, apply_stance_threshold
from .model import Action, State, Trajectory

DEFAULT_MIN_ACTIONS = 5
DEFAULT_MIN_RESPONSES = 5

_OWN_ACTION = {
    EventKind.OWN_POST: Action.TW,
    EventKind.OWN_RESHARE: Action.RT,
    EventKind.OWN_REPLY: Action.RP,
}

STORE_HEADER = ("user_id", "step", "state", "action", "ts")


def response_state(event: RawEvent, rule: StanceRule = STANDARD) -> State | None:
    """State opened by a network-response event, or None if the rule drops it."""
    if event.kind is EventKind.GOT_RESHARED:
        return State.T
    stance = apply_stance_threshold(event.stance, rule)
    if stance is Stance.DROPPED:
        return None
    return State.P_POS if stance is Stance.SUPPORT else State.P_NEG


def build_trajectory(
    events: Sequence[RawEvent],
    rule: StanceRule = STANDARD,
    max_gap_seconds: int | None = None,
    user_id: str | None = None,
) -> Trajectory:
    """Pair network responses with the user's reactions.

    Each response opens a step. The user's next own action closes it; a
    second response arriving first closes it with ``nt``. An own action with
    no open step becomes ``(n, action)``. With ``max_gap_seconds`` set, an
    action arriving later than that after the response does not pair with it.
    Replies the stance rule drops are skipped.
    """
    if not events:
        return Trajectory(user_id or "", (), ())
    uid = events[0].user_id if user_id is None else user_id
    steps: list[tuple[State, Action]] = []
    stamps: list[int] = []
    open_state: State | None = None
    open_ts = 0
    last_ts = None

    for e in events:
        if e.user_id != uid:
            raise ValueError(f"event of user {e.user_id!r} in stream of {uid!r}")
        if last_ts is not None and e.ts < last_ts:
            raise ValueError(f"events of user {uid!r} are not sorted by timestamp")
        last_ts = e.ts
        if e.kind.is_own:
            action = _OWN_ACTION[e.kind]
            if open_state is not None and (max_gap_seconds is None or e.ts - open_ts <= max_gap_seconds):
                steps.append((open_state, action))
                stamps.append(open_ts)
            else:
                if open_state is not None:
                    steps.append((open_state, Action.NT))
                    stamps.append(open_ts)
                steps.append((State.N, action))
                stamps.append(e.ts)
            open_state = None
        else:
            state = response_state(e, rule)
            if state is None:
                continue
            if open_state is not None:
                steps.append((open_state, Action.NT))
                stamps.append(open_ts)
            open_state, open_ts = state, e.ts

    if open_state is not None:
        steps.append((open_state, Action.NT))
        stamps.append(open_ts)
    return Trajectory(uid, tuple(steps), tuple(stamps))


def build_trajectories(
    streams: dict[str, list[RawEvent]],
    rule: StanceRule = STANDARD,
    max_gap_seconds: int | None = None,
) -> list[Trajectory]:
    return [build_trajectory(streams[uid], rule, max_gap_seconds, uid) for uid in sorted(streams)]


def is_eligible(
    traj: Trajectory, min_actions: int = DEFAULT_MIN_ACTIONS, min_responses: int = DEFAULT_MIN_RESPONSES
) -> bool:
    return traj.n_actions >= min_actions and traj.n_responses >= min_responses


def filter_eligible(
    trajectories: Iterable[Trajectory],
    min_actions: int = DEFAULT_MIN_ACTIONS,
    min_responses: int = DEFAULT_MIN_RESPONSES,
) -> list[Trajectory]:
    """Keep trajectories with enough real actions and enough network responses."""
    if min_actions < 1:
        raise ValueError(f"min_actions must be >= 1, got {min_actions}")
    if min_responses < 0:
        raise ValueError(f"min_responses must be >= 0, got {min_responses}")
    return [t for t in trajectories if is_eligible(t, min_actions, min_responses)]


# -- audit dump / trajectory store -----------------------------------------


def dump_trajectories(trajectories: Iterable[Trajectory]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STORE_HEADER)
    for traj in sorted(trajectories, key=lambda t: t.user_id):
        for k, ((s, a), ts) in enumerate(zip(traj.steps, traj.timestamps)):
            w.writerow([traj.user_id, k, s.value, a.value, ts])
    return buf.getvalue()


def write_trajectories(trajectories: Iterable[Trajectory], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dump_trajectories(trajectories))


def load_trajectories(lines: Iterable[str]) -> list[Trajectory]:
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != STORE_HEADER:
        raise StoreError(f"trajectory store must start with header {','.join(STORE_HEADER)}")
    rows: dict[str, list[tuple[int, State, Action, int]]] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(STORE_HEADER):
            raise StoreError(f"line {lineno}: expected {len(STORE_HEADER)} fields, got {len(row)}")
        uid, step, s, a, ts = row
        try:
            rows.setdefault(uid, []).append((int(step), State(s), Action(a), int(ts)))
        except ValueError as exc:
            raise StoreError(f"line {lineno}: {exc}") from None
    out = []
    for uid in sorted(rows):
        recs = sorted(rows[uid], key=lambda r: r[0])
        if [r[0] for r in recs] != list(range(len(recs))):
            raise StoreError(f"user {uid!r}: step numbers are not 0..n-1")
        try:
            out.append(Trajectory(uid, tuple((r[1], r[2]) for r in recs), tuple(r[3] for r in recs)))
        except ValueError as exc:
            raise StoreError(str(exc)) from None
    return out


def read_trajectories(path) -> list[Trajectory]:
    with open(path, encoding="utf-8", newline="") as fh:
        return load_trajectories(fh)
