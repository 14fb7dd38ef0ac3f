"""Event-log and label-file parsing, bot and stance thresholding.

Event log format: one JSON object per line with keys ``user_id`` (str),
``ts`` (int epoch seconds), ``kind`` (see :class:`EventKind`), ``stance``
(float in [0, 1], required iff kind is ``got_reply``) and optional ``ref_id``.

Label file format: comma-separated ``user_id,bot_score`` rows, optional
header. An empty ``bot_score`` marks the user as unlabeled.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import groupby
from typing import Iterable, Mapping, TextIO

from .errors import ConfigError, ParseError, ValidationError

log = logging.getLogger(__name__)

DEFAULT_BOT_THRESHOLD = 0.5
DEFAULT_STANCE_THRESHOLD = 0.5
DEFAULT_STRICT_HI = 0.7
DEFAULT_STRICT_LO = 0.3


class EventKind(str, Enum):
    OWN_POST = "own_post"
    OWN_RESHARE = "own_reshare"
    OWN_REPLY = "own_reply"
    GOT_RESHARED = "got_reshared"
    GOT_REPLY = "got_reply"

    @property
    def is_own(self) -> bool:
        return self in (EventKind.OWN_POST, EventKind.OWN_RESHARE, EventKind.OWN_REPLY)


class Cohort(str, Enum):
    BOT = "bot"
    HUMAN = "human"
    UNLABELED = "unlabeled"


class Stance(str, Enum):
    SUPPORT = "support"
    OPPOSE = "oppose"
    DROPPED = "dropped"


@dataclass(frozen=True)
class RawEvent:
    user_id: str
    ts: int
    kind: EventKind
    stance: float | None = None
    ref_id: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", EventKind(self.kind))
        if isinstance(self.ts, bool) or not isinstance(self.ts, int):
            raise ValidationError(f"timestamp must be an integer, got {self.ts!r}")
        if self.ts <= 0:
            raise ValidationError(f"timestamp must be positive, got {self.ts}")
        if self.kind is EventKind.GOT_REPLY:
            if self.stance is None:
                raise ValidationError("got_reply event without stance score")
            _check_unit(self.stance, "stance")
            object.__setattr__(self, "stance", float(self.stance))
        elif self.stance is not None:
            raise ValidationError(f"stance given for {self.kind.value} event")

    def to_record(self) -> dict:
        rec = {"user_id": self.user_id, "ts": self.ts, "kind": self.kind.value}
        if self.stance is not None:
            rec["stance"] = self.stance
        if self.ref_id is not None:
            rec["ref_id"] = self.ref_id
        return rec


@dataclass(frozen=True)
class UserLabel:
    user_id: str
    bot_score: float | None
    cohort: Cohort


@dataclass(frozen=True)
class StanceRule:
    """How a reply's stance score becomes support/oppose.

    ``standard`` splits at ``threshold``; ``strict`` keeps only scores above
    ``hi`` (support) or below ``lo`` (oppose) and drops the rest.
    """

    mode: str = "standard"
    hi: float = DEFAULT_STRICT_HI
    lo: float = DEFAULT_STRICT_LO
    threshold: float = DEFAULT_STANCE_THRESHOLD

    def __post_init__(self):
        if self.mode not in ("standard", "strict"):
            raise ConfigError(f"unknown stance mode {self.mode!r}")
        if self.mode == "strict" and not self.hi > self.lo:
            raise ConfigError(f"strict stance thresholds need hi > lo, got hi={self.hi} lo={self.lo}")

    @classmethod
    def strict(cls, hi: float = DEFAULT_STRICT_HI, lo: float = DEFAULT_STRICT_LO) -> "StanceRule":
        return cls("strict", hi, lo)


STANDARD = StanceRule()


@dataclass
class ParseResult:
    events: list[RawEvent]
    errors: list[ParseError] = field(default_factory=list)

    @property
    def n_malformed(self) -> int:
        return len(self.errors)


def _check_unit(x, name: str) -> None:
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not 0.0 <= x <= 1.0:
        raise ValidationError(f"{name} must be a number in [0, 1], got {x!r}")


def apply_bot_threshold(bot_score: float, threshold: float = DEFAULT_BOT_THRESHOLD) -> Cohort:
    """``bot`` iff ``bot_score > threshold``."""
    _check_unit(bot_score, "bot score")
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"bot threshold must lie in (0, 1), got {threshold}")
    return Cohort.BOT if bot_score > threshold else Cohort.HUMAN


def apply_stance_threshold(stance_score: float, rule: StanceRule = STANDARD) -> Stance:
    _check_unit(stance_score, "stance score")
    if rule.mode == "standard":
        return Stance.SUPPORT if stance_score > rule.threshold else Stance.OPPOSE
    if stance_score > rule.hi:
        return Stance.SUPPORT
    if stance_score < rule.lo:
        return Stance.OPPOSE
    return Stance.DROPPED


def parse_event_line(line: str, lineno: int | None = None) -> RawEvent:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", lineno) from None
    if not isinstance(rec, dict):
        raise ParseError("record is not an object", lineno)
    missing = [k for k in ("user_id", "ts", "kind") if k not in rec]
    if missing:
        raise ParseError(f"missing field(s) {', '.join(missing)}", lineno)
    unknown = set(rec) - {"user_id", "ts", "kind", "stance", "ref_id"}
    if unknown:
        raise ParseError(f"unknown field(s) {', '.join(sorted(unknown))}", lineno)
    try:
        kind = EventKind(rec["kind"])
    except ValueError:
        raise ParseError(f"unknown kind {rec['kind']!r}", lineno) from None
    ref = rec.get("ref_id")
    try:
        return RawEvent(
            user_id=str(rec["user_id"]),
            ts=rec["ts"],
            kind=kind,
            stance=rec.get("stance"),
            ref_id=None if ref is None else str(ref),
        )
    except ValidationError as exc:
        raise ParseError(str(exc), lineno) from None


def parse_events(lines: Iterable[str], strict: bool = False) -> ParseResult:
    """Parse an event log.

    Malformed lines are skipped and collected in ``ParseResult.errors``;
    with ``strict=True`` the first one is raised instead. Blank lines are
    ignored. Events come back sorted by ``(user_id, ts)``, ties kept in
    input order.
    """
    events: list[RawEvent] = []
    errors: list[ParseError] = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            events.append(parse_event_line(line, lineno))
        except ParseError as exc:
            if strict:
                raise
            log.warning("skipping malformed event: %s", exc)
            errors.append(exc)
    events.sort(key=lambda e: (e.user_id, e.ts))
    return ParseResult(events, errors)


def read_events(path, strict: bool = False) -> ParseResult:
    with open(path, encoding="utf-8") as fh:
        return parse_events(fh, strict=strict)


def serialize_events(events: Iterable[RawEvent]) -> str:
    return "".join(json.dumps(e.to_record(), sort_keys=True) + "\n" for e in events)


def write_events(events: Iterable[RawEvent], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_events(events))


def group_by_user(events: Iterable[RawEvent]) -> dict[str, list[RawEvent]]:
    """Split an event list into per-user streams, each sorted by timestamp (stable)."""
    ordered = sorted(events, key=lambda e: (e.user_id, e.ts))
    return {uid: list(grp) for uid, grp in groupby(ordered, key=lambda e: e.user_id)}


def filter_stance(events: Iterable[RawEvent], rule: StanceRule = STANDARD) -> tuple[list[RawEvent], int]:
    """Remove replies whose stance the rule drops. Returns (kept, n_dropped)."""
    kept, dropped = [], 0
    for e in events:
        if e.kind is EventKind.GOT_REPLY and apply_stance_threshold(e.stance, rule) is Stance.DROPPED:
            dropped += 1
            continue
        kept.append(e)
    return kept, dropped


def parse_labels(
    source: TextIO | Iterable[str], bot_threshold: float = DEFAULT_BOT_THRESHOLD
) -> dict[str, UserLabel]:
    """Read ``user_id,bot_score`` rows into labels keyed by user id."""
    labels: dict[str, UserLabel] = {}
    reader = csv.reader(source)
    for lineno, row in enumerate(reader, start=1):
        if not row or not any(c.strip() for c in row):
            continue
        if lineno == 1 and row[0].strip() == "user_id":
            continue
        if len(row) < 2:
            row = row + [""]
        uid, raw = row[0].strip(), row[1].strip()
        if not uid:
            raise ParseError("empty user_id", lineno)
        if raw == "":
            labels[uid] = UserLabel(uid, None, Cohort.UNLABELED)
            continue
        try:
            score = float(raw)
        except ValueError:
            raise ParseError(f"bad bot_score {raw!r}", lineno) from None
        if math.isnan(score):
            raise ParseError("bot_score is NaN", lineno)
        try:
            cohort = apply_bot_threshold(score, bot_threshold)
        except ValidationError as exc:
            raise ParseError(str(exc), lineno) from None
        labels[uid] = UserLabel(uid, score, cohort)
    return labels


def read_labels(path, bot_threshold: float = DEFAULT_BOT_THRESHOLD) -> dict[str, UserLabel]:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_labels(fh, bot_threshold)


def write_labels(scores: Mapping[str, float | None], path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["user_id", "bot_score"])
    for uid in sorted(scores):
        s = scores[uid]
        w.writerow([uid, "" if s is None else repr(float(s))])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
