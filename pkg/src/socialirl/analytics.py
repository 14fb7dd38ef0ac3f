"""Cohort aggregation of reward profiles, token log-odds, report tables."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .encoding import FEATURE_MATRIX
from .ingestion import Cohort, UserLabel
from .irl import extract_weights
from .model import FEATURE_NAMES, N_FEATURES, N_PAIRS, RewardProfile, pair_from_index

log = logging.getLogger(__name__)

ALL = "all"
COHORT_ORDER = (ALL, Cohort.BOT.value, Cohort.HUMAN.value, Cohort.UNLABELED.value)


@dataclass
class CohortReport:
    cohort: str
    user_count: int
    mean_reward: np.ndarray
    reward_stderr: np.ndarray
    mean_weights: np.ndarray
    weight_stderr: np.ndarray
    # least-squares weights re-extracted from each user's rewards
    mean_extracted_weights: np.ndarray
    extracted_weight_stderr: np.ndarray
    n_converged: int = 0
    user_ids: tuple[str, ...] = field(default=(), repr=False)

    @property
    def single_user(self) -> bool:
        return self.user_count == 1

    def to_dict(self) -> dict:
        pairs = [pair_from_index(j) for j in range(N_PAIRS)]
        return {
            "cohort": self.cohort,
            "user_count": self.user_count,
            "n_converged": self.n_converged,
            "single_user": self.single_user,
            "rewards": [
                {
                    "pair": j,
                    "state": s.value,
                    "action": a.value,
                    "mean": float(self.mean_reward[j]),
                    "stderr": float(self.reward_stderr[j]),
                }
                for j, (s, a) in enumerate(pairs)
            ],
            "weights": {
                "trained": _weights_dict(self.mean_weights, self.weight_stderr),
                "extracted": _weights_dict(self.mean_extracted_weights, self.extracted_weight_stderr),
            },
        }


def _weights_dict(mean, se):
    return {name: {"mean": float(m), "stderr": float(s)} for name, m, s in zip(FEATURE_NAMES, mean, se)}


def mean_stderr(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and standard errors (sample std, n-1, over sqrt n); stderr 0 for n=1."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n == 0:
        raise ValueError("no rows")
    mean = X.mean(axis=0)
    if n == 1:
        return mean, np.zeros(X.shape[1])
    return mean, X.std(axis=0, ddof=1) / math.sqrt(n)


def _cohort_report(name: str, profiles: Sequence[RewardProfile], F: np.ndarray) -> CohortReport:
    profiles = sorted(profiles, key=lambda p: p.user_id)
    R = np.stack([p.rewards for p in profiles])
    W = np.stack([p.weights for p in profiles])
    W_hat = np.stack([extract_weights(p.rewards, F) for p in profiles])
    mr, sr = mean_stderr(R)
    mw, sw = mean_stderr(W)
    me, se = mean_stderr(W_hat)
    if len(profiles) == 1:
        log.info("cohort %s has a single user; stderr reported as 0", name)
    return CohortReport(
        cohort=name,
        user_count=len(profiles),
        mean_reward=mr,
        reward_stderr=sr,
        mean_weights=mw,
        weight_stderr=sw,
        mean_extracted_weights=me,
        extracted_weight_stderr=se,
        n_converged=sum(p.converged for p in profiles),
        user_ids=tuple(p.user_id for p in profiles),
    )


def aggregate_cohort(
    profiles: Iterable[RewardProfile],
    labels: Mapping[str, UserLabel] | Iterable[UserLabel],
    converged_only: bool = False,
    F: np.ndarray = FEATURE_MATRIX,
) -> list[CohortReport]:
    """Per-cohort mean and stderr of rewards and weights.

    Users missing from ``labels`` count as unlabeled. Cohorts come out in the
    order all, bot, human, unlabeled; empty cohorts are omitted, and ``all``
    is only emitted when at least two cohorts are non-empty (otherwise it
    would duplicate the single one).
    """
    if not isinstance(labels, Mapping):
        labels = {lab.user_id: lab for lab in labels}
    profiles = list(profiles)
    if converged_only:
        n_before = len(profiles)
        profiles = [p for p in profiles if p.converged]
        if len(profiles) < n_before:
            log.info("excluded %d non-converged profiles", n_before - len(profiles))
    groups: dict[str, list[RewardProfile]] = {c: [] for c in COHORT_ORDER[1:]}
    for p in profiles:
        lab = labels.get(p.user_id)
        groups[(lab.cohort if lab else Cohort.UNLABELED).value].append(p)

    reports = []
    non_empty = [c for c in COHORT_ORDER[1:] if groups[c]]
    if len(non_empty) >= 2:
        reports.append(_cohort_report(ALL, profiles, F))
    for c in COHORT_ORDER[1:]:
        if groups[c]:
            reports.append(_cohort_report(c, groups[c], F))
        else:
            log.info("cohort %s is empty; omitted", c)
    return reports


def log_odds_tokens(
    support: Mapping[str, int], oppose: Mapping[str, int], smoothing: float = 0.5
) -> list[tuple[str, float]]:
    """Rank tokens by smoothed log odds ratio, support-indicative first.

    ``score(w) = log((c_s + a) / (N_s - c_s + a)) - log((c_o + a) / (N_o - c_o + a))``
    where ``N`` is the total token count of a corpus. Ties sort by token.
    """
    if not smoothing > 0:
        raise ValueError(f"smoothing must be positive, got {smoothing}")
    support, oppose = Counter(support), Counter(oppose)
    n_s, n_o = sum(support.values()), sum(oppose.values())
    if n_s == 0 or n_o == 0:
        raise ValueError("both corpora must contain tokens")
    a = smoothing
    scores = []
    for w in set(support) | set(oppose):
        cs, co = support[w], oppose[w]
        score = (math.log(cs + a) - math.log(n_s - cs + a)) - (math.log(co + a) - math.log(n_o - co + a))
        scores.append((w, score))
    scores.sort(key=lambda x: (-x[1], x[0]))
    return scores


# -- report tables ------------------------------------------------------------

HEATMAP_FILE = "heatmap.csv"
WEIGHTS_FILE = "weights.csv"
SUMMARY_FILE = "mean_stderr.csv"


def _fmt(x) -> str:
    return repr(float(x))


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def heatmap_table(reports: Sequence[CohortReport]) -> str:
    rows = [("cohort", "pair", "state", "action", "mean_reward")]
    for r in reports:
        for j in range(N_PAIRS):
            s, a = pair_from_index(j)
            rows.append((r.cohort, j, s.value, a.value, _fmt(r.mean_reward[j])))
    return _csv(rows)


def weights_table(reports: Sequence[CohortReport]) -> str:
    rows = [("cohort", "source", "feature", "mean", "stderr")]
    for r in reports:
        for source, m, se in (
            ("trained", r.mean_weights, r.weight_stderr),
            ("extracted", r.mean_extracted_weights, r.extracted_weight_stderr),
        ):
            for k in range(N_FEATURES):
                rows.append((r.cohort, source, FEATURE_NAMES[k], _fmt(m[k]), _fmt(se[k])))
    return _csv(rows)


def summary_table(reports: Sequence[CohortReport]) -> str:
    rows = [("cohort", "n_users", "n_converged", "pair", "state", "action", "mean", "stderr")]
    for r in reports:
        for j in range(N_PAIRS):
            s, a = pair_from_index(j)
            rows.append(
                (r.cohort, r.user_count, r.n_converged, j, s.value, a.value,
                 _fmt(r.mean_reward[j]), _fmt(r.reward_stderr[j]))
            )
    return _csv(rows)


def emit_report(
    reports: Sequence[CohortReport], out_dir, formats: Iterable[str] = ("delimited", "structured")
) -> list[Path]:
    """Write report tables under ``out_dir``; returns the written paths.

    ``delimited`` writes heatmap.csv (cohort x 16 pairs), weights.csv
    (cohort x 6 features, trained and extracted) and mean_stderr.csv.
    ``structured`` writes one JSON document per cohort under cohorts/.
    """
    if not reports:
        raise ValueError("nothing to report")
    formats = set(formats)
    unknown = formats - {"delimited", "structured"}
    if unknown:
        raise ValueError(f"unknown report format(s): {', '.join(sorted(unknown))}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(path: Path, text: str):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        written.append(path)

    if "delimited" in formats:
        put(out / HEATMAP_FILE, heatmap_table(reports))
        put(out / WEIGHTS_FILE, weights_table(reports))
        put(out / SUMMARY_FILE, summary_table(reports))
    if "structured" in formats:
        (out / "cohorts").mkdir(exist_ok=True)
        for r in reports:
            put(out / "cohorts" / f"{r.cohort}.json", json.dumps(r.to_dict(), indent=2, sort_keys=True) + "\n")
    return written

