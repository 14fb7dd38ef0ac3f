"""Batch command line: build, estimate, simulate, report.

Exit codes: 0 success, 2 input or configuration error, 3 empty result.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import analytics, simulator
from .errors import SocialIRLError
from .ingestion import DEFAULT_BOT_THRESHOLD, StanceRule, read_labels, write_events, write_labels
from .irl import SolverConfig, write_profiles, read_profiles
from .pipeline import build, estimate_profiles
from .trajectory import filter_eligible, read_trajectories, write_trajectories

log = logging.getLogger("socialirl")

EXIT_OK, EXIT_INPUT, EXIT_EMPTY = 0, 2, 3
STORE_FILE = "trajectories.csv"
COHORT_FILE = "cohorts.csv"


class CLIError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT):
        super().__init__(message)
        self.code = code


def _store_path(path: str) -> Path:
    p = Path(path)
    return p / STORE_FILE if p.is_dir() else p


def _require(path) -> None:
    if path is not None and not Path(path).is_file():
        raise CLIError(f"no such file: {path}")


def _solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--gamma", type=float, default=0.9, help="discount factor (default 0.9)")
    g.add_argument("--learning-rate", type=float, default=0.1)
    g.add_argument("--max-iterations", type=int, default=500)
    g.add_argument("--gradient-tolerance", type=float, default=1e-3)
    g.add_argument("--vi-tolerance", type=float, default=1e-8)
    g.add_argument("--horizon", type=int, default=None, help="rollout length (default: trajectory length)")
    g.add_argument("--init", choices=("zero", "random"), default="zero")
    g.add_argument("--discount-features", action="store_true",
                   help="weight feature expectations by gamma**step")
    g.add_argument("--seed", type=int, default=0)


def _solver_config(args, min_length: int = 5) -> SolverConfig:
    try:
        return SolverConfig(
            gamma=args.gamma,
            learning_rate=args.learning_rate,
            max_iterations=args.max_iterations,
            gradient_tolerance=args.gradient_tolerance,
            value_iteration_tolerance=args.vi_tolerance,
            horizon=args.horizon,
            seed=args.seed,
            init=args.init,
            discount_features=args.discount_features,
            min_length=min_length,
        )
    except ValueError as exc:
        raise CLIError(f"bad solver configuration: {exc}") from None


def cmd_build(args) -> int:
    _require(args.events)
    _require(args.labels)
    rule = StanceRule(args.stance_mode, args.stance_hi, args.stance_lo)
    min_a = args.min_actions if args.min_actions is not None else args.min_length
    min_r = args.min_responses if args.min_responses is not None else args.min_length
    res = build(
        args.events,
        args.labels,
        rule=rule,
        bot_threshold=args.bot_threshold,
        strict_parse=args.strict_parse,
        max_gap_seconds=args.max_gap_seconds,
        min_actions=min_a,
        min_responses=min_r,
    )
    print(res.summary())
    if not res.eligible:
        raise CLIError("no eligible users", EXIT_EMPTY)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectories(res.eligible, out / STORE_FILE)
    if res.labels:
        with open(out / COHORT_FILE, "w", encoding="utf-8", newline="") as fh:
            fh.write("user_id,bot_score,cohort\n")
            for uid in sorted(res.labels):
                lab = res.labels[uid]
                score = "" if lab.bot_score is None else repr(lab.bot_score)
                fh.write(f"{uid},{score},{lab.cohort.value}\n")
    return EXIT_OK


def cmd_estimate(args) -> int:
    store = _store_path(args.store)
    _require(store)
    trajs = read_trajectories(store)
    cfg = _solver_config(args, args.min_length)
    eligible = filter_eligible(trajs, max(args.min_length, 1), args.min_length)
    print(f"users_in={len(trajs)} users_eligible={len(eligible)}")
    if not eligible:
        raise CLIError("no eligible users", EXIT_EMPTY)
    profiles = estimate_profiles(eligible, cfg, args.alpha, args.pool_transitions, args.jobs)
    if not profiles:
        raise CLIError("solver produced no profiles", EXIT_EMPTY)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_profiles(profiles, args.out)
    print(f"profiles={len(profiles)} converged={sum(p.converged for p in profiles)}")
    return EXIT_OK


def _parse_theta(text: str) -> np.ndarray:
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        raise CLIError(f"--theta must be comma-separated numbers, got {text!r}") from None
    if len(vals) != 6 or not all(np.isfinite(vals)):
        raise CLIError(f"--theta needs 6 finite values (t,p+,p-,tw,rt,rp), got {len(vals)}")
    return np.array(vals)


def cmd_simulate(args) -> int:
    theta = simulator.FIXTURE_THETA if args.theta is None else _parse_theta(args.theta)
    if args.count < 1 or args.length < 1:
        raise CLIError("--count and --length must be >= 1")
    cfg = _solver_config(args, 0)
    if not 0.0 < args.stay < 1.0:
        raise CLIError("--stay must lie in (0, 1)")
    T = simulator.fixture_transitions(args.stay)
    trajs = simulator.generate_trajectories(theta, T, cfg, args.count, args.length, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    events = []
    for i, traj in enumerate(trajs):
        events.extend(simulator.trajectory_to_events(traj, args.seed, i))
    write_events(events, out / "events.jsonl")
    report = simulator.recovery_experiment(theta, T, cfg, alpha=args.alpha, trajectories=trajs)
    with open(out / "recovery.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if args.labels_score is not None:
        write_labels({t.user_id: args.labels_score for t in trajs}, out / "labels.csv")
    hist = " ".join(f"{k}={v}" for k, v in report.action_histogram.items())
    print(
        f"spearman={report.spearman:.4f} argmax_agreement={report.argmax_agreement}/4 "
        f"converged={report.profile.converged} steps={report.n_steps} low_data={report.low_data}"
    )
    print(f"actions: {hist}")
    return EXIT_OK


def cmd_report(args) -> int:
    _require(args.profiles)
    _require(args.labels)
    profiles = read_profiles(args.profiles)
    labels = read_labels(args.labels, args.bot_threshold) if args.labels else {}
    reports = analytics.aggregate_cohort(profiles, labels, converged_only=args.converged_only)
    n_nc = sum(not p.converged for p in profiles)
    if not reports:
        raise CLIError("no profiles to report", EXIT_EMPTY)
    formats = ("delimited", "structured") if args.format == "both" else (args.format,)
    try:
        analytics.emit_report(reports, args.out, formats)
    except OSError as exc:
        raise CLIError(f"cannot write report: {exc}") from None
    for r in reports:
        print(f"cohort={r.cohort} users={r.user_count} converged={r.n_converged}")
    if n_nc:
        print(f"non_converged={n_nc}" + (" (excluded)" if args.converged_only else " (included)"))
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="socialirl", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="event log -> eligible trajectory store")
    b.add_argument("--events", required=True, help="line-delimited JSON event log")
    b.add_argument("--labels", help="user_id,bot_score file")
    b.add_argument("--out", required=True, help="output directory")
    b.add_argument("--bot-threshold", type=float, default=DEFAULT_BOT_THRESHOLD)
    b.add_argument("--stance-mode", choices=("standard", "strict"), default="standard")
    b.add_argument("--stance-hi", type=float, default=0.7)
    b.add_argument("--stance-lo", type=float, default=0.3)
    b.add_argument("--strict-parse", action="store_true", help="abort on the first malformed line")
    b.add_argument("--max-gap-seconds", type=int, default=None)
    b.add_argument("--min-length", type=int, default=5, help="default for both gates below")
    b.add_argument("--min-actions", type=int, default=None)
    b.add_argument("--min-responses", type=int, default=None)
    b.set_defaults(func=cmd_build)

    e = sub.add_parser("estimate", help="trajectory store -> per-user reward profiles")
    e.add_argument("--store", required=True, help="store file or build output directory")
    e.add_argument("--out", required=True, help="profile CSV to write")
    e.add_argument("--min-length", type=int, default=5)
    e.add_argument("--alpha", type=float, default=1.0, help="Laplace smoothing of transitions")
    e.add_argument("--pool-transitions", action="store_true")
    e.add_argument("--jobs", type=int, default=1)
    _solver_flags(e)
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("simulate", help="synthetic event log + recovery metrics")
    s.add_argument("--theta", help="6 weights t,p+,p-,tw,rt,rp (default: documented fixture)")
    s.add_argument("--count", type=int, default=200)
    s.add_argument("--length", type=int, default=50)
    s.add_argument("--stay", type=float, default=0.55, help="fixture transition steering strength")
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--labels-score", type=float, default=None,
                   help="also write labels.csv giving every user this bot score")
    s.add_argument("--out", required=True, help="output directory")
    _solver_flags(s)
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("report", help="profiles + labels -> cohort tables")
    r.add_argument("--profiles", required=True)
    r.add_argument("--labels")
    r.add_argument("--bot-threshold", type=float, default=DEFAULT_BOT_THRESHOLD)
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--converged-only", action="store_true")
    r.add_argument("--format", choices=("delimited", "structured", "both"), default="both")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (SocialIRLError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
