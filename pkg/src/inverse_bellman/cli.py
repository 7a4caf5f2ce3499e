"""Command-line entry point: ``inverse-bellman <command> ...``.

Exit codes: 0 success, 2 validation error, 3 non-convergence or search
failure, 4 I/O or file-format error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

import numpy as np

from .exceptions import FormatError, NonConvergenceError, SearchFailureError, ValidationError
from .experiments import (ContinuousConfig, Fig1Config, count_violations, emit_csv,
                          emit_trial_csv, load_config, plot_fig1, run_fig1)
from .gridworld import install_reward, make_empty_grid, sample_reward
from .inference import export_model_rows, infer_model, model_accuracy
from .mdp import TabularMDP, state_values, value_iteration
from .persistence import format_real, load_mdp, load_value_table_task, save_mdp, save_value_table
from .separability import separability_report

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVE, EXIT_IO = 0, 2, 3, 4


def _cmd_grid(args):
    mdp = install_reward(make_empty_grid(args.side, args.gamma),
                         sample_reward(args.side, args.seed))
    save_mdp(args.output, mdp)


def _cmd_solve(args):
    mdp = load_mdp(args.mdp)
    table, report = value_iteration(mdp, args.epsilon, max_iter=args.max_iter)
    save_value_table(args.output, table, mdp)
    print(f"iterations={report.iterations} certified_epsilon={format_real(report.certified_epsilon)}")


def _cmd_infer(args):
    table, reward, gamma = load_value_table_task(args.table)
    truth = load_mdp(args.mdp) if args.mdp else None
    # inference never reads transitions; self-loops stand in when none are given
    transition = truth.transition if truth else np.zeros(reward.shape, dtype=np.int64)
    task = TabularMDP(transition, reward, gamma)
    model = infer_model(table, task, ambiguity_margin=args.ambiguity_margin)
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["state", "action", "predicted_next", "true_next",
                         "value_distance", "ambiguous"])
        for s, a, pred, true_next, dist, amb in export_model_rows(model, truth):
            writer.writerow([s, a, pred, "" if true_next is None else true_next,
                             format_real(dist), int(amb)])
    finally:
        if args.output:
            out.close()
    if truth is not None:
        print(f"accuracy={model_accuracy(model, truth):.6f}", file=sys.stderr)


def _cmd_gap(args):
    table, _, gamma = load_value_table_task(args.table)
    report = separability_report(state_values(table), gamma)
    doc = {"delta": report.delta, "argpair": list(report.argpair),
           "threshold": report.threshold, "gamma": report.gamma}
    if args.epsilon is not None:
        doc["epsilon"] = args.epsilon
        doc["identifiable"] = report.delta > 0 and report.identifiable_at(args.epsilon)
    print(json.dumps(doc, indent=2))


def _cmd_fig1(args):
    config = load_config(Fig1Config, args.config) if args.config else Fig1Config()
    points = run_fig1(config)
    emit_csv(points, args.output)
    if args.plot:
        plot_fig1(points, args.plot)


def _cmd_continuous(args):
    config = load_config(ContinuousConfig, args.config) if args.config else ContinuousConfig()
    reports = config.run()
    emit_trial_csv(reports, args.output)
    violations = count_violations(reports)
    print(f"trials={len(reports)} violations={violations}")


def build_parser():
    parser = argparse.ArgumentParser(prog="inverse-bellman",
                                     description="Infer dynamics models from value tables.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("grid", help="write a random-reward empty gridworld MDP file")
    p.add_argument("--side", type=int, default=5)
    p.add_argument("--gamma", type=float, default=0.99)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("solve", help="MDP file -> value table file")
    p.add_argument("mdp")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--epsilon", type=float, default=1e-12)
    p.add_argument("--max-iter", type=int, default=10**7)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("infer", help="value table file -> model table (CSV)")
    p.add_argument("table")
    p.add_argument("--mdp", help="MDP file providing true transitions")
    p.add_argument("--ambiguity-margin", type=float)
    p.add_argument("-o", "--output")
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("gap", help="value table file -> separability report (JSON)")
    p.add_argument("table")
    p.add_argument("--epsilon", type=float)
    p.set_defaults(func=_cmd_gap)

    p = sub.add_parser("fig1", help="accuracy-vs-precision sweep -> CSV")
    p.add_argument("config", nargs="?")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--plot", help="optional chart path (.svg)")
    p.set_defaults(func=_cmd_fig1)

    p = sub.add_parser("continuous", help="continuous successor-error sweep -> CSV")
    p.add_argument("config", nargs="?")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_continuous)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        args.func(args)
    except (NonConvergenceError, SearchFailureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVE
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
