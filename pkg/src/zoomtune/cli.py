"""Command-line front end: run studies, compare them, reproduce the
divergence-fraction table, and regenerate summaries from stored traces."""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from pathlib import Path

from .experiments import (StudyConfig, StudyReport, compare, load_study,
                          regenerate_report, run_study)
from .objective import LrMap
from .teacher_student import NetConfig

TABLE_ARCHITECTURES = ((10, 10), (20, 5), (5, 20))


def _add_tune_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--algo", default="zooming",
                        choices=("zooming", "random", "grid"))
    parser.add_argument("--gamma", type=float, default=0.1,
                        help="confidence-radius scale for zooming")
    parser.add_argument("--lr-min", type=float, default=1e-4)
    parser.add_argument("--lr-max", type=float, default=1.0)
    parser.add_argument("--lr-scale", default="linear", choices=("linear", "log"))
    parser.add_argument("--evals", type=int, default=5,
                        help="evaluation budget per run")
    parser.add_argument("--epochs", type=int, default=100,
                        help="training epochs per evaluation")
    parser.add_argument("--runs", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--objective", default="teacher_student",
                        choices=("teacher_student", "synthetic", "external"))
    parser.add_argument("--external-cmd", default=None,
                        help="worker command line for the external objective")
    parser.add_argument("--timeout", type=float, default=300.0,
                        help="per-evaluation wall-clock limit (seconds)")
    parser.add_argument("--d", type=int, default=10, help="input width")
    parser.add_argument("--k", type=int, default=10, help="hidden width")
    parser.add_argument("--n-data", type=int, default=1000, help="dataset size")
    parser.add_argument("--activation", default="relu", choices=("relu", "sigmoid"))
    parser.add_argument("--grid-arms", type=int, default=None)
    parser.add_argument("--noise-sd", type=float, default=0.0,
                        help="reward noise for the synthetic objective")
    parser.add_argument("--label", default=None)
    parser.add_argument("--workers", type=int, default=1,
                        help="parallel replications (results are identical)")
    parser.add_argument("--out-dir", default=None)


def _config_from_args(args: argparse.Namespace) -> StudyConfig:
    cmd = tuple(shlex.split(args.external_cmd)) if args.external_cmd else None
    return StudyConfig(
        algorithm=args.algo,
        radius_scale=args.gamma,
        lr_map=LrMap(args.lr_min, args.lr_max, args.lr_scale),
        budget_evals=args.evals,
        epochs_per_eval=args.epochs,
        objective=args.objective,
        net=NetConfig(args.d, args.k, args.activation, args.n_data),
        external_cmd=cmd,
        grid_arms=args.grid_arms,
        noise_sd=args.noise_sd,
        runs=args.runs,
        base_seed=args.seed,
        timeout=args.timeout,
        label=args.label,
    )


def _print_report(report: StudyReport) -> None:
    agg = report.aggregate
    bt, bf = agg["best_trace"], agg["best_found"]
    print(f"study: {agg['label']}  objective={agg['objective']}  "
          f"runs={agg['runs']}  evals/run={agg['budget_evals']}")
    print(f"  best trace : lr={bt['lr']:.6g}  auc={bt['auc']:.6g}  "
          f"(run {bt['run']}, round {bt['round']})")
    print(f"  best found : lr={bf['lr']:.6g}  final_loss={bf['final_loss']:.6g}"
          f"{'  [all diverged]' if bf['all_diverged'] else ''}")
    print(f"  samples to best: {agg['samples_to_best']}")
    print(f"  divergence fraction: {agg['divergence_fraction']:.3g}")
    if report.protocol_errors:
        print(f"  protocol errors: {report.protocol_errors}")


def cmd_tune(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    report = run_study(config, out_dir=args.out_dir, workers=args.workers)
    _print_report(report)
    if args.out_dir:
        print(f"  wrote {args.out_dir}/summary.json")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    reports = [load_study(d) for d in args.study_dirs]
    table = compare(reports)
    width = max(len(r["algorithm"]) for r in table["rows"])
    print(f"{'algorithm':<{width}}  {'lr':>12}  {'auc':>12}  {'samples':>7}  winner")
    for row in table["rows"]:
        mark = "*" if row["winner"] else ""
        print(f"{row['algorithm']:<{width}}  {row['lr']:>12.6g}  "
              f"{row['auc']:>12.6g}  {row['samples']:>7d}  {mark}")
    print(f"winner: {table['winner']}")
    if args.json:
        Path(args.json).write_text(json.dumps(table, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_teacher_student(args: argparse.Namespace) -> int:
    """Divergence-fraction grid over the three benchmark architectures."""
    variants = (("zooming(scale=1)", "zooming", 1.0),
                ("zooming(scale=0.1)", "zooming", 0.1),
                ("random", "random", 0.1))
    cells = []
    for label, algo, gamma in variants:
        for d, k in TABLE_ARCHITECTURES:
            row = {"algorithm": label, "d": d, "k": k}
            for evals in args.evals:
                config = StudyConfig(
                    algorithm=algo, radius_scale=gamma,
                    budget_evals=evals, epochs_per_eval=args.epochs,
                    objective="teacher_student",
                    net=NetConfig(d, k, args.activation, args.n_data),
                    runs=args.runs, base_seed=args.seed, label=label)
                report = run_study(config, workers=args.workers)
                row[f"evals_{evals}"] = report.aggregate["divergence_fraction"]
            cells.append(row)
    header = f"{'algorithm':<20} {'d':>4} {'k':>4}"
    for evals in args.evals:
        header += f" {f'{evals} evals':>10}"
    print(header)
    for row in cells:
        line = f"{row['algorithm']:<20} {row['d']:>4} {row['k']:>4}"
        for evals in args.evals:
            line += f" {row[f'evals_{evals}']:>10.3g}"
        print(line)
    if args.out:
        Path(args.out).write_text(json.dumps(cells, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    for out_dir in args.study_dirs:
        report = regenerate_report(out_dir)
        _print_report(report)
        print(f"  rewrote {out_dir}/summary.json")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zoomtune")
    sub = parser.add_subparsers(dest="command", required=True)

    tune = sub.add_parser("tune", help="run one study")
    _add_tune_flags(tune)
    tune.set_defaults(func=cmd_tune)

    cmp_parser = sub.add_parser("compare", help="tabulate stored studies by AUC")
    cmp_parser.add_argument("study_dirs", nargs="+")
    cmp_parser.add_argument("--json", default=None, help="also write the table here")
    cmp_parser.set_defaults(func=cmd_compare)

    ts = sub.add_parser("teacher-student",
                        help="divergence fractions across benchmark architectures")
    ts.add_argument("--evals", type=int, nargs="+", default=[5, 10])
    ts.add_argument("--epochs", type=int, default=100)
    ts.add_argument("--runs", type=int, default=50)
    ts.add_argument("--seed", type=int, default=0)
    ts.add_argument("--n-data", type=int, default=1000)
    ts.add_argument("--activation", default="relu", choices=("relu", "sigmoid"))
    ts.add_argument("--workers", type=int, default=1)
    ts.add_argument("--out", default=None, help="write cell values as JSON")
    ts.set_defaults(func=cmd_teacher_student)

    rep = sub.add_parser("report", help="regenerate summaries from stored traces")
    rep.add_argument("study_dirs", nargs="+")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
