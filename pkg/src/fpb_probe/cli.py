"""Command-line front end.

Exit codes: 0 success, 1 bad arguments or parameters out of range, 2 a
validation or statistical check failed.

CSV output starts with ``#`` comment lines carrying metadata (and, for
simulation commands, a summary), followed by a header row and data rows.
JSON output is one object with ``meta``, optional ``summary`` and ``rows``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from typing import Optional, Sequence

from . import __version__
from . import analytics as an
from .model import PE_MAX, Probe, ProbeDomainError
from .montecarlo import (
    SimConfig,
    compare_to_analytic,
    expected_distribution,
    run_lossy,
    run_session,
)
from .validation import SMOKE_SEED, SMOKE_TRIALS, run_validation

TOOL = "fpb-probe"
EXIT_OK, EXIT_USAGE, EXIT_CHECK = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _probability(text: str) -> float:
    try:
        value = float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"not finite: {text!r}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not (0 <= value < 2**64):
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _num(x):
    """Render a number with 12 significant digits (ints pass through)."""
    if x is None:
        return None
    if isinstance(x, bool) or isinstance(x, int):
        return x
    x = float(x)
    if not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    value = float(f"{x:.12g}")
    return 0.0 if value == 0.0 else value


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def _render(fmt: str, meta: dict, columns: list, rows: list, summary: Optional[dict] = None) -> str:
    rows = [[_num(v) if not isinstance(v, str) else v for v in row] for row in rows]
    if summary is not None:
        summary = {k: (_num(v) if not isinstance(v, str) else v) for k, v in summary.items()}
    if fmt == "json":
        doc = {"meta": meta}
        if summary is not None:
            doc["summary"] = summary
        doc["rows"] = [dict(zip(columns, row)) for row in rows]
        return json.dumps(doc, indent=2) + "\n"
    lines = ["# " + " ".join(f"{k}={_cell(v)}" for k, v in meta.items())]
    if summary is not None:
        lines.append("# summary " + " ".join(f"{k}={_cell(v)}" for k, v in summary.items()))
    lines.append(",".join(columns))
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _meta(command: str, seed=None, **params) -> dict:
    meta = {"tool": TOOL, "version": __version__, "command": command}
    meta.update({k: _num(v) if isinstance(v, float) else v for k, v in params.items()})
    meta["seed"] = seed
    return meta


def cmd_curves(args) -> tuple[int, str]:
    if args.grid < 2:
        raise _UsageError(f"--grid must be >= 2, got {args.grid}")
    rows = []
    for k in range(args.grid):
        pe = PE_MAX * k / (args.grid - 1)
        rows.append([pe, an.renyi_projective(pe), an.renyi_povm(pe)])
    meta = _meta("curves", grid=args.grid)
    return EXIT_OK, _render(args.format, meta, ["pe", "renyi_projective", "renyi_povm"], rows)


def cmd_table(args) -> tuple[int, str]:
    if args.level == "bit":
        dist = an.table2(args.pe)
        columns = ["a", "b", "e", "probability"]
    else:
        dist = an.table1(args.pe)
        columns = ["alice", "bob", "eve", "probability"]
    rows = [[*map(str, key), p] for key, p in dist]
    meta = _meta("table", pe=args.pe, level=args.level)
    return EXIT_OK, _render(args.format, meta, columns, rows)


def _key_columns(level: an.Level) -> list:
    return ["alice", "bob", "eve"] if level is an.Level.STATE else ["a", "b", "e"]


def cmd_simulate(args) -> tuple[int, str]:
    probe = Probe(args.probe)
    config = SimConfig.direct(args.pe, args.trials, args.seed, probe=probe)
    level = an.Level(args.level)
    stats = run_session(config, workers=args.workers)
    expected = expected_distribution(config, level)
    report = compare_to_analytic(stats, expected)
    rows = [
        [*map(str, c.key), c.count, c.observed, c.expected, c.std_error, c.z]
        for c in report.cells
    ]
    analytic_renyi = an.renyi_from_joint(expected)
    empirical_renyi = stats.renyi() if stats.sift_count else float("nan")
    summary = {
        "sift_count": stats.sift_count,
        "error_count": stats.error_count,
        "error_rate": stats.error_rate,
        "inconclusive_count": stats.inconclusive_count,
        "renyi_empirical": empirical_renyi,
        "renyi_analytic": analytic_renyi,
        "max_abs_z": report.max_abs_z,
        "zero_violations": len(report.zero_violations),
        "familywise_alpha": report.familywise_alpha,
        "passed": report.passed,
    }
    meta = _meta(
        "simulate", seed=args.seed, pe=config.pe, probe=probe.value, trials=args.trials, level=args.level
    )
    columns = _key_columns(level) + ["count", "observed", "expected", "std_error", "z"]
    code = EXIT_OK if report.passed else EXIT_CHECK
    return code, _render(args.format, meta, columns, rows, summary)


def cmd_lossy(args) -> tuple[int, str]:
    if not (0.0 < args.eta <= 1.0):
        raise _UsageError(f"--eta must lie in (0, 1], got {args.eta}")
    run = run_lossy(args.eta, args.trials, args.seed, workers=args.workers)
    a = run.analytic
    att, base = run.attack, run.baseline

    def se(p, n):
        return math.sqrt(p * (1.0 - p) / n) if n else float("nan")

    raw_inc = att.raw_inconclusive_count / att.trials
    inc_se = se(a.inconclusive_prob, att.trials)
    base_se = se(a.eta, base.matched_count)
    diff_se = math.sqrt(
        se(run.forwarded_fraction, att.matched_count) ** 2
        + se(run.baseline_fraction, base.matched_count) ** 2
    )
    rows = [
        ["forwarded_fraction", a.forwarded_fraction, run.forwarded_fraction,
         se(a.eta, att.matched_count), run.z_forwarded_vs_eta],
        ["baseline_delivered_fraction", a.eta, run.baseline_fraction,
         base_se, (run.baseline_fraction - a.eta) / base_se if base_se else 0.0],
        ["forwarded_minus_baseline", 0.0, run.forwarded_fraction - run.baseline_fraction,
         diff_se, run.z_forwarded_vs_baseline],
        ["inconclusive_prob", a.inconclusive_prob, raw_inc,
         inc_se, (raw_inc - a.inconclusive_prob) / inc_se if inc_se else 0.0],
        ["error_given_conclusive", a.error_given_conclusive, run.conditional_error,
         se(a.error_given_conclusive, att.sift_count), run.z_conditional_error],
        ["renyi_conditional", a.renyi_conditional, run.conditional_renyi, None, None],
    ]
    summary = {
        "pe": a.pe,
        "equivalent_projective_pe": a.equivalent_projective_pe,
        "equivalent_projective_renyi": an.renyi_projective(a.equivalent_projective_pe),
        "sift_count": att.sift_count,
        "baseline_sift_count": base.sift_count,
        "max_abs_z_cells": run.comparison().max_abs_z,
        "passed": run.passed,
    }
    meta = _meta("lossy", seed=args.seed, eta=args.eta, trials=args.trials)
    columns = ["quantity", "analytic", "empirical", "std_error", "z"]
    code = EXIT_OK if run.passed else EXIT_CHECK
    return code, _render(args.format, meta, columns, rows, summary)


def cmd_validate(args) -> tuple[int, str]:
    report = run_validation(perturb_inc=args.perturb_inc, smoke_trials=args.trials, seed=args.seed)
    rows = [[c.group, c.name, c.passed, c.value, c.tolerance] for c in report.checks]
    summary = {"groups": len(report.groups), "checks": len(report.checks), "passed": report.passed}
    meta = _meta("validate", seed=args.seed, trials=args.trials, perturb_inc=args.perturb_inc)
    code = EXIT_OK if report.passed else EXIT_CHECK
    columns = ["group", "check", "passed", "value", "tolerance"]
    return code, _render(args.format, meta, columns, rows, summary)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=TOOL, description="CNOT entangling-probe attack on BB84: tables, curves, simulation.")
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("--out", default=None, help="output path (default: stdout)")

    p = sub.add_parser("curves", help="Renyi information vs pe for both probes")
    p.add_argument("--grid", type=int, default=101, help="number of pe points on [0, 1/3]")
    common(p)
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("table", help="sift-conditioned joint probability table")
    p.add_argument("--pe", type=_probability, required=True, help="attack strength, e.g. 0.2 or 1/3")
    p.add_argument("--level", choices=["state", "bit"], default="state")
    common(p)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("simulate", help="Monte Carlo session compared against the analytic table")
    p.add_argument("--pe", type=_probability, required=True)
    p.add_argument("--trials", type=_positive_int, default=1_000_000)
    p.add_argument("--seed", type=_seed, default=42)
    p.add_argument("--probe", choices=["projective", "povm"], default="povm")
    p.add_argument("--level", choices=["state", "bit"], default="state")
    p.add_argument("--workers", type=_positive_int, default=1)
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("lossy", help="selective forwarding over a pure-loss channel")
    p.add_argument("--eta", type=_probability, required=True, help="channel transmissivity in (0, 1]")
    p.add_argument("--trials", type=_positive_int, default=1_000_000)
    p.add_argument("--seed", type=_seed, default=42)
    p.add_argument("--workers", type=_positive_int, default=1)
    common(p)
    p.set_defaults(func=cmd_lossy)

    p = sub.add_parser("validate", help="run the invariant suite")
    p.add_argument("--trials", type=_positive_int, default=SMOKE_TRIALS, help="Monte Carlo smoke-test trials")
    p.add_argument("--seed", type=_seed, default=SMOKE_SEED)
    p.add_argument(
        "--perturb-inc",
        type=float,
        default=0.0,
        help="test hook: scale the inconclusive POVM effect by (1 + value)",
    )
    common(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code, text = args.func(args)
    except (_UsageError, ProbeDomainError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"{TOOL}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
