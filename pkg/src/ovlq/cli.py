"""Command-line front end: ``ovlq {stat,test,null-table,power,convergence}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from typing import Sequence

import numpy as np

from ovlq import distributions as dist
from ovlq import experiments as exp
from ovlq import nulldist, testing
from ovlq.statistics import dq_statistic

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with status 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2**64)")
    return v


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _alpha(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("alpha must lie in (0, 1)")
    return v


def _distribution(text: str) -> dist.DistributionSpec:
    try:
        return dist.parse_distribution(text)
    except dist.ParameterError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def read_sample_file(path: str) -> np.ndarray:
    """One decimal per line; blank lines and ``#`` comments are skipped."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise DataError(f"cannot read sample file {path!r}: {exc.strerror}") from None
    values = []
    for lineno, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        try:
            v = float(text)
        except ValueError:
            raise DataError(f"{path}:{lineno}: not a number: {text!r}") from None
        if not np.isfinite(v):
            raise DataError(f"{path}:{lineno}: value must be finite")
        values.append(v)
    if not values:
        raise DataError(f"{path}: no sample values")
    return np.array(values)


def fmt(x: float) -> str:
    return f"{x:.17g}"


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _records_csv(records: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(records[0]), lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow({k: fmt(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def _require_seed(args) -> int:
    if args.seed is None:
        raise UsageError(f"{args.command} needs --seed")
    return args.seed


def _load_sample(args) -> dist.EmpiricalSample:
    if args.sample:
        if args.dist is not None:
            raise UsageError("give either --sample or --dist, not both")
        return dist.EmpiricalSample(read_sample_file(args.sample))
    if args.dist is None or args.n is None:
        raise UsageError("need --sample PATH, or --dist NAME with --n and --seed")
    return dist.sample(args.dist, args.n, _require_seed(args))


def cmd_stat(args) -> int:
    s = _load_sample(args)
    value = dq_statistic(s, args.ref, args.q)
    if args.format == "json":
        _emit(args, json.dumps({"q": args.q, "n": s.n, "statistic": value}) + "\n")
    else:
        _emit(args, fmt(value) + "\n")
    return EXIT_OK


def _table_for(args, q: int, n: int) -> nulldist.NullTable:
    path = args.table
    if path and os.path.exists(path):
        try:
            table = nulldist.load_table(path)
        except (OSError, nulldist.TableFormatError) as exc:
            raise DataError(f"cannot load table {path!r}: {exc}") from None
        if (table.q, table.n) == (q, n):
            return table
        if not args.rebuild:
            raise DataError(
                f"table {path!r} has q={table.q}, n={table.n} but the test needs "
                f"q={q}, n={n}; pass --rebuild to regenerate it"
            )
    table = nulldist.build_null_table(q, n, args.reps, _require_seed(args), threads=args.threads)
    if path:
        nulldist.save_table(table, path)
    return table


def cmd_test(args) -> int:
    s = _load_sample(args)
    q = 1 if args.test == "ks" else args.q
    if args.test == "cvm":
        if args.method == testing.ASYMPTOTIC:
            raise UsageError("the Cramer-von Mises test only has Monte-Carlo p-values")
        if args.table:
            raise UsageError("--table holds D_q tables; CvM tables are built in memory")
        table = nulldist.build_cvm_table(s.n, args.reps, _require_seed(args), threads=args.threads)
        report = testing.cvm_test(s, args.ref, args.alpha, table)
    else:
        if args.method == testing.ASYMPTOTIC and q > 2:
            raise UsageError(f"asymptotic p-values are unavailable for q={q}")
        table = _table_for(args, q, s.n) if args.method == testing.MONTE_CARLO else None
        name = "KS" if args.test == "ks" else None
        report = testing.ovlq_test(s, args.ref, q, args.alpha, args.method, table, test_name=name)
    if args.format == "csv":
        _emit(args, _records_csv([report.to_dict()]))
    else:
        _emit(args, report.to_json() + "\n")
    return EXIT_OK


def cmd_null_table(args) -> int:
    if not args.out:
        raise UsageError("null-table needs --out PATH")
    table = nulldist.build_null_table(args.q, args.n, args.reps, _require_seed(args), threads=args.threads)
    nulldist.save_table(table, args.out)
    print(f"wrote {table.table_id} ({table.reps} values) to {args.out}", file=sys.stderr)
    return EXIT_OK


def _parse_pair(text: str) -> tuple[str, str]:
    try:
        sampling, ref = text.split(":")
        return dist.parse_distribution(sampling).name, dist.parse_distribution(ref).name
    except (ValueError, dist.ParameterError) as exc:
        raise UsageError(f"bad --pair {text!r}: {exc}") from None


def cmd_power(args) -> int:
    seed = _require_seed(args)
    kw = dict(
        seed=seed,
        alpha=args.alpha,
        threads=args.threads,
        tests=tuple(args.tests),
    )
    if args.pair:
        kw["pairs"] = tuple(_parse_pair(p) for p in args.pair)
    elif args.pairs != "default":
        raise UsageError("--pairs accepts only 'default'; use --pair S:R for custom pairs")
    config = exp.PowerConfig.full_scale(**kw) if args.full else exp.PowerConfig(**kw)
    if args.trials is not None:
        config.trials = args.trials
    if args.n:
        config.n_grid = tuple(args.n)
    if args.null_reps is not None:
        config.null_reps = args.null_reps
    try:
        grid = exp.run_power_study(config)
    except ValueError as exc:  # includes TooFewTrialsError, unknown test names
        raise UsageError(str(exc)) from None
    if args.format == "json":
        _emit(args, json.dumps(grid.to_records(), indent=1) + "\n")
    else:
        _emit(args, grid.to_csv())
    return EXIT_OK


def cmd_convergence(args) -> int:
    config = exp.ConvergenceConfig(
        seed=_require_seed(args),
        reps=args.reps,
        points=args.points,
        threads=args.threads,
    )
    if args.n:
        config.n_grid = tuple(args.n)
    grid = exp.run_convergence_study(config)
    if args.format == "json":
        _emit(args, json.dumps(grid.to_records()) + "\n")
    else:
        _emit(args, grid.to_csv())
    for n, d in grid.sup_deviation().items():
        print(f"n={n} sup|empirical-asymptotic|={d:.4f}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, help="master seed (unsigned 64-bit)")
    common.add_argument("--threads", type=_positive, default=1)
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--out", help="output path (stdout if omitted)")
    common.add_argument("-v", "--verbose", action="store_true")

    sampled = argparse.ArgumentParser(add_help=False)
    sampled.add_argument("--ref", type=_distribution, required=True, help="reference distribution")
    sampled.add_argument("--sample", help="sample file, one value per line")
    sampled.add_argument("--dist", type=_distribution, help="generate the sample from this distribution")
    sampled.add_argument("--n", type=_positive, help="generated sample size")
    sampled.add_argument("--q", type=_positive, default=2)

    p = _Parser(prog="ovlq", description="One-sample OVL-q goodness-of-fit tests.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("stat", parents=[common, sampled], help="print D_q(F_n, F)")
    s.set_defaults(func=cmd_stat)

    t = sub.add_parser("test", parents=[common, sampled], help="run a test and print a report")
    t.add_argument("--test", choices=("ovl", "ks", "cvm"), default="ovl")
    t.add_argument("--alpha", type=_alpha, default=0.05)
    t.add_argument("--method", choices=(testing.MONTE_CARLO, testing.ASYMPTOTIC), default=testing.MONTE_CARLO)
    t.add_argument("--table", help="null-table file; built and saved if missing")
    t.add_argument("--reps", type=_positive, default=100_000, help="replicates for tables built here")
    t.add_argument("--rebuild", action="store_true", help="regenerate a mismatched --table")
    t.set_defaults(func=cmd_test)

    nt = sub.add_parser("null-table", parents=[common], help="build and save a null table")
    nt.add_argument("--q", type=_positive, default=2)
    nt.add_argument("--n", type=_positive, required=True)
    nt.add_argument("--reps", type=_positive, default=100_000)
    nt.set_defaults(func=cmd_null_table)

    pw = sub.add_parser("power", parents=[common], help="power study (CSV)")
    pw.add_argument("--trials", type=_positive)
    pw.add_argument("--pairs", default="default")
    pw.add_argument("--pair", action="append", metavar="SAMPLING:REF")
    pw.add_argument("--n", type=_positive, nargs="+", help="sample sizes")
    pw.add_argument("--tests", nargs="+", default=list(exp.DEFAULT_TESTS))
    pw.add_argument("--alpha", type=_alpha, default=0.05)
    pw.add_argument("--null-reps", type=_positive)
    pw.add_argument("--full", action="store_true", help="full scale: 100,000 trials, n up to 4096")
    pw.set_defaults(func=cmd_power)

    cv = sub.add_parser("convergence", parents=[common], help="null convergence study (CSV)")
    cv.add_argument("--n", type=_positive, nargs="+")
    cv.add_argument("--reps", type=_positive, default=20_000)
    cv.add_argument("--points", type=_positive, default=1000)
    cv.set_defaults(func=cmd_convergence)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(message)s",
        stream=sys.stderr,
    )
    if args.format is None:
        args.format = "json" if args.command == "test" else "csv"
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ovlq {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, testing.TableMismatchError, dist.EmptySampleError) as exc:
        print(f"ovlq {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
