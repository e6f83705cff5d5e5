"""Command-line front end.

    equimarginal solve  (-a 0.8,0.25 | --input cups.csv) [--format json|table|csv]
    equimarginal verify (-a ... | --input ...) [--oracle all|bisection|gradient|grid]
                        [--tol T] [--resolution R] [--format json|table|csv]
    equimarginal bench  --n N --seed S [--reps R] [--format json|csv]

Exit codes: 0 success, 1 verification failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import re
import sys
from dataclasses import dataclass
from pathlib import Path

from .bench import KktFailure, run_bench
from .closed_form import solve
from .model import DomainError, ProblemInstance, SolveResult, kkt_check, marginal_utilities
from .oracles import GRID_MAX_N, Method, cross_validate

__all__ = [
    "CliConfig",
    "parse_args",
    "parse_decimal",
    "read_instance_csv",
    "emit_solution",
    "emit_verification",
    "run_solve",
    "run_verify",
    "run_bench_command",
    "main",
]

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

_DECIMAL = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")

_ORACLES = {
    "bisection": Method.LAMBDA_BISECTION,
    "gradient": Method.PROJECTED_GRADIENT,
    "grid": Method.GRID_SEARCH,
}


def parse_decimal(token: str) -> float:
    """Parse a plain decimal literal; no locale, no nan/inf, no separators."""
    text = token.strip()
    if not _DECIMAL.fullmatch(text):
        raise ValueError(f"malformed number {token!r}")
    return float(text)


def _coefficient_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(parse_decimal(tok) for tok in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return values


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed integer {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed integer {text!r}") from None


def _positive_real(text: str) -> float:
    try:
        value = parse_decimal(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return value


@dataclass(frozen=True)
class CliConfig:
    command: str
    coefficients: tuple[float, ...] | None = None
    input_path: Path | None = None
    output_format: str = "json"
    oracles: tuple[str, ...] = ("all",)
    tol: float = 1e-5
    resolution: float = 1e-3
    seed: int | None = None
    n: int | None = None
    reps: int = 5


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="equimarginal",
        description="Optimal split of a unit budget maximizing sum a_i x_i / (1 + x_i).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_input(p):
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("-a", "--coefficients", type=_coefficient_list, metavar="A1,A2,...",
                         help="comma-separated positive coefficients")
        src.add_argument("--input", type=Path, metavar="PATH",
                         help="file with one coefficient per line or one comma-separated line")

    p_solve = sub.add_parser("solve", help="solve with the closed form")
    add_input(p_solve)
    p_solve.add_argument("--format", choices=("json", "table", "csv"), default="json")

    p_verify = sub.add_parser("verify", help="cross-check the closed form against oracles")
    add_input(p_verify)
    p_verify.add_argument("--oracle", action="append", choices=("all", *_ORACLES),
                          help="oracle to run (repeatable, default all)")
    p_verify.add_argument("--tol", type=_positive_real, default=1e-5)
    p_verify.add_argument("--resolution", type=_positive_real, default=1e-3)
    p_verify.add_argument("--format", choices=("json", "table", "csv"), default="json")

    p_bench = sub.add_parser("bench", help="time the closed form on generated instances")
    p_bench.add_argument("--n", type=_positive_int, required=True)
    p_bench.add_argument("--reps", type=_positive_int, default=5)
    p_bench.add_argument("--seed", type=_int, required=True)
    p_bench.add_argument("--format", choices=("json", "csv"), default="json")
    return parser


def parse_args(argv) -> CliConfig:
    """Parse ``argv``; usage errors exit with status 2."""
    ns = _build_parser().parse_args(list(argv))
    if ns.command == "bench":
        return CliConfig(command="bench", output_format=ns.format, seed=ns.seed, n=ns.n, reps=ns.reps)
    kwargs = dict(
        command=ns.command,
        coefficients=ns.coefficients,
        input_path=ns.input,
        output_format=ns.format,
    )
    if ns.command == "verify":
        kwargs.update(oracles=tuple(ns.oracle or ("all",)), tol=ns.tol, resolution=ns.resolution)
    return CliConfig(**kwargs)


def read_instance_csv(path) -> ProblemInstance:
    """Read coefficients from a text file.

    Blank lines and lines starting with ``#`` are skipped; each remaining line
    holds one value or several comma-separated values.
    """
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            for tok in line.split(","):
                try:
                    value = parse_decimal(tok)
                except ValueError as exc:
                    raise DomainError(f"{path}:{lineno}: {exc}") from None
                if value <= 0:
                    raise DomainError(f"{path}:{lineno}: coefficient {tok.strip()} is not positive")
                values.append(value)
    if not values:
        raise DomainError(f"{path}: no coefficients found")
    return ProblemInstance(values)


def _num(v: float) -> float:
    # 12 significant digits, shortest repr afterwards
    return float(f"{v:.12g}")


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _solution_dict(p: ProblemInstance, result: SolveResult) -> dict:
    kkt = kkt_check(p, result.allocation)
    return {
        "input": [_num(v) for v in p.a.tolist()],
        "allocation": [_num(v) for v in result.allocation.x.tolist()],
        "active_count": result.active_count,
        "objective": _num(result.objective),
        "lambda": _num(result.lam),
        "kkt": {
            "max_active_deviation": _num(kkt.max_active_deviation),
            "max_inactive_violation": _num(kkt.max_inactive_violation),
            "passed": kkt.passed,
        },
    }


def _table(header, rows) -> str:
    cells = [list(header)] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells) + "\n"


def emit_solution(p: ProblemInstance, result: SolveResult, fmt: str = "json") -> str:
    """Render a solution as JSON, an aligned table, or CSV rows."""
    if fmt == "json":
        return _dumps(_solution_dict(p, result))
    g = marginal_utilities(p, result.allocation)
    rows = [
        (i + 1, f"{ai:.12g}", f"{xi:.12g}", f"{gi:.12g}")
        for i, (ai, xi, gi) in enumerate(zip(p.a.tolist(), result.allocation.x.tolist(), g.tolist()))
    ]
    header = ("index", "a", "x", "marginal")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue()
    if fmt == "table":
        kkt = kkt_check(p, result.allocation)
        return _table(header, rows) + (
            f"\nobjective     {result.objective:.12g}\n"
            f"active_count  {result.active_count}\n"
            f"lambda        {result.lam:.12g}\n"
            f"kkt           {'passed' if kkt.passed else 'FAILED'}\n"
        )
    raise ValueError(f"unknown format {fmt!r}")


def emit_verification(p: ProblemInstance, report, fmt: str = "json") -> str:
    """Render a cross-validation report."""
    names = [m.value for m in report.results]
    pairs = [
        {
            "methods": [m1.value, m2.value],
            "objective_gap": _num(gap),
            "allocation_distance": _num(report.allocation_distances[(m1, m2)]),
        }
        for (m1, m2), gap in report.objective_gaps.items()
    ]
    if fmt == "json":
        return _dumps({
            "input": [_num(v) for v in p.a.tolist()],
            "methods": {
                m.value: {
                    "allocation": [_num(v) for v in r.allocation.x.tolist()],
                    "objective": _num(r.objective),
                    "iterations": r.iterations,
                    "converged": r.converged,
                }
                for m, r in report.results.items()
            },
            "pairs": pairs,
            "skipped": [m.value for m in report.skipped],
            "tol": _num(report.tol),
            "kkt_passed": report.kkt_passed,
            "passed": report.passed,
        })
    rows = [
        (pr["methods"][0], pr["methods"][1], f"{pr['objective_gap']:.3e}", f"{pr['allocation_distance']:.3e}")
        for pr in pairs
    ]
    header = ("method_1", "method_2", "objective_gap", "allocation_distance")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue()
    if fmt == "table":
        lines = [_table(("method", "objective", "allocation"), [
            (m.value, f"{r.objective:.12g}", " ".join(f"{v:.6f}" for v in r.allocation.x.tolist()))
            for m, r in report.results.items()
        ]), _table(header, rows)]
        if report.skipped:
            lines.append(f"skipped: {', '.join(m.value for m in report.skipped)} (n > {GRID_MAX_N})\n")
        lines.append(f"verdict: {'PASS' if report.passed else 'FAIL'} (tol {report.tol:g}, methods {', '.join(names)})\n")
        return "\n".join(lines)
    raise ValueError(f"unknown format {fmt!r}")


def _load(config: CliConfig) -> ProblemInstance:
    if config.input_path is not None:
        return read_instance_csv(config.input_path)
    return ProblemInstance(config.coefficients)


def run_solve(config: CliConfig, out=None) -> int:
    out = out or sys.stdout
    p = _load(config)
    out.write(emit_solution(p, solve(p), config.output_format))
    return EXIT_OK


def run_verify(config: CliConfig, out=None) -> int:
    out = out or sys.stdout
    p = _load(config)
    if "all" in config.oracles:
        methods = None
    else:
        methods = {_ORACLES[o] for o in config.oracles}
    report = cross_validate(p, methods, tol=config.tol, resolution=config.resolution)
    out.write(emit_verification(p, report, config.output_format))
    return EXIT_OK if report.passed else EXIT_FAILED


def run_bench_command(config: CliConfig, out=None) -> int:
    out = out or sys.stdout
    try:
        report = run_bench(config.n, config.reps, config.seed)
    except KktFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    if config.output_format == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(("n", "rep", "phase", "nanoseconds"))
        w.writerows(report.rows())
    else:
        summary = report.summary()
        summary["rows"] = [dict(zip(("n", "rep", "phase", "nanoseconds"), r)) for r in report.rows()]
        out.write(_dumps(summary))
    return EXIT_OK


_COMMANDS = {"solve": run_solve, "verify": run_verify, "bench": run_bench_command}


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        config = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[config.command](config)
    except (DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
