"""``sevensins`` command-line interface.

Commands: ``diagnose``, ``solve``, ``backtest``, ``sins`` and
``compare-solvers``. Reports go to stdout (or ``--output``) as an indented
table or as JSON carrying ``"schema": 1``; both render the same values, and
floats are printed with their shortest round-tripping representation.

Exit codes
----------
0   success
2   covariance is indefinite (``diagnose``, ``solve``, or a halted backtest)
3   covariance is near-singular (``diagnose``, or a halted backtest)
4   problem is infeasible
64  usage error
65  input data could not be parsed or is too short
70  internal error

Set ``SEVENSINS_LOG`` to a logging level name (``DEBUG``, ``INFO``...) to
see diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .analytic import min_variance_fully_invested, sharpe_ratio, solve_unconstrained_mv
from .annealing import AnnealSchedule, anneal, compare_solvers
from .backtest import (
    Analytic,
    Annealing,
    BacktestConfig,
    Clip,
    InteriorPoint,
    InvalidPolicy,
    PerEntryEwma,
    Sample,
    Shrink,
    cost_sweep,
    run_backtest,
    turnover_stats,
)
from .conic_solver import Status, solve
from .covariance import (
    DEFAULT_NEAR_SINGULAR,
    Verdict,
    clip_eigenvalues,
    diagnose,
    estimate_sample_covariance,
    shrink,
)
from .dataio import parse_vector, read_covariance, read_returns
from .errors import (
    DataFormatError,
    DimensionMismatch,
    InfeasibleStart,
    InsufficientData,
    InvalidCovariance,
    NonFinite,
    NotSymmetric,
    SevenSinsError,
)
from .models import MeanVarianceProblem, TransactionCosts, lift, objective_nonsmooth, validate
from .sins import comparison_instances, run_sins

EXIT_OK = 0
EXIT_INDEFINITE = 2
EXIT_NEAR_SINGULAR = 3
EXIT_INFEASIBLE = 4
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_INTERNAL = 70

SCHEMA_VERSION = 1
DEFAULT_SEED = 42

log = logging.getLogger("sevensins")


class UsageError(Exception):
    """Bad combination of command-line options."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- rendering


def jsonable(value):
    """Plain-Python copy of a report: arrays become lists, inf becomes "inf", nan None."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return value


def _cell(value) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return "[" + ", ".join(_cell(v) for v in value) + "]"
    return str(value)


def _table_lines(value, indent: int = 0) -> list[str]:
    pad = "  " * indent
    lines = []
    for key, item in value.items():
        if isinstance(item, dict):
            lines.append(f"{pad}{key}:")
            lines.extend(_table_lines(item, indent + 1))
        elif isinstance(item, list) and item and all(isinstance(r, dict) for r in item):
            lines.append(f"{pad}{key}:")
            lines.extend(_rows_table(item, indent + 1))
        else:
            lines.append(f"{pad}{key}: {_cell(item)}")
    return lines


def _rows_table(rows: list[dict], indent: int) -> list[str]:
    pad = "  " * indent
    if any(isinstance(v, (dict, list)) for row in rows for v in row.values()):
        lines = []
        for row in rows:
            lines.extend(_table_lines(row, indent))
            lines.append("")
        return lines
    columns = list(rows[0])
    cells = [[_cell(row.get(c)) for c in columns] for row in rows]
    widths = [max(len(c), *(len(r[i]) for r in cells)) for i, c in enumerate(columns)]
    out = [pad + "  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip()]
    out += [pad + "  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in cells]
    return out


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, allow_nan=False) + "\n"
    body = {k: v for k, v in report.items() if k != "schema"}
    return "\n".join(_table_lines(body)) + "\n"


# ---------------------------------------------------------------- inputs


def _vector_arg(text, n, name):
    if text is None:
        return None
    try:
        return parse_vector(text, n, name)
    except (DataFormatError, DimensionMismatch, NonFinite) as exc:
        raise UsageError(str(exc)) from exc


def _repair(Q, args):
    if args.repair == "shrink":
        if args.kappa is None:
            raise UsageError("--repair shrink requires --kappa")
        return shrink(Q, args.kappa)
    if args.repair == "clip":
        if args.floor is None:
            raise UsageError("--repair clip requires --floor")
        return clip_eigenvalues(Q, args.floor)
    return Q


def _load_matrix(args):
    """Covariance and sample mean (None for an explicit covariance) from the inputs."""
    if (args.input is None) == (args.covariance is None):
        raise UsageError("give exactly one of --input or --covariance")
    if args.covariance is not None:
        return read_covariance(args.covariance), None
    series = read_returns(args.input)
    return estimate_sample_covariance(series.sample), series.sample.values.mean(axis=0)


# ---------------------------------------------------------------- commands


def cmd_diagnose(args) -> tuple[dict, int]:
    Q, _ = _load_matrix(args)
    raw = diagnose(Q, args.near_singular)
    report = {"command": "diagnose", "n": Q.n, "diagnosis": raw.summary()}
    final = raw
    if args.repair != "none":
        final = diagnose(_repair(Q, args), args.near_singular)
        report["repaired"] = {"method": args.repair, **final.summary()}
    if raw.offending_eigenvector is not None:
        report["diagnosis"]["offending_eigenvector"] = raw.offending_eigenvector
    code = {
        Verdict.POSITIVE_DEFINITE: EXIT_OK,
        Verdict.INDEFINITE: EXIT_INDEFINITE,
        Verdict.NEAR_SINGULAR: EXIT_NEAR_SINGULAR,
    }[final.verdict]
    return report, code


def _solution_report(problem, x, status):
    Q = problem.Q.entries
    variance = float(x @ Q @ x)
    out = {
        "status": status,
        "x": x,
        "expected_return": float(problem.mu @ x),
        "variance": variance,
        "risk_budget": problem.risk_budget,
        "risk_budget_binds": bool(abs(variance - problem.risk_budget) <= 1e-6 * max(problem.risk_budget, 1e-300)),
    }
    if problem.costs is not None:
        out["net_objective"] = objective_nonsmooth(problem, x)
        out["turnover"] = float(np.abs(x - problem.costs.x0).sum())
    try:
        out["sharpe"] = sharpe_ratio(x, problem.mu, Q)
    except SevenSinsError:
        out["sharpe"] = None
    return out


def cmd_solve(args) -> tuple[dict, int]:
    Q, sample_mu = _load_matrix(args)
    Q = _repair(Q, args)
    if args.mu is None and sample_mu is None:
        raise UsageError("--mu is required with --covariance")
    mu = _vector_arg(args.mu, Q.n, "mu") if args.mu is not None else sample_mu
    if args.risk_budget is None:
        raise UsageError("--risk-budget is required")
    costs = None
    if args.costs is not None:
        p = _vector_arg(args.costs, Q.n, "costs")
        x0 = _vector_arg(args.x0, Q.n, "x0") if args.x0 is not None else np.zeros(Q.n)
        costs = TransactionCosts(p, x0) if np.any(p) else None
    elif args.x0 is not None:
        raise UsageError("--x0 only makes sense with --costs")
    problem = MeanVarianceProblem(
        mu, Q, args.risk_budget, fully_invested=args.fully_invested, long_only=args.long_only, costs=costs
    )
    findings = validate(problem)
    report = {
        "command": "solve",
        "solver": args.solver,
        "findings": [{"kind": f.kind.value, "message": f.message, "value": f.value} for f in findings],
    }
    diag = diagnose(Q)
    if diag.verdict is Verdict.INDEFINITE:
        report["diagnosis"] = diag.summary()
        return report, EXIT_INDEFINITE

    if args.solver == "analytic":
        if costs is not None or args.fully_invested or args.long_only:
            raise UsageError("--solver analytic handles only the plain risk-budget problem")
        x = solve_unconstrained_mv(mu, Q, args.risk_budget)
        report["solution"] = _solution_report(problem, x, Status.OPTIMAL.value)
        return report, EXIT_OK

    conic, lifting = lift(problem)
    if args.solver == "anneal":
        try:
            result = anneal(conic, AnnealSchedule(seed=args.seed))
        except InfeasibleStart:
            result = None
    else:
        result = solve(conic)
    if result is None or result.status is Status.INFEASIBLE:
        infeasible = {"status": Status.INFEASIBLE.value}
        if args.fully_invested:
            _, sigma2_min = min_variance_fully_invested(Q)
            infeasible["minimum_variance"] = sigma2_min
            infeasible["message"] = (
                f"risk budget {args.risk_budget!r} is below the minimum fully invested variance {sigma2_min!r}"
            )
        report["solution"] = infeasible
        return report, EXIT_INFEASIBLE
    x = lifting.positions(result.x)
    report["solution"] = _solution_report(problem, x, result.status.value)
    report["solution"]["newton_steps"] = result.newton_steps_total
    if result.status not in (Status.OPTIMAL, Status.HEURISTIC):
        return report, EXIT_INTERNAL
    return report, EXIT_OK


def _backtest_config(args, n) -> BacktestConfig:
    if args.estimator == "ewma":
        if args.halflife is None:
            raise UsageError("--estimator ewma requires --halflife")
        estimator = PerEntryEwma(np.asarray(args.halflife, dtype=float))
    else:
        estimator = Sample()
    repair = None
    if args.repair == "shrink":
        if args.kappa is None:
            raise UsageError("--repair shrink requires --kappa")
        repair = Shrink(args.kappa)
    elif args.repair == "clip":
        if args.floor is None:
            raise UsageError("--repair clip requires --floor")
        repair = Clip(args.floor)
    solver = {
        "analytic": Analytic(),
        "ip": InteriorPoint(),
        "anneal": Annealing(AnnealSchedule(seed=args.seed)),
    }[args.solver]
    costs = _vector_arg(args.costs, n, "costs") if args.costs is not None else None
    policy = {
        "halt": InvalidPolicy.HALT,
        "repair": InvalidPolicy.REPAIR_AND_CONTINUE,
        "skip": InvalidPolicy.SKIP_PERIOD,
    }[args.policy]
    return BacktestConfig(
        estimation_window=args.window,
        rebalance_every=args.rebalance_every,
        risk_budget=1e-4 if args.risk_budget is None else args.risk_budget,
        estimator=estimator,
        repair=repair,
        costs=costs,
        policy_on_invalid=policy,
        solver=solver,
    )


def cmd_backtest(args) -> tuple[dict, int]:
    if args.input is None:
        raise UsageError("backtest requires --input")
    series = read_returns(args.input)
    config = _backtest_config(args, series.sample.assets)
    try:
        report = run_backtest(series.sample, config)
    except InvalidCovariance as exc:
        code = EXIT_INDEFINITE if exc.verdict is Verdict.INDEFINITE else EXIT_NEAR_SINGULAR
        return {"command": "backtest", "halted": str(exc)}, code
    stats = turnover_stats(report)
    out = {
        "command": "backtest",
        "assets": series.assets,
        "summary": {
            "periods": int(report.periods.shape[0]),
            "first_date": series.dates[int(report.periods[0])],
            "total_gross_return": float(report.gross_returns.sum()),
            "total_costs": stats.total_costs,
            "total_net_return": float(report.net_returns.sum()),
            "realized_sharpe": report.realized_sharpe,
            "repaired_periods": sum(e["action"] == "repaired" for e in report.diagnostics_log),
            "skipped_periods": sum(e["action"] == "skipped" for e in report.diagnostics_log),
        },
        "turnover": {
            "total": stats.total_turnover,
            "mean": stats.mean_turnover,
            "max": stats.max_turnover,
            "cost_share_of_gross": stats.cost_share_of_gross,
        },
    }
    if args.cost_sweep is not None:
        levels = _vector_arg(args.cost_sweep, None, "cost-sweep")
        out["cost_sweep"] = cost_sweep(series.sample, config, levels)
    if args.format == "json":
        out["report"] = report.to_dict()
    return out, EXIT_OK


def cmd_sins(args) -> tuple[dict, int]:
    return {"command": "sins", **run_sins(args.seed)}, EXIT_OK


def cmd_compare_solvers(args) -> tuple[dict, int]:
    instances = comparison_instances(args.instances, args.assets)
    seeds = tuple(args.seed + k for k in range(args.seeds))
    result = compare_solvers(instances, AnnealSchedule(seed=args.seed), seeds=seeds)
    return {
        "command": "compare-solvers",
        "seeds": list(seeds),
        "comparison": {
            "instances": result.instances,
            "annealing_mean_gap": result.annealing_mean_gap,
            "annealing_gap_stddev_across_seeds": result.annealing_gap_stddev_across_seeds,
            "ip_deterministic": result.ip_deterministic,
            "wall_time_ratio": result.wall_time_ratio,
            "ip_newton_steps": result.ip_newton_steps,
            "annealing_evaluations": result.annealing_evaluations,
        },
    }, EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("table", "json"), default="table")
    common.add_argument("--output", help="write the report here instead of stdout")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed for annealing (default 42)")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--input", help="returns CSV: header date,<asset>,... then one row per period")
    data.add_argument("--covariance", help="headerless n x n covariance CSV")

    repair = argparse.ArgumentParser(add_help=False)
    repair.add_argument("--repair", choices=("none", "shrink", "clip"), default="none")
    repair.add_argument("--kappa", type=float, help="shrinkage weight on the estimate, in [0, 1]")
    repair.add_argument("--floor", type=float, help="eigenvalue floor for clipping")

    parser = _Parser(prog="sevensins", description="Mean-variance diagnostics, solvers and demonstrations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("diagnose", parents=[common, data, repair], help="classify a covariance estimate")
    p.add_argument("--near-singular", type=float, default=DEFAULT_NEAR_SINGULAR, help="condition-number threshold")
    p.set_defaults(run=cmd_diagnose)

    p = sub.add_parser("solve", parents=[common, data, repair], help="solve one mean-variance problem")
    p.add_argument("--mu", help="comma-separated expected returns (defaults to the sample mean of --input)")
    p.add_argument("--risk-budget", type=float, help="variance budget")
    p.add_argument("--fully-invested", action="store_true")
    p.add_argument("--long-only", action="store_true")
    p.add_argument("--costs", help="per-asset cost rates, or one rate for all")
    p.add_argument("--x0", help="current position (default flat)")
    p.add_argument("--solver", choices=("analytic", "ip", "anneal"), default="ip")
    p.set_defaults(run=cmd_solve)

    p = sub.add_parser("backtest", parents=[common, data, repair], help="rolling-window backtest")
    p.add_argument("--window", type=int, default=60, help="estimation window in periods")
    p.add_argument("--rebalance-every", type=int, default=1)
    p.add_argument("--risk-budget", type=float, help="variance budget (default 1e-4)")
    p.add_argument("--estimator", choices=("sample", "ewma"), default="sample")
    p.add_argument("--halflife", type=float, help="EWMA halflife in periods")
    p.add_argument("--costs", help="per-asset cost rates, or one rate for all")
    p.add_argument("--cost-sweep", help="comma-separated cost rates to compare")
    p.add_argument("--policy", choices=("halt", "repair", "skip"), default="repair", help="handling of invalid estimates")
    p.add_argument("--solver", choices=("analytic", "ip", "anneal"), default="ip")
    p.set_defaults(run=cmd_backtest)

    p = sub.add_parser("sins", parents=[common], help="run all seven demonstrations")
    p.set_defaults(run=cmd_sins)

    p = sub.add_parser("compare-solvers", parents=[common], help="interior point versus annealing")
    p.add_argument("--instances", type=int, default=5)
    p.add_argument("--assets", type=int, default=5)
    p.add_argument("--seeds", type=int, default=5, help="number of annealing seeds, starting at --seed")
    p.set_defaults(run=cmd_compare_solvers)
    return parser


def _configure_logging():
    name = os.environ.get("SEVENSINS_LOG", "WARNING").upper()
    level = logging.getLevelName(name)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def _execute(parser, args) -> tuple[dict | None, int]:
    try:
        return args.run(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (DataFormatError, InsufficientData, NonFinite, NotSymmetric, DimensionMismatch) as exc:
        print(f"sevensins: data error: {exc}", file=sys.stderr)
        return None, EXIT_DATA
    except OSError as exc:
        print(f"sevensins: {exc}", file=sys.stderr)
        return None, EXIT_DATA
    except SevenSinsError as exc:
        if isinstance(exc, ValueError):
            print(f"sevensins: invalid parameter: {exc}", file=sys.stderr)
            return None, EXIT_USAGE
        log.exception("internal failure")
        return None, EXIT_INTERNAL
    except Exception:
        log.exception("internal failure")
        return None, EXIT_INTERNAL


def main(argv: list[str] | None = None) -> int:
    """Run one command and return its exit code (argparse exits become return values)."""
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.seed < 0:
            parser.error("--seed must be nonnegative")
        report, code = _execute(parser, args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if report is None:
        return code
    text = render({"schema": SCHEMA_VERSION, **jsonable(report)}, args.format)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
