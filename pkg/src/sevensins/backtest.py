"""Rolling-window rebalancing backtest.

At each rebalance date ``tau`` the estimates use only returns strictly
before ``tau``. The resulting position is held over period ``tau`` and earns
``x . r[tau]``; trading costs are charged when the position changes.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .analytic import solve_unconstrained_mv
from .annealing import AnnealSchedule, anneal
from .conic_solver import SolverSettings, Status, solve
from .covariance import (
    ReturnSample,
    Verdict,
    clip_eigenvalues,
    diagnose,
    estimate_per_entry_ewma,
    estimate_sample_covariance,
    shrink,
)
from .errors import InsufficientData, InvalidCovariance, ValidationError
from .models import MeanVarianceProblem, TransactionCosts, lift

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Sample:
    """Sample covariance over the estimation window."""


@dataclass(frozen=True)
class PerEntryEwma:
    halflives: np.ndarray


@dataclass(frozen=True)
class Shrink:
    kappa: float


@dataclass(frozen=True)
class Clip:
    floor: float


@dataclass(frozen=True)
class Analytic:
    """Closed-form optimum; valid only without costs or side constraints."""


@dataclass(frozen=True)
class InteriorPoint:
    settings: SolverSettings = field(default_factory=SolverSettings)


@dataclass(frozen=True)
class Annealing:
    schedule: AnnealSchedule = field(default_factory=AnnealSchedule)


class InvalidPolicy(str, enum.Enum):
    HALT = "Halt"
    REPAIR_AND_CONTINUE = "RepairAndContinue"
    SKIP_PERIOD = "SkipPeriod"


@dataclass(frozen=True)
class BacktestConfig:
    """Settings for :func:`run_backtest`.

    ``costs`` is a per-asset cost rate vector, a scalar applied to every
    asset, or None. A zero rate means no cost model. ``fallback_floor`` is
    the eigenvalue floor used when an estimate is repaired under
    ``RepairAndContinue``.
    """

    estimation_window: int = 60
    rebalance_every: int = 1
    risk_budget: float = 1e-4
    estimator: Sample | PerEntryEwma = field(default_factory=Sample)
    repair: Shrink | Clip | None = None
    costs: np.ndarray | float | None = None
    policy_on_invalid: InvalidPolicy = InvalidPolicy.REPAIR_AND_CONTINUE
    solver: Analytic | InteriorPoint | Annealing = field(default_factory=InteriorPoint)
    fallback_floor: float = 1e-8

    def __post_init__(self):
        if self.estimation_window < 2:
            raise ValidationError("estimation_window must be at least 2")
        if self.rebalance_every < 1:
            raise ValidationError("rebalance_every must be at least 1")
        if not self.risk_budget >= 0:
            raise ValidationError("risk_budget must be nonnegative")
        if isinstance(self.solver, Analytic) and self.has_costs:
            raise ValidationError("the analytic solver cannot handle transaction costs")

    @property
    def has_costs(self) -> bool:
        return self.costs is not None and bool(np.any(np.asarray(self.costs, dtype=float) != 0))

    def cost_vector(self, n: int) -> np.ndarray | None:
        if not self.has_costs:
            return None
        p = np.broadcast_to(np.asarray(self.costs, dtype=float), (n,)).copy()
        if not np.all(p > 0):
            raise ValidationError("cost rates must be positive")
        return p


@dataclass(frozen=True)
class BacktestReport:
    """Per-period records from ``periods[0]`` onward.

    ``diagnostics_log`` and ``solver_log`` carry one entry per rebalance.
    """

    periods: np.ndarray
    positions: np.ndarray
    gross_returns: np.ndarray
    costs_paid: np.ndarray
    net_returns: np.ndarray
    turnover: np.ndarray
    diagnostics_log: list[dict]
    solver_log: list[dict]

    @property
    def realized_sharpe(self) -> float:
        net = self.net_returns
        if net.shape[0] < 2:
            return float("nan")
        sd = float(np.std(net, ddof=1))
        return float(np.mean(net) / sd) if sd > 0 else float("nan")

    def to_dict(self) -> dict:
        sharpe = self.realized_sharpe
        return {
            "periods": self.periods.tolist(),
            "positions": self.positions.tolist(),
            "gross_returns": self.gross_returns.tolist(),
            "costs_paid": self.costs_paid.tolist(),
            "net_returns": self.net_returns.tolist(),
            "turnover": self.turnover.tolist(),
            "realized_sharpe": None if np.isnan(sharpe) else sharpe,
            "diagnostics_log": self.diagnostics_log,
            "solver_log": self.solver_log,
        }


@dataclass(frozen=True)
class TurnoverStats:
    total_turnover: float
    mean_turnover: float
    max_turnover: float
    total_costs: float
    cost_share_of_gross: float


def _estimate(window: np.ndarray, estimator):
    if isinstance(estimator, PerEntryEwma):
        return estimate_per_entry_ewma(window, estimator.halflives)
    return estimate_sample_covariance(window)


def _repair(Q, repair):
    if isinstance(repair, Shrink):
        return shrink(Q, repair.kappa)
    if isinstance(repair, Clip):
        return clip_eigenvalues(Q, repair.floor)
    return Q


def _decide(tau, mu, Q, x_prev, p, config) -> tuple[np.ndarray, str]:
    solver = config.solver
    if not np.any(mu):
        return np.zeros_like(mu), "ZeroMu"
    if isinstance(solver, Analytic):
        return solve_unconstrained_mv(mu, Q, config.risk_budget), Status.OPTIMAL.value
    costs = TransactionCosts(p, x_prev) if p is not None else None
    conic, lifting = lift(MeanVarianceProblem(mu, Q, config.risk_budget, costs=costs))
    if isinstance(solver, Annealing):
        seed = (solver.schedule.seed + tau) % (1 << 64)
        result = anneal(conic, solver.schedule.with_seed(seed))
        return lifting.positions(result.x), result.status.value
    result = solve(conic, solver.settings)
    if result.status is not Status.OPTIMAL:
        log.warning("period %d: solver returned %s, holding position", tau, result.status.value)
        return x_prev.copy(), result.status.value
    return lifting.positions(result.x), result.status.value


def run_backtest(returns, config: BacktestConfig | None = None) -> BacktestReport:
    """Roll the estimation window through ``returns`` and rebalance.

    The position starts flat. Estimates (rolling mean and configured
    covariance) are refreshed only at rebalance dates. A covariance estimate
    that is not positive definite after the configured repair is handled
    according to ``config.policy_on_invalid`` and always logged.

    Raises
    ------
    InsufficientData
        If there are fewer than ``estimation_window + 1`` periods.
    InvalidCovariance
        If an estimate is invalid and the policy is ``Halt``.
    """
    config = config or BacktestConfig()
    sample = returns if isinstance(returns, ReturnSample) else ReturnSample(returns)
    r = sample.values
    T, n = r.shape
    W = config.estimation_window
    if T < W + 1:
        raise InsufficientData(f"need at least {W + 1} periods, got {T}")
    p = config.cost_vector(n)

    periods = np.arange(W, T)
    k = periods.shape[0]
    positions = np.zeros((k, n))
    turnover = np.zeros(k)
    costs = np.zeros(k)
    diagnostics_log, solver_log = [], []
    x_prev = np.zeros(n)

    for row, tau in enumerate(periods):
        x = x_prev
        if (tau - W) % config.rebalance_every == 0:
            window = r[tau - W : tau]
            mu = window.mean(axis=0)
            Q = _repair(_estimate(window, config.estimator), config.repair)
            diag = diagnose(Q)
            entry = {"period": int(tau), **diag.summary(), "action": "none"}
            usable = diag.min_eigenvalue > 0
            if not usable:
                if config.policy_on_invalid is InvalidPolicy.HALT:
                    raise InvalidCovariance(f"period {tau}: covariance verdict {diag.verdict.value}", diag.verdict)
                if config.policy_on_invalid is InvalidPolicy.REPAIR_AND_CONTINUE:
                    log.warning("period %d: %s covariance repaired by eigenvalue clipping", tau, diag.verdict.value)
                    Q = clip_eigenvalues(Q, config.fallback_floor)
                    entry["action"] = "repaired"
                    usable = True
                else:
                    log.warning("period %d: %s covariance, period skipped", tau, diag.verdict.value)
                    entry["action"] = "skipped"
            elif diag.verdict is Verdict.NEAR_SINGULAR:
                log.info("period %d: near-singular covariance (condition %.3g)", tau, diag.condition_number)
            diagnostics_log.append(entry)
            if usable:
                x, status = _decide(int(tau), mu, Q, x_prev, p, config)
            else:
                status = "Skipped"
            solver_log.append({"period": int(tau), "status": status})
        trade = np.abs(x - x_prev)
        turnover[row] = trade.sum()
        costs[row] = float(p @ trade) if p is not None else 0.0
        positions[row] = x
        x_prev = x

    gross = np.einsum("ij,ij->i", positions, r[W:])
    return BacktestReport(
        periods=periods,
        positions=positions,
        gross_returns=gross,
        costs_paid=costs,
        net_returns=gross - costs,
        turnover=turnover,
        diagnostics_log=diagnostics_log,
        solver_log=solver_log,
    )


def turnover_stats(report: BacktestReport) -> TurnoverStats:
    k = report.turnover.shape[0]
    total = float(report.turnover.sum())
    total_costs = float(report.costs_paid.sum())
    gross = float(report.gross_returns.sum())
    if total_costs == 0:
        share = 0.0
    else:
        share = total_costs / abs(gross) if gross != 0 else float("inf")
    return TurnoverStats(
        total_turnover=total,
        mean_turnover=total / k if k else 0.0,
        max_turnover=float(report.turnover.max()) if k else 0.0,
        total_costs=total_costs,
        cost_share_of_gross=share,
    )


def cost_sweep(returns, config: BacktestConfig, cost_levels) -> list[dict]:
    """Run the same backtest for each scalar cost rate and tabulate turnover."""
    rows = []
    for level in cost_levels:
        run_config = BacktestConfig(**{**config.__dict__, "costs": float(level) if level else None})
        report = run_backtest(returns, run_config)
        stats = turnover_stats(report)
        sharpe = report.realized_sharpe
        rows.append(
            {
                "cost_rate": float(level),
                "total_turnover": stats.total_turnover,
                "total_costs": stats.total_costs,
                "net_return": float(report.net_returns.sum()),
                "realized_sharpe": None if np.isnan(sharpe) else sharpe,
            }
        )
    return rows
