"""Seven reproducible demonstrations, each pairing a flawed procedure with a sound one.

Everything here runs on bundled fixtures with fixed seeds, so two runs with
the same ``seed`` produce identical reports. Wall-clock timings are left out
for that reason; solver effort is reported as Newton-step and proposal
counts instead.
"""

from __future__ import annotations

import numpy as np

from .analytic import (
    min_variance_fully_invested,
    principal_decomposition,
    sharpe_ratio,
    sinful_intermediate_step,
    solve_sharpe_max,
    solve_unconstrained_mv,
)
from .annealing import AnnealSchedule, compare_solvers
from .backtest import BacktestConfig, run_backtest, turnover_stats
from .conic_solver import Status, solve
from .covariance import (
    clip_eigenvalues,
    demonstrate_exploit,
    diagnose,
    estimate_per_entry_ewma,
    estimate_sample_covariance,
    shrink,
)
from .fixtures import (
    FIG1_Q,
    INDEFINITE_Q,
    ewma_trap_halflives,
    ewma_trap_returns,
    ill_conditioned_q,
    load_synthetic_returns,
)
from .linalg import eigh
from .models import MeanVarianceProblem, TransactionCosts, lift, objective_nonsmooth
from .oracles import grid_search, kink_enumeration

SECTION_TITLES = (
    "Per-entry EWMA covariance is not a covariance",
    "Ill-conditioned covariance drives the optimum",
    "Normalising the return vector instead of solving",
    "Maximising the Sharpe ratio directly",
    "Heuristic search versus an interior-point method",
    "Nonsmooth transaction costs",
    "Risk budget below the minimum variance",
)


def _floats(a) -> list[float]:
    return [float(v) for v in np.asarray(a).ravel()]


def _status_at(Q, mu, sigma2) -> Status:
    conic, _ = lift(MeanVarianceProblem(mu, Q, sigma2, fully_invested=True))
    return solve(conic).status


def section_ewma() -> dict:
    returns = ewma_trap_returns(seed=0)
    mixed = estimate_per_entry_ewma(returns, ewma_trap_halflives())
    mixed_diag = diagnose(mixed)
    mu = returns.mean(axis=0)
    exploits = [demonstrate_exploit(mixed, mu, 1e-4, tau) for tau in (1.0, 10.0, 100.0)]
    toy = [demonstrate_exploit(INDEFINITE_Q, [1.0, 0.0], 1.0, tau) for tau in (1.0, 10.0, 100.0)]
    sample = estimate_sample_covariance(returns)
    uniform = estimate_per_entry_ewma(returns, 5.0)
    repaired = clip_eigenvalues(mixed, 1e-8)
    return {
        "title": SECTION_TITLES[0],
        "sinful": {
            "procedure": "per-entry EWMA with variance halflife 5 and covariance halflife 500",
            "verdict": mixed_diag.verdict.value,
            "min_eigenvalue": mixed_diag.min_eigenvalue,
            "exploit_tau": [e.scale for e in exploits],
            "exploit_claimed_variance": [e.claimed_variance for e in exploits],
            "exploit_expected_return": [e.expected_return for e in exploits],
            "toy_matrix_claimed_variance": [e.claimed_variance for e in toy],
            "toy_matrix_expected_return": [e.expected_return for e in toy],
        },
        "correct": {
            "procedure": "one estimator for every entry, or clip the spectrum before use",
            "sample_verdict": diagnose(sample).verdict.value,
            "sample_min_eigenvalue": diagnose(sample).min_eigenvalue,
            "uniform_ewma_min_eigenvalue": diagnose(uniform).min_eigenvalue,
            "clipped_min_eigenvalue": diagnose(repaired).min_eigenvalue,
        },
    }


def section_conditioning() -> dict:
    Q = ill_conditioned_q()
    mu = np.array([0.010, 0.012, 0.008])
    sigma2 = 1e-2
    kappa = 0.99
    repaired = shrink(Q, kappa)
    smallest = eigh(Q).eigenvectors[:, -1]

    def exposure(M):
        x = solve_unconstrained_mv(mu, M, sigma2)
        return {
            "gross_leverage": float(np.abs(x).sum()),
            "share_on_smallest_eigenvector": float((smallest @ x) ** 2 / (x @ x)),
        }

    before, after = diagnose(Q), diagnose(repaired)
    return {
        "title": SECTION_TITLES[1],
        "sinful": {
            "procedure": "solve with the raw estimate",
            "verdict": before.verdict.value,
            "condition_number": before.condition_number,
            "eigenvalues": _floats(eigh(Q).eigenvalues),
            "principal_coefficients": _floats(principal_decomposition(mu, Q, sigma2).coefficients),
            **exposure(Q),
        },
        "correct": {
            "procedure": f"shrink towards the identity with kappa = {kappa}",
            "verdict": after.verdict.value,
            "condition_number": after.condition_number,
            "eigenvalues": _floats(eigh(repaired).eigenvalues),
            "principal_coefficients": _floats(principal_decomposition(mu, repaired, sigma2).coefficients),
            **exposure(repaired),
        },
    }


def section_normalisation() -> dict:
    mu = np.array([1.0, 0.0])
    y = sinful_intermediate_step(mu, FIG1_Q, 1.0)
    x = solve_unconstrained_mv(mu, FIG1_Q, 1.0)
    return {
        "title": SECTION_TITLES[2],
        "sinful": {
            "procedure": "scale mu onto the risk boundary",
            "position": _floats(y),
            "sharpe": sharpe_ratio(y, mu, FIG1_Q),
        },
        "correct": {
            "procedure": "closed-form optimum through the inverse covariance",
            "position": _floats(x),
            "sharpe": sharpe_ratio(x, mu, FIG1_Q),
        },
    }


def section_sharpe() -> dict:
    mu = np.array([1.0, 0.5])
    x = solve_unconstrained_mv(mu, FIG1_Q, 1.0)
    scales = (0.1, 1.0, 10.0)
    budgets = (0.5, 2.0)
    optima = [solve_sharpe_max(mu, FIG1_Q, s) for s in budgets]
    return {
        "title": SECTION_TITLES[3],
        "sinful": {
            "procedure": "maximise the ratio itself; every positive multiple ties",
            "scales": list(scales),
            "sharpe_of_scaled_position": [sharpe_ratio(t * x, mu, FIG1_Q) for t in scales],
        },
        "correct": {
            "procedure": "solve the convex risk-budgeted problem at any budget",
            "risk_budgets": list(budgets),
            "sharpe": [sharpe_ratio(o, mu, FIG1_Q) for o in optima],
            "variance_at_optimum": [float(o @ FIG1_Q @ o) for o in optima],
            "budget_binds": [bool(abs(o @ FIG1_Q @ o - s) <= 1e-10 * s) for o, s in zip(optima, budgets)],
            "closed_form_sharpe": float(np.sqrt(mu @ np.linalg.solve(FIG1_Q, mu))),
        },
    }


def comparison_instances(count: int = 5, n: int = 5, seed: int = 7) -> list:
    """Random well-conditioned risk-budget problems in conic form."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        B = rng.standard_normal((n, n))
        Q = B @ B.T / n + 0.1 * np.eye(n)
        out.append(lift(MeanVarianceProblem(rng.standard_normal(n), 0.5 * (Q + Q.T), 1.0))[0])
    return out


def section_solvers(seed: int = 42) -> dict:
    result = compare_solvers(comparison_instances(), AnnealSchedule(seed=seed), seeds=(seed, seed + 1, seed + 2))
    return {
        "title": SECTION_TITLES[4],
        "sinful": {
            "procedure": "simulated annealing",
            "instances": result.instances,
            "mean_relative_gap": result.annealing_mean_gap,
            "gap_stddev_across_seeds": result.annealing_gap_stddev_across_seeds,
            "objective_evaluations": result.annealing_evaluations,
        },
        "correct": {
            "procedure": "log-barrier interior-point method",
            "ip_deterministic": result.ip_deterministic,
            "newton_steps": result.ip_newton_steps,
        },
    }


def section_costs() -> dict:
    costs = TransactionCosts([0.2, 0.3], [0.5, -0.2])
    problem = MeanVarianceProblem([1.0, 0.5], FIG1_Q, 1.0, costs=costs)
    conic, lifting = lift(problem)
    result = solve(conic)
    x = lifting.positions(result.x)
    naive = solve_unconstrained_mv(problem.mu, FIG1_Q, 1.0)
    grid_x, grid_value = grid_search(problem)
    _, exact_value = kink_enumeration(problem)

    series = load_synthetic_returns()
    base = dict(estimation_window=60, risk_budget=4e-4)
    turnover = {}
    for p in (0.0, 0.01):
        report = run_backtest(series.sample, BacktestConfig(**base, costs=p or None))
        turnover[p] = turnover_stats(report).total_turnover
    return {
        "title": SECTION_TITLES[5],
        "sinful": {
            "procedure": "ignore costs when choosing the position",
            "position": _floats(naive),
            "net_objective": objective_nonsmooth(problem, naive),
            "backtest_turnover": turnover[0.0],
        },
        "correct": {
            "procedure": "lift |x - x0| into linear constraints and solve",
            "position": _floats(x),
            "net_objective": objective_nonsmooth(problem, x),
            "solver_objective": result.objective,
            "grid_oracle_objective": grid_value,
            "exact_oracle_objective": exact_value,
            "trade_bound_error": float(np.max(np.abs(lifting.trade_bounds(result.x) - np.abs(x - costs.x0)))),
            "backtest_turnover_at_cost_0.01": turnover[0.01],
        },
    }


def _flip_point(Q, mu, lo, hi, tol=1e-9) -> float:
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _status_at(Q, mu, mid) is Status.OPTIMAL:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def section_feasibility() -> dict:
    mu = np.array([1.0, 0.5])
    x_mv, sigma2_min = min_variance_fully_invested(FIG1_Q)
    budgets = (0.10, 0.14, 0.149, 0.151, 0.16, 0.20)
    naive = solve_unconstrained_mv(mu, FIG1_Q, 0.10)
    return {
        "title": SECTION_TITLES[6],
        "sinful": {
            "procedure": "drop the budget equality and report a position anyway",
            "risk_budget": 0.10,
            "position": _floats(naive),
            "weight_sum": float(naive.sum()),
        },
        "correct": {
            "procedure": "phase-one feasibility check before optimising",
            "minimum_variance": sigma2_min,
            "minimum_variance_position": _floats(x_mv),
            "risk_budgets": list(budgets),
            "status": [_status_at(FIG1_Q, mu, s).value for s in budgets],
            "detected_flip_point": _flip_point(FIG1_Q, mu, 0.10, 0.20),
        },
    }


def run_sins(seed: int = 42) -> dict:
    """All seven sections, keyed by position. ``seed`` drives the annealing runs."""
    sections = [
        section_ewma(),
        section_conditioning(),
        section_normalisation(),
        section_sharpe(),
        section_solvers(seed),
        section_costs(),
        section_feasibility(),
    ]
    return {"sections": [{"number": i + 1, **s} for i, s in enumerate(sections)]}
