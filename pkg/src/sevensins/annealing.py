"""Simulated-annealing baseline for conic portfolio problems.

This exists to be compared against the interior-point solver: it is
stochastic, slow and sensitive to its schedule. Randomness comes from a
SplitMix64 generator so runs are reproducible from the seed alone, on any
platform:

    state <- state + 0x9E3779B97F4A7C15            (mod 2**64)
    z <- (state ^ (state >> 30)) * 0xBF58476D1CE4E5B9
    z <- (z ^ (z >> 27)) * 0x94D049BB133111EB
    out <- z ^ (z >> 31)

Uniforms are ``(out >> 11) * 2**-53``; normals use the cosine branch of the
Box-Muller transform, ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg as sla

from .conic_solver import SolveResult, SolverSettings, Status, phase_one, solve
from .errors import InfeasibleStart, ValidationError
from .models import ConicProblem

_MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        if not 0 <= seed <= _MASK:
            raise ValidationError("seed must be an unsigned 64-bit integer")
        self.state = seed

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0**-53

    def normal(self) -> float:
        u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)

    def normals(self, k: int) -> np.ndarray:
        return np.array([self.normal() for _ in range(k)])


@dataclass(frozen=True)
class AnnealSchedule:
    initial_temperature: float = 1.0
    cooling_factor: float = 0.95
    steps_per_temperature: int = 50
    step_scale: float = 0.1
    min_temperature: float = 1e-3
    seed: int = 42

    def __post_init__(self):
        if not (self.initial_temperature > 0 and self.step_scale > 0 and self.min_temperature > 0):
            raise ValidationError("temperatures and step scale must be positive")
        if not 0 < self.cooling_factor < 1:
            raise ValidationError("cooling_factor must lie in (0, 1)")
        if self.steps_per_temperature < 1:
            raise ValidationError("steps_per_temperature must be positive")
        if not 0 <= self.seed <= _MASK:
            raise ValidationError("seed must be an unsigned 64-bit integer")

    def with_seed(self, seed: int) -> AnnealSchedule:
        return replace(self, seed=seed)


@dataclass(frozen=True)
class SolverComparison:
    instances: int
    annealing_mean_gap: float
    annealing_gap_stddev_across_seeds: float
    ip_deterministic: bool
    wall_time_ratio: float
    ip_newton_steps: int = 0
    annealing_evaluations: int = 0


def _start_point(problem: ConicProblem) -> np.ndarray:
    z = np.zeros(problem.dim)
    if problem.A.shape[0] == 0 and problem.risk_budget > 0 and np.all(problem.h > 0):
        return z
    ph = phase_one(problem)
    if not (ph.feasible and ph.strict):
        raise InfeasibleStart("no strictly feasible starting point exists")
    return ph.witness


def anneal(problem: ConicProblem, schedule: AnnealSchedule | None = None) -> SolveResult:
    """Best feasible point found by Metropolis annealing on ``-c . z``.

    Proposals are isotropic Gaussian steps of size ``step_scale *
    temperature``, restricted to the null space of the equality constraints
    and rejected when they leave the feasible set. The result status is
    always ``Heuristic``; ``outer_iterations`` counts temperature levels and
    ``newton_steps_total`` counts proposals.

    Raises
    ------
    InfeasibleStart
        If no strictly feasible starting point exists.
    """
    schedule = schedule or AnnealSchedule()
    rng = SplitMix64(schedule.seed)
    z = _start_point(problem)
    N = sla.null_space(problem.A) if problem.A.shape[0] else None
    k = problem.dim if N is None else N.shape[1]
    c, G, h, L, rows = problem.c, problem.G, problem.h, problem.L, problem.risk_rows
    budget = problem.risk_budget

    def feasible(y):
        u = L.T @ y[rows]
        return u @ u <= budget and bool(np.all(G @ y <= h))

    value = float(c @ z)
    best_z, best_value = z.copy(), value
    temperature = schedule.initial_temperature
    levels = evaluations = 0
    while temperature >= schedule.min_temperature:
        levels += 1
        for _ in range(schedule.steps_per_temperature):
            step = schedule.step_scale * temperature * rng.normals(k)
            candidate = z + (step if N is None else N @ step)
            evaluations += 1
            if not feasible(candidate):
                continue
            cand_value = float(c @ candidate)
            delta = value - cand_value  # energy increase
            if delta <= 0 or rng.uniform() < math.exp(-delta / temperature):
                z, value = candidate, cand_value
                if value > best_value:
                    best_z, best_value = z.copy(), value
        temperature *= schedule.cooling_factor
    return SolveResult(Status.HEURISTIC, best_z, best_value, float("nan"), levels, evaluations)


def compare_solvers(
    instances: list[ConicProblem],
    schedule: AnnealSchedule | None = None,
    seeds: list[int] = (1, 2, 3, 4, 5),
    settings: SolverSettings | None = None,
) -> SolverComparison:
    """Run the interior-point solver and annealing (once per seed) on each instance.

    Gaps are relative shortfalls ``(ip - anneal) / |ip|``. The interior-point
    solver is run twice per instance and compared bitwise.
    """
    schedule = schedule or AnnealSchedule()
    settings = settings or SolverSettings()
    gaps = np.zeros((len(instances), len(seeds)))
    deterministic = True
    ip_time = sa_time = 0.0
    ip_steps = sa_evals = 0
    for i, problem in enumerate(instances):
        t0 = time.perf_counter()
        first = solve(problem, settings)
        ip_time += time.perf_counter() - t0
        second = solve(problem, settings)
        deterministic &= (
            first.status == second.status
            and first.x.tobytes() == second.x.tobytes()
            and np.float64(first.objective).tobytes() == np.float64(second.objective).tobytes()
        )
        ip_steps += first.newton_steps_total
        scale = max(abs(first.objective), 1e-300)
        for j, seed in enumerate(seeds):
            t0 = time.perf_counter()
            result = anneal(problem, schedule.with_seed(seed))
            sa_time += time.perf_counter() - t0
            sa_evals += result.newton_steps_total
            gaps[i, j] = (first.objective - result.objective) / scale
    spread = gaps.std(axis=1, ddof=1) if len(seeds) > 1 else np.zeros(len(instances))
    return SolverComparison(
        instances=len(instances),
        annealing_mean_gap=float(gaps.mean()),
        annealing_gap_stddev_across_seeds=float(spread.mean()),
        ip_deterministic=bool(deterministic),
        wall_time_ratio=sa_time / ip_time if ip_time > 0 else float("inf"),
        ip_newton_steps=ip_steps,
        annealing_evaluations=sa_evals,
    )
