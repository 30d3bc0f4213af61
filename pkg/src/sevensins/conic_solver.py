"""Primal log-barrier interior-point solver for :class:`~sevensins.models.ConicProblem`.

The solver maximises ``c . z`` subject to one ellipsoidal risk constraint,
linear inequalities and linear equalities. Equalities are eliminated by
working in an orthonormal basis of the null space of ``A``; each centering
step is a damped Newton iteration on

    t * (-c . z) - log(sigma2 - z' P z) - sum(log(h - G z))

and ``t`` grows geometrically until the duality-gap bound ``m / t`` falls
below the tolerance. A phase-I problem finds a strictly feasible start or
certifies that none exists.

Everything is deterministic: identical inputs give bitwise identical output.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .errors import IterationLimit, ValidationError
from .models import ConicProblem

log = logging.getLogger(__name__)

# Centering stops once half the squared Newton decrement drops below this.
_NEWTON_TOL = 1e-10
_MIN_STEP = 1e-20


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    ITERATION_LIMIT = "IterationLimit"
    NUMERICAL_FAILURE = "NumericalFailure"
    HEURISTIC = "Heuristic"


@dataclass(frozen=True)
class SolverSettings:
    gap_tolerance: float = 1e-8
    max_outer_iterations: int = 100
    max_newton_iterations: int = 50
    barrier_multiplier: float = 10.0
    initial_barrier: float = 1.0
    line_search_backtrack: float = 0.5
    line_search_slope: float = 0.01
    infeasibility_margin: float = 1e-9

    def __post_init__(self):
        for name in ("gap_tolerance", "initial_barrier", "line_search_slope", "infeasibility_margin"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.max_outer_iterations < 1 or self.max_newton_iterations < 1:
            raise ValidationError("iteration limits must be positive")
        if not self.barrier_multiplier > 1:
            raise ValidationError("barrier_multiplier must exceed 1")
        if not 0 < self.line_search_backtrack < 1:
            raise ValidationError("line_search_backtrack must lie in (0, 1)")
        if not self.line_search_slope < 0.5:
            raise ValidationError("line_search_slope must be below 0.5")


@dataclass(frozen=True)
class SolveResult:
    """Outcome of a solve.

    ``x`` is in the coordinates of the :class:`ConicProblem` (lifted
    coordinates when transaction costs are present). For ``Infeasible``
    results ``gap_estimate`` holds the positive phase-I slack and ``x`` the
    least-infeasible point found.
    """

    status: Status
    x: np.ndarray
    objective: float
    gap_estimate: float
    outer_iterations: int = 0
    newton_steps_total: int = 0


@dataclass(frozen=True)
class PhaseOneResult:
    """``feasible`` iff the minimal slack ``certificate`` is at most the margin.

    ``strict`` says whether ``witness`` lies strictly inside every
    inequality; it is False when the feasible set has (numerically) empty
    interior.
    """

    feasible: bool
    witness: np.ndarray
    certificate: float
    strict: bool
    newton_steps: int = 0

    def __iter__(self):
        yield self.feasible
        yield self.witness if self.feasible else self.certificate


@dataclass(frozen=True)
class _Quad:
    """Convex quadratic constraint ``w' P w + q . w - r <= 0``."""

    P: np.ndarray
    q: np.ndarray
    r: float

    def value(self, w):
        return float(w @ self.P @ w + self.q @ w - self.r)

    def grad(self, w):
        return 2.0 * (self.P @ w) + self.q


@dataclass
class _Core:
    """Generic barrier problem: minimise ``f . w`` over quadratic and linear constraints."""

    f: np.ndarray
    quads: list
    G: np.ndarray
    h: np.ndarray
    A: np.ndarray
    b: np.ndarray
    N: np.ndarray | None = field(init=False)

    def __post_init__(self):
        self.N = sla.null_space(self.A) if self.A.shape[0] else None

    @property
    def barrier_terms(self) -> int:
        return len(self.quads) + self.G.shape[0]

    def slacks(self, w):
        qs = np.array([-quad.value(w) for quad in self.quads])
        ls = self.h - self.G @ w
        return qs, ls


@dataclass
class _Trace:
    newton_steps: int = 0
    outer: int = 0


def _newton_direction(H, g, N):
    if N is not None:
        H = N.T @ H @ N
        g = N.T @ g
    try:
        dy = -sla.cho_solve(sla.cho_factor(H, lower=True), g)
    except (np.linalg.LinAlgError, sla.LinAlgError):
        dy = -np.linalg.lstsq(H, g, rcond=None)[0]
    lam2 = float(-(g @ dy))
    dw = dy if N is None else N @ dy
    return dw, lam2


def _center(core: _Core, w: np.ndarray, t: float, settings: SolverSettings, trace: _Trace):
    """Damped Newton on the barrier function at parameter ``t``.

    Returns ``(w, centered, failed)``.
    """
    for _ in range(settings.max_newton_iterations):
        qs, ls = core.slacks(w)
        grads = [quad.grad(w) for quad in core.quads]
        g = t * core.f
        H = np.zeros((w.shape[0], w.shape[0]))
        for quad, s, gq in zip(core.quads, qs, grads):
            g = g + gq / s
            H += 2.0 * quad.P / s + np.outer(gq, gq) / (s * s)
        if ls.shape[0]:
            inv = 1.0 / ls
            g = g + core.G.T @ inv
            H += (core.G.T * (inv * inv)) @ core.G
        dw, lam2 = _newton_direction(H, g, core.N)
        if not np.all(np.isfinite(dw)) or not np.isfinite(lam2):
            return w, False, True
        if lam2 / 2.0 <= _NEWTON_TOL:
            return w, True, False
        trace.newton_steps += 1

        # Barrier differences are accumulated from slack increments so the
        # Armijo test stays accurate when t * f.w is large.
        f_dw = float(core.f @ dw)
        q_lin = np.array([gq @ dw for gq in grads])
        q_curv = np.array([dw @ quad.P @ dw for quad in core.quads])
        l_lin = core.G @ dw
        slope = float(g @ dw)
        alpha = 1.0
        while True:
            dq = -(alpha * q_lin + alpha * alpha * q_curv)
            dl = -alpha * l_lin
            if np.all(qs + dq > 0) and np.all(ls + dl > 0):
                change = t * alpha * f_dw - np.sum(np.log1p(dq / qs)) - np.sum(np.log1p(dl / ls))
                if change <= settings.line_search_slope * alpha * slope:
                    break
            alpha *= settings.line_search_backtrack
            if alpha < _MIN_STEP:
                # No progress possible at working precision.
                return w, lam2 < 1e-6, lam2 >= 1e-6
        w = w + alpha * dw
        if not np.all(np.isfinite(w)) or np.max(np.abs(w)) > 1e15:
            return w, False, True
    return w, False, False


def _barrier(core: _Core, w: np.ndarray, settings: SolverSettings, trace: _Trace, stop=None):
    """Outer loop of the barrier method.

    ``stop(w, gap)`` is consulted after every centering and may end the run
    early by returning a truthy value. Returns ``(w, gap, status)``.
    """
    t = settings.initial_barrier
    m = max(core.barrier_terms, 1)
    while True:
        trace.outer += 1
        w, centered, failed = _center(core, w, t, settings, trace)
        if failed:
            return w, m / t, Status.NUMERICAL_FAILURE
        gap = m / t
        if stop is not None and centered and stop(w, gap):
            return w, gap, Status.OPTIMAL
        if gap <= settings.gap_tolerance:
            return w, gap, Status.OPTIMAL if centered else Status.ITERATION_LIMIT
        if trace.outer >= settings.max_outer_iterations:
            return w, gap, Status.ITERATION_LIMIT
        t *= settings.barrier_multiplier


def _embed(P_small: np.ndarray, rows: np.ndarray, dim: int) -> np.ndarray:
    P = np.zeros((dim, dim))
    P[np.ix_(rows, rows)] = P_small
    return P


def _risk_matrix(problem: ConicProblem) -> np.ndarray:
    return _embed(problem.L @ problem.L.T, problem.risk_rows, problem.dim)


def _search_radius(problem: ConicProblem, z0: np.ndarray) -> float:
    """Generous radius for the artificial ball that keeps phase I bounded."""
    scale = 1.0 + float(np.linalg.norm(z0))
    if problem.h.shape[0]:
        scale += float(np.max(np.abs(problem.h)))
    if problem.b.shape[0]:
        scale += float(np.max(np.abs(problem.b)))
    k = problem.risk_rows.shape[0]
    if k and problem.risk_budget > 0:
        Linv = sla.solve_triangular(problem.L, np.eye(k), lower=True)
        scale += np.sqrt(problem.risk_budget) * float(np.linalg.norm(Linv, 2))
    return 1e3 * scale


def _phase_one_core(problem: ConicProblem, settings: SolverSettings, with_risk: bool = True) -> PhaseOneResult:
    m = problem.dim
    A, b, G, h = problem.A, problem.b, problem.G, problem.h
    margin = settings.infeasibility_margin
    if A.shape[0]:
        z0 = np.linalg.lstsq(A, b, rcond=None)[0]
        resid = float(np.max(np.abs(A @ z0 - b)))
        if resid > 1e-9 * (1.0 + float(np.max(np.abs(b)))):
            return PhaseOneResult(False, z0, resid, False)
    else:
        z0 = np.zeros(m)

    P = _risk_matrix(problem)
    P1 = np.zeros((m + 1, m + 1))
    P1[:m, :m] = P
    e_s = np.zeros(m + 1)
    e_s[-1] = 1.0
    quads = []
    viol = []
    if with_risk:
        quads.append(_Quad(P1, -e_s, problem.risk_budget))
        viol.append(problem.risk(z0) - problem.risk_budget)
    if G.shape[0]:
        viol.append(float(np.max(G @ z0 - h)))
    if not viol:
        return PhaseOneResult(True, z0, -np.inf, True)

    R = _search_radius(problem, z0)
    B = np.zeros((m + 1, m + 1))
    B[:m, :m] = np.eye(m)
    qB = np.zeros(m + 1)
    qB[:m] = -2.0 * z0
    quads.append(_Quad(B, qB, R * R - float(z0 @ z0)))

    core = _Core(
        f=e_s,
        quads=quads,
        G=np.hstack([G, -np.ones((G.shape[0], 1))]),
        h=h,
        A=np.hstack([A, np.zeros((A.shape[0], 1))]),
        b=b,
    )
    w0 = np.concatenate([z0, [max(viol) + 1.0]])
    decision_gap = min(settings.gap_tolerance, 0.1 * margin)

    def stop(w, gap):
        s = w[-1]
        return s < -margin or s - gap > margin or gap <= decision_gap

    trace = _Trace()
    phase_settings = SolverSettings(
        gap_tolerance=decision_gap,
        max_outer_iterations=settings.max_outer_iterations,
        max_newton_iterations=settings.max_newton_iterations,
        barrier_multiplier=settings.barrier_multiplier,
        initial_barrier=settings.initial_barrier,
        line_search_backtrack=settings.line_search_backtrack,
        line_search_slope=settings.line_search_slope,
        infeasibility_margin=margin,
    )
    w, gap, status = _barrier(core, w0, phase_settings, trace, stop)
    s = float(w[-1])
    z = w[:m].copy()
    if status is not Status.OPTIMAL:
        if s < 0:
            return PhaseOneResult(True, z, s, True, trace.newton_steps)
        raise IterationLimit(f"phase I stopped with status {status.value} at slack {s:.3g}")
    if s - gap > margin:
        # Certified: the optimal slack is at least s - gap.
        return PhaseOneResult(False, z, s - gap, False, trace.newton_steps)
    return PhaseOneResult(s <= margin, z, s, s < 0, trace.newton_steps)


def phase_one(problem: ConicProblem, settings: SolverSettings | None = None) -> PhaseOneResult:
    """Find a strictly feasible point or certify infeasibility.

    Minimises a common slack ``s`` added to every inequality (risk and
    linear) subject to the equalities. The problem is declared feasible iff
    the optimal slack is at most ``settings.infeasibility_margin``. A large
    artificial ball keeps the phase-I barrier bounded.

    Without linear constraints the origin is returned directly.

    Raises
    ------
    IterationLimit
        If phase I neither converges nor finds a strictly feasible point.
    """
    settings = settings or SolverSettings()
    if problem.A.shape[0] == 0 and problem.G.shape[0] == 0:
        z0 = np.zeros(problem.dim)
        return PhaseOneResult(True, z0, -problem.risk_budget, problem.risk_budget > 0)
    return _phase_one_core(problem, settings)


def _objective_scale(c: np.ndarray) -> float:
    # The barrier works on c / max|c| so the gap tolerance is relative.
    top = float(np.max(np.abs(c))) if c.shape[0] else 0.0
    return top if top > 0 else 1.0


def _infeasible(z, certificate, outer=0, steps=0) -> SolveResult:
    return SolveResult(Status.INFEASIBLE, np.asarray(z, dtype=float), float("nan"), float(certificate), outer, steps)


def _solve_zero_budget(problem: ConicProblem, settings: SolverSettings) -> SolveResult:
    # A positive definite risk form forces z[risk_rows] = 0.
    m = problem.dim
    free = np.setdiff1d(np.arange(m), problem.risk_rows)
    if free.shape[0] == 0:
        z = np.zeros(m)
        viol = problem.max_violation(z)
        if viol > settings.infeasibility_margin:
            return _infeasible(z, viol)
        return SolveResult(Status.OPTIMAL, z, 0.0, 0.0)
    reduced = ConicProblem(
        c=problem.c[free],
        L=np.zeros((0, 0)),
        risk_rows=np.zeros(0, dtype=np.intp),
        risk_budget=0.0,
        A=problem.A[:, free],
        b=problem.b,
        G=problem.G[:, free],
        h=problem.h,
    )
    result = _solve_linear(reduced, settings)
    z = np.zeros(m)
    z[free] = result.x
    return SolveResult(
        result.status, z, result.objective, result.gap_estimate, result.outer_iterations, result.newton_steps_total
    )


def _solve_linear(problem: ConicProblem, settings: SolverSettings) -> SolveResult:
    ph = _phase_one_core(problem, settings, with_risk=False)
    if not ph.feasible:
        return _infeasible(ph.witness, ph.certificate, 0, ph.newton_steps)
    core = _Core(f=-problem.c / _objective_scale(problem.c), quads=[], G=problem.G, h=problem.h, A=problem.A, b=problem.b)
    if problem.G.shape[0] == 0:
        direction = problem.c if core.N is None else core.N.T @ problem.c
        if np.any(np.abs(direction) > 1e-12 * (1.0 + np.max(np.abs(problem.c)))):
            return SolveResult(Status.NUMERICAL_FAILURE, ph.witness, float("inf"), float("inf"))
        return SolveResult(Status.OPTIMAL, ph.witness, float(problem.c @ ph.witness), 0.0)
    return _run_main(problem, core, ph.witness, settings, ph.newton_steps)


def _run_main(problem, core, z0, settings, steps0=0) -> SolveResult:
    trace = _Trace(newton_steps=steps0)
    z, gap, status = _barrier(core, np.array(z0, dtype=float), settings, trace)
    return SolveResult(status, z, float(problem.c @ z), float(gap), trace.outer, trace.newton_steps)


def solve(problem: ConicProblem, settings: SolverSettings | None = None) -> SolveResult:
    """Solve a conic problem to ``settings.gap_tolerance``.

    The objective is normalised by ``max|c|``, so the reported
    ``gap_estimate`` bounds the suboptimality relative to that scale.

    Problems are reported through ``SolveResult.status``; only malformed
    input raises. When the feasible set has numerically empty interior (for
    example a fully invested portfolio at exactly the minimum variance), the
    inequalities are relaxed by at most twice the infeasibility margin so the
    barrier has an interior to work in.
    """
    settings = settings or SolverSettings()
    if problem.risk_budget == 0.0:
        return _solve_zero_budget(problem, settings)

    if problem.A.shape[0] == 0 and problem.G.shape[0] == 0:
        z0 = np.zeros(problem.dim)
        steps = 0
        relax = 0.0
    else:
        try:
            ph = _phase_one_core(problem, settings)
        except IterationLimit:
            return SolveResult(Status.ITERATION_LIMIT, np.zeros(problem.dim), float("nan"), float("inf"))
        if not ph.feasible:
            log.info("phase I certifies infeasibility, slack %.3g", ph.certificate)
            return _infeasible(ph.witness, ph.certificate, 0, ph.newton_steps)
        z0, steps = ph.witness, ph.newton_steps
        relax = 0.0 if ph.strict else ph.certificate + settings.infeasibility_margin
        if relax:
            log.info("feasible set has empty interior; relaxing inequalities by %.3g", relax)

    core = _Core(
        f=-problem.c / _objective_scale(problem.c),
        quads=[_Quad(_risk_matrix(problem), np.zeros(problem.dim), problem.risk_budget + relax)],
        G=problem.G,
        h=problem.h + relax,
        A=problem.A,
        b=problem.b,
    )
    return _run_main(problem, core, z0, settings, steps)
