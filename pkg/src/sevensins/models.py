"""Problem data for the mean-variance model and its conic lifting."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .analytic import min_variance_fully_invested
from .covariance import DEFAULT_NEAR_SINGULAR, Verdict, diagnose
from .errors import CostsMissing, DimensionMismatch, NotPositiveDefinite, ValidationError
from .linalg import SymmetricMatrix, as_symmetric, cholesky


def _vector(values, name: str, n: int | None = None) -> np.ndarray:
    v = np.array(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{name} contains NaN or Inf")
    if n is not None and v.shape[0] != n:
        raise DimensionMismatch(f"{name} has length {v.shape[0]}, expected {n}")
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class TransactionCosts:
    """Linear trading costs ``sum(p * |x - x0|)`` relative to the incumbent ``x0``."""

    p: np.ndarray
    x0: np.ndarray

    def __post_init__(self):
        p = _vector(self.p, "p")
        x0 = _vector(self.x0, "x0", p.shape[0])
        if not np.all(p > 0):
            raise ValidationError("cost rates p must be strictly positive")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "x0", x0)


@dataclass(frozen=True)
class MeanVarianceProblem:
    """maximise ``mu . x`` subject to ``x' Q x <= risk_budget`` plus optional blocks."""

    mu: np.ndarray
    Q: SymmetricMatrix
    risk_budget: float
    fully_invested: bool = False
    long_only: bool = False
    costs: TransactionCosts | None = None

    def __post_init__(self):
        Q = as_symmetric(self.Q)
        mu = _vector(self.mu, "mu", Q.n)
        if not self.risk_budget >= 0:
            raise ValidationError(f"risk budget must be nonnegative, got {self.risk_budget}")
        if self.costs is not None and self.costs.p.shape[0] != Q.n:
            raise DimensionMismatch(f"costs are for {self.costs.p.shape[0]} assets, problem has {Q.n}")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "risk_budget", float(self.risk_budget))

    @property
    def n(self) -> int:
        return self.Q.n

    @property
    def risk_limit(self) -> float:
        """Budget in volatility units, the nonnegative root of ``risk_budget``."""
        return float(np.sqrt(self.risk_budget))


@dataclass(frozen=True)
class ConicProblem:
    """maximise ``c . z`` s.t. ``||L' z[risk_rows]|| <= sqrt(risk_budget)``, ``A z = b``, ``G z <= h``."""

    c: np.ndarray
    L: np.ndarray
    risk_rows: np.ndarray
    risk_budget: float
    A: np.ndarray = field(default=None)
    b: np.ndarray = field(default=None)
    G: np.ndarray = field(default=None)
    h: np.ndarray = field(default=None)

    def __post_init__(self):
        c = _vector(self.c, "c")
        m = c.shape[0]
        L = np.array(self.L, dtype=float)
        rows = np.array(self.risk_rows, dtype=np.intp).reshape(-1)
        k = rows.shape[0]
        if L.shape != (k, k):
            raise DimensionMismatch(f"L must be {k}x{k}, got {L.shape}")
        if k and (rows.min() < 0 or rows.max() >= m or np.unique(rows).shape[0] != k):
            raise DimensionMismatch("risk_rows must be distinct indices into the variable vector")
        if not np.array_equal(L, np.tril(L)) or not np.all(np.diag(L) > 0):
            raise ValidationError("L must be lower triangular with positive diagonal")
        if not self.risk_budget >= 0:
            raise ValidationError("risk budget must be nonnegative")

        def block(M, v, name):
            M = np.zeros((0, m)) if M is None else np.array(M, dtype=float)
            if M.ndim == 1 and M.shape[0] in (0, m):
                M = M.reshape(-1, m)
            if M.ndim != 2 or M.shape[1] != m:
                raise DimensionMismatch(f"{name}: matrix of shape {M.shape} does not have {m} columns")
            v = np.zeros(0) if v is None else np.array(v, dtype=float).reshape(-1)
            if M.shape[0] != v.shape[0]:
                raise DimensionMismatch(f"{name}: {M.shape[0]} rows but rhs of length {v.shape[0]}")
            M.setflags(write=False)
            v.setflags(write=False)
            return M, v

        A, b = block(self.A, self.b, "equalities")
        G, h = block(self.G, self.h, "inequalities")
        L.setflags(write=False)
        rows.setflags(write=False)
        for name, value in dict(c=c, L=L, risk_rows=rows, A=A, b=b, G=G, h=h).items():
            object.__setattr__(self, name, value)
        object.__setattr__(self, "risk_budget", float(self.risk_budget))

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    def risk(self, z) -> float:
        """``z[risk_rows]' L L' z[risk_rows]``."""
        u = self.L.T @ np.asarray(z, dtype=float)[self.risk_rows]
        return float(u @ u)

    def max_violation(self, z) -> float:
        """Largest constraint violation at ``z`` (<= 0 when feasible)."""
        z = np.asarray(z, dtype=float)
        parts = [self.risk(z) - self.risk_budget]
        if self.G.shape[0]:
            parts.append(float(np.max(self.G @ z - self.h)))
        if self.A.shape[0]:
            parts.append(float(np.max(np.abs(self.A @ z - self.b))))
        return max(parts)


@dataclass(frozen=True)
class LiftingMap:
    """Coordinates of the lifted problem: ``z[:n]`` are positions, ``z[n:]`` the trade bounds ``t``."""

    original_dim: int
    lifted_dim: int

    def positions(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float)[: self.original_dim].copy()

    def trade_bounds(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float)[self.original_dim : self.lifted_dim].copy()


def lift(problem: MeanVarianceProblem) -> tuple[ConicProblem, LiftingMap]:
    """Transcribe a mean-variance problem into canonical conic form.

    With transaction costs the variables become ``(x, t)`` in R^{2n}, the
    objective ``mu . x - p . t``, and each absolute value is replaced by the
    pair of rows ``x_i - t_i <= x0_i`` and ``-x_i - t_i <= -x0_i``. At any
    optimum ``t_i = |x_i - x0_i|``.
    """
    n = problem.n
    L = cholesky(problem.Q).L
    costs = problem.costs
    m = 2 * n if costs is not None else n
    eye = np.eye(n)
    zeros = np.zeros((n, m - n))

    if costs is None:
        c = problem.mu.copy()
    else:
        c = np.concatenate([problem.mu, -costs.p])

    A = np.zeros((0, m))
    b = np.zeros(0)
    if problem.fully_invested:
        A = np.concatenate([np.ones(n), np.zeros(m - n)])[None, :]
        b = np.ones(1)

    G_rows, h_rows = [], []
    if costs is not None:
        G_rows += [np.hstack([eye, -eye]), np.hstack([-eye, -eye])]
        h_rows += [costs.x0, -costs.x0]
    if problem.long_only:
        G_rows.append(np.hstack([-eye, zeros]))
        h_rows.append(np.zeros(n))
    G = np.vstack(G_rows) if G_rows else np.zeros((0, m))
    h = np.concatenate(h_rows) if h_rows else np.zeros(0)

    conic = ConicProblem(c=c, L=L, risk_rows=np.arange(n), risk_budget=problem.risk_budget, A=A, b=b, G=G, h=h)
    return conic, LiftingMap(original_dim=n, lifted_dim=m)


def objective_nonsmooth(problem: MeanVarianceProblem, x) -> float:
    """``mu . x - sum(p * |x - x0|)``, the cost-penalised objective before lifting."""
    if problem.costs is None:
        raise CostsMissing("problem has no transaction-cost block")
    x = _vector(x, "x", problem.n)
    return float(problem.mu @ x - problem.costs.p @ np.abs(x - problem.costs.x0))


class FindingKind(str, enum.Enum):
    INDEFINITE = "Indefinite"
    NEAR_SINGULAR = "NearSingular"
    INFEASIBLE_RISK_BUDGET = "InfeasibleRiskBudget"


@dataclass(frozen=True)
class Finding:
    kind: FindingKind
    message: str
    value: float


def validate(problem: MeanVarianceProblem, near_singular_threshold: float | None = None) -> list[Finding]:
    """Pre-solve checks; an empty list means the problem is clean."""
    threshold = DEFAULT_NEAR_SINGULAR if near_singular_threshold is None else near_singular_threshold
    findings = []
    diag = diagnose(problem.Q, threshold)
    if diag.verdict is Verdict.INDEFINITE:
        findings.append(
            Finding(FindingKind.INDEFINITE, f"covariance has negative eigenvalue {diag.min_eigenvalue:.6g}", diag.min_eigenvalue)
        )
    elif diag.verdict is Verdict.NEAR_SINGULAR:
        findings.append(
            Finding(FindingKind.NEAR_SINGULAR, f"covariance condition number {diag.condition_number:.6g}", diag.condition_number)
        )
    if problem.fully_invested and diag.min_eigenvalue > 0:
        try:
            _, sigma2_min = min_variance_fully_invested(problem.Q)
        except NotPositiveDefinite:
            sigma2_min = None
        if sigma2_min is not None and problem.risk_budget < sigma2_min:
            findings.append(
                Finding(
                    FindingKind.INFEASIBLE_RISK_BUDGET,
                    f"risk budget {problem.risk_budget:.6g} is below the minimum fully invested variance {sigma2_min:.6g}",
                    sigma2_min,
                )
            )
    return findings
