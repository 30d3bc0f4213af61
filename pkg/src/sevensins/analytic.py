"""Closed-form solutions of the unconstrained mean-variance model.

All routines take ``mu`` (expected returns per unit position), ``Q`` (return
covariance) and the risk budget ``sigma2`` in variance units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ValidationError, ZeroMu, ZeroPosition
from .linalg import SymmetricMatrix, as_symmetric, cholesky, eigh, solve_spd


@dataclass(frozen=True)
class SharpeParams:
    """Only a zero risk-free rate is supported."""

    risk_free: float = 0.0

    def __post_init__(self):
        if self.risk_free != 0.0:
            raise ValidationError("only r_f = 0 is supported")


@dataclass(frozen=True)
class PrincipalTerm:
    eigenvalue: float
    portfolio: np.ndarray
    coefficient: float


@dataclass(frozen=True)
class PrincipalDecomposition:
    """Optimal position written as ``scale * sum(coefficient_i * v_i)``.

    Coefficients are ``(v_i . mu) / lambda_i``, so directions with small
    eigenvalues receive the largest weights.
    """

    terms: list[PrincipalTerm]
    scale: float

    def reconstruction(self) -> np.ndarray:
        x = np.zeros_like(self.terms[0].portfolio)
        for term in self.terms:
            x = x + term.coefficient * term.portfolio
        return self.scale * x

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([t.coefficient for t in self.terms])

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([t.eigenvalue for t in self.terms])


def _inputs(mu, Q, sigma2) -> tuple[np.ndarray, SymmetricMatrix, float]:
    Q = as_symmetric(Q)
    mu = np.asarray(mu, dtype=float).reshape(-1)
    if mu.shape[0] != Q.n:
        raise DimensionMismatch(f"mu has length {mu.shape[0]}, Q is {Q.n}x{Q.n}")
    if not sigma2 >= 0:
        raise ValidationError(f"risk budget must be nonnegative, got {sigma2}")
    if not np.any(mu):
        raise ZeroMu("mu is identically zero")
    return mu, Q, float(sigma2)


def solve_unconstrained_mv(mu, Q, sigma2: float) -> np.ndarray:
    """Maximiser of ``mu . x`` over the ellipsoid ``x' Q x <= sigma2``.

    ``x* = sqrt(sigma2) * Q^{-1} mu / sqrt(mu' Q^{-1} mu)``, which lies on the
    boundary of the ellipsoid. A zero budget gives the zero position.

    Raises
    ------
    NotPositiveDefinite
        If ``Q`` has no Cholesky factor.
    ZeroMu
        If ``mu`` is identically zero.
    """
    mu, Q, sigma2 = _inputs(mu, Q, sigma2)
    y = solve_spd(Q, mu)
    if sigma2 == 0.0:
        return np.zeros_like(mu)
    return np.sqrt(sigma2) * y / np.sqrt(mu @ y)


def principal_decomposition(mu, Q, sigma2: float) -> PrincipalDecomposition:
    mu, Q, sigma2 = _inputs(mu, Q, sigma2)
    cholesky(Q)
    dec = eigh(Q)
    terms = []
    for lam, v in zip(dec.eigenvalues, dec.eigenvectors.T):
        terms.append(PrincipalTerm(float(lam), v.copy(), float(v @ mu / lam)))
    quad = sum(t.coefficient**2 * t.eigenvalue for t in terms)  # mu' Q^{-1} mu
    return PrincipalDecomposition(terms=terms, scale=float(np.sqrt(sigma2) / np.sqrt(quad)))


def sinful_intermediate_step(mu, Q, sigma2: float) -> np.ndarray:
    """Scale the direction ``mu`` onto the risk ellipsoid, ignoring ``Q`` otherwise.

    Returns ``sqrt(sigma2) * mu / sqrt(mu' Q mu)``. This is the two-stage
    heuristic baseline; it coincides with the optimum only when ``mu`` is an
    eigenvector of ``Q``.
    """
    mu, Q, sigma2 = _inputs(mu, Q, sigma2)
    cholesky(Q)
    return np.sqrt(sigma2) * mu / np.sqrt(mu @ Q.entries @ mu)


def sharpe_ratio(x, mu, Q, params: SharpeParams | None = None) -> float:
    """``(x . mu - r_f) / sqrt(x' Q x)``; undefined at ``x = 0``."""
    params = params or SharpeParams()
    Q = as_symmetric(Q)
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if not np.any(x):
        raise ZeroPosition("the Sharpe ratio is not defined for the zero position")
    var = float(x @ Q.entries @ x)
    if var <= 0:
        raise ValidationError(f"position variance {var:.3g} is not positive")
    return float((x @ mu - params.risk_free) / np.sqrt(var))


def solve_sharpe_max(mu, Q, sigma2: float) -> np.ndarray:
    """Sharpe-maximising position, obtained from the convex risk-budget problem.

    Maximising ``S(x)`` is scale invariant; fixing ``sqrt(x' Q x)`` at the
    budget and relaxing the equality to ``<=`` gives a convex problem whose
    maximiser sits on the boundary, so the closed form applies.
    """
    return solve_unconstrained_mv(mu, Q, sigma2)


def min_variance_fully_invested(Q) -> tuple[np.ndarray, float]:
    """Minimum-variance portfolio with weights summing to one, and its variance.

    ``x_mv = Q^{-1} e / (e' Q^{-1} e)`` and ``sigma2_min = 1 / (e' Q^{-1} e)``.
    """
    Q = as_symmetric(Q)
    e = np.ones(Q.n)
    y = solve_spd(Q, e)
    s = float(e @ y)
    return y / s, 1.0 / s
