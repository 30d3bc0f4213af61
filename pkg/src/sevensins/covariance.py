"""Covariance estimation, diagnosis and repair.

Includes the per-entry EWMA estimator, which deliberately gives no PSD
guarantee, and a helper that builds the unbounded "negative variance"
position an indefinite matrix admits.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InsufficientData, KappaOutOfRange, NonFinite, NotIndefinite, ValidationError
from .linalg import SymmetricMatrix, as_symmetric, eigh

DEFAULT_NEAR_SINGULAR = 1e6


@dataclass(frozen=True)
class ReturnSample:
    """T x n matrix of per-period fractional returns (rows are periods)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise DimensionMismatch(f"returns must be a 2-D array, got {v.ndim}-D")
        if not np.all(np.isfinite(v)):
            raise NonFinite("returns contain NaN or Inf")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def periods(self) -> int:
        return self.values.shape[0]

    @property
    def assets(self) -> int:
        return self.values.shape[1]


class Verdict(str, enum.Enum):
    POSITIVE_DEFINITE = "PositiveDefinite"
    INDEFINITE = "Indefinite"
    NEAR_SINGULAR = "NearSingular"


@dataclass(frozen=True)
class CovarianceDiagnosis:
    min_eigenvalue: float
    max_eigenvalue: float
    condition_number: float
    verdict: Verdict
    offending_eigenvector: np.ndarray | None = None

    def summary(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "min_eigenvalue": self.min_eigenvalue,
            "max_eigenvalue": self.max_eigenvalue,
            "condition_number": self.condition_number,
        }


@dataclass(frozen=True)
class ExploitReport:
    position: np.ndarray
    claimed_variance: float
    expected_return: float
    scale: float


def _as_sample(samples) -> ReturnSample:
    return samples if isinstance(samples, ReturnSample) else ReturnSample(samples)


def estimate_sample_covariance(samples) -> SymmetricMatrix:
    """Unbiased sample covariance (divisor ``T - 1``) of a return sample."""
    r = _as_sample(samples).values
    T = r.shape[0]
    if T < 2:
        raise InsufficientData(f"need at least 2 periods, got {T}")
    centred = r - r.mean(axis=0)
    return SymmetricMatrix(centred.T @ centred / (T - 1), symmetrize=True)


def ewma_weights(periods: int, halflife: float) -> np.ndarray:
    """Normalised weights ``2**(-lag/halflife)``, oldest row first, newest lag 0."""
    lags = np.arange(periods - 1, -1, -1, dtype=float)
    w = np.exp2(-lags / halflife)
    return w / w.sum()


def estimate_per_entry_ewma(samples, halflives) -> SymmetricMatrix:
    """Covariance whose every entry is an EWMA co-moment with its own halflife.

    Entry ``(i, j)`` is the weighted covariance of assets ``i`` and ``j``
    using weights ``2**(-lag / halflives[i, j])`` for both the means and the
    co-moment. With all halflives equal this is an ordinary EWMA covariance
    and is PSD; with mismatched halflives the result is frequently
    indefinite.
    """
    r = _as_sample(samples).values
    T, n = r.shape
    if T < 2:
        raise InsufficientData(f"need at least 2 periods, got {T}")
    h = np.array(halflives, dtype=float)
    if h.ndim == 0:
        h = np.full((n, n), float(h))
    if h.shape != (n, n):
        raise DimensionMismatch(f"halflives must be {n}x{n}, got {h.shape}")
    if not np.array_equal(h, h.T):
        raise ValidationError("halflives must be symmetric")
    if not np.all(h > 0):
        raise ValidationError("halflives must be positive")

    out = np.empty((n, n))
    cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}
    for i in range(n):
        for j in range(i, n):
            hl = float(h[i, j])
            if hl not in cache:
                w = ewma_weights(T, hl)
                cache[hl] = (w, w @ r)
            w, mean = cache[hl]
            out[i, j] = out[j, i] = w @ ((r[:, i] - mean[i]) * (r[:, j] - mean[j]))
    return SymmetricMatrix(out)


def diagnose(Q, near_singular_threshold: float = DEFAULT_NEAR_SINGULAR) -> CovarianceDiagnosis:
    """Classify a covariance estimate by its spectrum.

    ``Indefinite`` when the smallest eigenvalue is negative (the eigenvector
    is reported), ``NearSingular`` when the condition number exceeds
    ``near_singular_threshold`` (or is infinite), else ``PositiveDefinite``.
    """
    dec = eigh(Q)
    lam_max = float(dec.eigenvalues[0])
    lam_min = float(dec.eigenvalues[-1])
    cond = lam_max / lam_min if lam_min > 0 else float("inf")
    if lam_min < 0:
        return CovarianceDiagnosis(lam_min, lam_max, cond, Verdict.INDEFINITE, dec.eigenvectors[:, -1].copy())
    if cond > near_singular_threshold:
        return CovarianceDiagnosis(lam_min, lam_max, cond, Verdict.NEAR_SINGULAR)
    return CovarianceDiagnosis(lam_min, lam_max, cond, Verdict.POSITIVE_DEFINITE)


def demonstrate_exploit(Q, mu, risk_budget: float, tau: float) -> ExploitReport:
    """Build ``x = sign(mu . v) * tau * v`` along the most negative eigenvector ``v``.

    The position claims variance ``tau**2 * lambda < 0``, inside any risk
    budget, while its expected return ``tau * |mu . v|`` grows without
    bound in ``tau``. The claim is reported through that identity rather
    than by evaluating ``x' Q x``, which agrees to rounding but loses a few
    ulps at large ``tau``.
    """
    if tau <= 0:
        raise ValidationError("tau must be positive")
    if risk_budget < 0:
        raise ValidationError("risk budget must be nonnegative")
    Q = as_symmetric(Q)
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (Q.n,):
        raise DimensionMismatch(f"mu has shape {mu.shape}, expected ({Q.n},)")
    diag = diagnose(Q)
    if diag.verdict is not Verdict.INDEFINITE:
        raise NotIndefinite(f"smallest eigenvalue {diag.min_eigenvalue:.3g} is not negative")
    v = diag.offending_eigenvector
    sign = 1.0 if mu @ v > 0 else -1.0
    x = sign * tau * v
    return ExploitReport(
        position=x,
        claimed_variance=float(tau * tau * diag.min_eigenvalue),
        expected_return=float(mu @ x),
        scale=float(tau),
    )


def shrink(Q, kappa: float) -> SymmetricMatrix:
    """Convex blend ``kappa * Q + (1 - kappa) * I``.

    Eigenvectors are unchanged and each eigenvalue maps to
    ``(1 - kappa) + kappa * lambda``.
    """
    if not 0.0 <= kappa <= 1.0:
        raise KappaOutOfRange(f"kappa must lie in [0, 1], got {kappa}")
    Q = as_symmetric(Q)
    return SymmetricMatrix(kappa * Q.entries + (1.0 - kappa) * np.eye(Q.n))


def clip_eigenvalues(Q, floor: float) -> SymmetricMatrix:
    """Raise every eigenvalue below ``floor`` to ``floor``, keeping eigenvectors.

    Matrices whose spectrum already sits above ``floor`` are returned as is.
    """
    if not floor >= 0:
        raise ValidationError(f"floor must be nonnegative, got {floor}")
    Q = as_symmetric(Q)
    dec = eigh(Q)
    if dec.eigenvalues[-1] >= floor:
        return Q
    lam = np.maximum(dec.eigenvalues, floor)
    v = dec.eigenvectors
    return SymmetricMatrix((v * lam) @ v.T, symmetrize=True)
