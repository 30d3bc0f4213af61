"""Dense symmetric linear algebra.

Eigendecomposition uses cyclic Jacobi rotations, which are deterministic and
give small eigenvalues to high relative accuracy. Cholesky factorization and
triangular solves are delegated to LAPACK through numpy/scipy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .errors import DimensionMismatch, NoConvergence, NonFinite, NotPositiveDefinite, NotSymmetric

_EPS = np.finfo(float).eps
_MAX_SWEEPS = 100
# Components within this relative band of the largest magnitude count as ties.
_SIGN_TIE = 1e-12


class SymmetricMatrix:
    """Immutable dense n x n real symmetric matrix.

    Parameters
    ----------
    values : array_like
        Square matrix of finite reals.
    symmetrize : bool, default False
        If True, replace ``values`` with ``(values + values.T) / 2``. Otherwise
        any asymmetry, however small, is rejected.
    """

    __slots__ = ("_a",)

    def __init__(self, values, *, symmetrize: bool = False):
        a = np.array(values, dtype=float, copy=True)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise DimensionMismatch(f"expected a non-empty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise NonFinite("matrix contains NaN or Inf entries")
        if symmetrize:
            a = 0.5 * (a + a.T)
        elif not np.array_equal(a, a.T):
            raise NotSymmetric("matrix is not exactly symmetric; pass symmetrize=True to average it")
        a.setflags(write=False)
        self._a = a

    @property
    def n(self) -> int:
        return self._a.shape[0]

    @property
    def entries(self) -> np.ndarray:
        """Read-only view of the underlying array."""
        return self._a

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._a.copy()
        return self._a.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, SymmetricMatrix):
            return NotImplemented
        return np.array_equal(self._a, other._a)

    __hash__ = None

    def __repr__(self) -> str:
        return f"SymmetricMatrix({self._a.tolist()!r})"


def as_symmetric(values) -> SymmetricMatrix:
    if isinstance(values, SymmetricMatrix):
        return values
    return SymmetricMatrix(values)


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues in nonincreasing order; column ``i`` of ``eigenvectors`` pairs with ``eigenvalues[i]``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


@dataclass(frozen=True)
class CholeskyFactor:
    L: np.ndarray


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairings of a round-robin tournament; every index pair appears once per sweep."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p, q = [], []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                p.append(min(a, b))
                q.append(max(a, b))
        rounds.append((np.array(p, dtype=np.intp), np.array(q, dtype=np.intp)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _jacobi_sweeps(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Rotations within a round act on disjoint index pairs, so they commute
    # and can be applied together.
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return a[0].copy(), v
    floor = 1e-300 + 1e-18 * np.linalg.norm(a)
    rounds = _round_robin(n)
    for _ in range(_MAX_SWEEPS):
        rotated = False
        for p, q in rounds:
            apq = a[p, q]
            app = a[p, p]
            aqq = a[q, q]
            active = (np.abs(apq) > floor) & (np.abs(apq) > _EPS * np.sqrt(np.abs(app * aqq)))
            if not active.any():
                a[p, q] = 0.0
                a[q, p] = 0.0
                continue
            rotated = True
            p_act, q_act = p[~active], q[~active]
            a[p_act, q_act] = 0.0
            a[q_act, p_act] = 0.0
            p, q, apq, app, aqq = p[active], q[active], apq[active], app[active], aqq[active]

            theta = (aqq - app) / (2.0 * apq)
            big = np.abs(theta) > 1e150
            safe = np.where(big, 1.0, theta)
            t = np.where(
                big,
                0.5 / np.where(big, theta, 1.0),
                np.copysign(1.0, safe) / (np.abs(safe) + np.sqrt(1.0 + safe * safe)),
            )
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c

            col_p = a[:, p]
            col_q = a[:, q]
            a[:, p] = c * col_p - s * col_q
            a[:, q] = s * col_p + c * col_q
            row_p = a[p, :]
            row_q = a[q, :]
            a[p, :] = c[:, None] * row_p - s[:, None] * row_q
            a[q, :] = s[:, None] * row_p + c[:, None] * row_q
            a[p, p] = app - t * apq
            a[q, q] = aqq + t * apq
            a[p, q] = 0.0
            a[q, p] = 0.0

            vp = v[:, p]
            vq = v[:, q]
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
        if not rotated:
            return np.diag(a).copy(), v
    raise NoConvergence(f"Jacobi iteration did not converge in {_MAX_SWEEPS} sweeps")


def _fix_signs(v: np.ndarray) -> None:
    for j in range(v.shape[1]):
        mags = np.abs(v[:, j])
        top = mags.max()
        idx = int(np.flatnonzero(mags >= top * (1.0 - _SIGN_TIE))[0])
        if v[idx, j] < 0:
            v[:, j] = -v[:, j]


def eigh(S) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.

    Index pairs are visited in a fixed round-robin order.

    Eigenvalues are returned in nonincreasing order. Each eigenvector is
    normalised so that its largest-magnitude component is positive (lowest
    index wins ties), making the output reproducible.

    Raises
    ------
    NonFinite
        If the input contains NaN or Inf.
    NoConvergence
        If the sweep limit is reached.
    """
    S = as_symmetric(S)
    w, v = _jacobi_sweeps(np.array(S.entries, dtype=float))
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = np.ascontiguousarray(v[:, order])
    _fix_signs(v)
    w.setflags(write=False)
    v.setflags(write=False)
    return EigenDecomposition(w, v)


def cholesky(S) -> CholeskyFactor:
    """Lower Cholesky factor ``L`` with ``L @ L.T == S``.

    Raises ``NotPositiveDefinite`` when a nonpositive pivot is met; callers
    should then run a covariance diagnosis.
    """
    S = as_symmetric(S)
    try:
        L = np.linalg.cholesky(S.entries)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("matrix is not positive definite") from exc
    if not np.all(np.diag(L) > 0) or not np.all(np.isfinite(L)):
        raise NotPositiveDefinite("matrix is not positive definite")
    L.setflags(write=False)
    return CholeskyFactor(L)


def solve_spd(S, b, factor: CholeskyFactor | None = None) -> np.ndarray:
    """Solve ``S y = b`` for symmetric positive definite ``S``.

    One step of iterative refinement is applied after the Cholesky solve.
    """
    S = as_symmetric(S)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != S.n:
        raise DimensionMismatch(f"rhs has length {b.shape[0]}, matrix is {S.n}x{S.n}")
    L = (factor or cholesky(S)).L
    y = sla.cho_solve((L, True), b)
    y = y + sla.cho_solve((L, True), b - S.entries @ y)
    return y


def condition_number(S) -> float:
    """Spectral condition number ``lambda_max / lambda_min`` of an SPD matrix."""
    w = eigh(S).eigenvalues
    if w[-1] <= 0:
        raise NotPositiveDefinite(f"smallest eigenvalue {w[-1]:.3g} is not positive")
    return float(w[0] / w[-1])
