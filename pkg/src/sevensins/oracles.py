"""Independent reference solvers for the cost-penalised problem.

Neither routine uses the lifted formulation, so they can check it.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import CostsMissing, ValidationError
from .models import MeanVarianceProblem, objective_nonsmooth


def _face_maximiser(Q, sigma2, direction, fixed, x0):
    """Maximise ``direction . x`` on the ellipsoid with ``x[fixed] = x0[fixed]``."""
    n = Q.shape[0]
    free = np.setdiff1d(np.arange(n), fixed)
    x = np.array(x0, dtype=float)
    if free.shape[0] == 0:
        return x if x @ Q @ x <= sigma2 else None
    Qff = Q[np.ix_(free, free)]
    Qfk = Q[np.ix_(free, fixed)]
    xk = x0[fixed]
    centre = -np.linalg.solve(Qff, Qfk @ xk) if fixed.shape[0] else np.zeros(free.shape[0])
    radius2 = sigma2 - xk @ Q[np.ix_(fixed, fixed)] @ xk + centre @ Qff @ centre
    if radius2 < 0:
        return None
    a = direction[free]
    y = np.linalg.solve(Qff, a)
    quad = a @ y
    x[free] = centre + (np.sqrt(radius2) * y / np.sqrt(quad) if quad > 0 else 0.0)
    return x


def kink_enumeration(problem: MeanVarianceProblem) -> tuple[np.ndarray, float]:
    """Exact maximiser of ``mu . x - sum(p |x - x0|)`` over ``x' Q x <= sigma2``.

    Every coordinate is either pinned at its kink ``x0_i`` or moves freely
    with a fixed trade sign; on each of the ``3**n`` faces the objective is
    linear and the maximiser has a closed form. The best candidate, scored
    with the true nonsmooth objective, is the global optimum. Only the
    unconstrained-plus-costs model is supported.
    """
    if problem.costs is None:
        raise CostsMissing("problem has no transaction-cost block")
    if problem.fully_invested or problem.long_only:
        raise ValidationError("kink enumeration supports only the risk constraint")
    Q = problem.Q.entries
    n = problem.n
    p, x0 = problem.costs.p, problem.costs.x0
    best_x, best_val = None, -np.inf
    for pattern in itertools.product((-1, 0, 1), repeat=n):
        pattern = np.array(pattern)
        fixed = np.flatnonzero(pattern == 0)
        direction = problem.mu - p * pattern
        x = _face_maximiser(Q, problem.risk_budget, direction, fixed, x0)
        if x is None:
            continue
        value = objective_nonsmooth(problem, x)
        if value > best_val:
            best_x, best_val = x, value
    if best_x is None:
        raise ValidationError("no face of the problem is feasible")
    return best_x, float(best_val)


def _best_on_grid(problem, pts):
    Q = problem.Q.entries
    pts = pts[np.einsum("ij,jk,ik->i", pts, Q, pts) <= problem.risk_budget]
    if pts.shape[0] == 0:
        return None, -np.inf
    values = pts @ problem.mu - np.abs(pts - problem.costs.x0) @ problem.costs.p
    i = int(np.argmax(values))
    return pts[i], float(values[i])


def _polish_on_faces(problem, x, slack):
    """Best closed-form point on the kink faces consistent with ``x``.

    Coordinates within ``slack`` of their kink may trade either way or sit
    on it; the others keep the trade sign they have at ``x``.
    """
    x0, p = problem.costs.x0, problem.costs.p
    diff = x - x0
    choices = [(-1, 0, 1) if abs(d) <= slack else (int(np.sign(d)),) for d in diff]
    best_x, best_val = x, objective_nonsmooth(problem, x)
    for pattern in itertools.product(*choices):
        pattern = np.array(pattern)
        cand = _face_maximiser(
            problem.Q.entries, problem.risk_budget, problem.mu - p * pattern, np.flatnonzero(pattern == 0), x0
        )
        if cand is None:
            continue
        val = objective_nonsmooth(problem, cand)
        if val > best_val:
            best_x, best_val = cand, val
    return best_x, float(best_val)


def grid_search(
    problem: MeanVarianceProblem,
    step: float | None = None,
    levels: int = 8,
) -> tuple[np.ndarray, float]:
    """Grid over the risk ellipsoid, zoomed local grids, then a face polish.

    The first grid spans the ellipsoid's bounding box: spacing ``step``
    (default ``1e-2``) with one or two assets, 21 points per axis beyond
    that. Each zoom lays a local grid around the incumbent, recentring while
    that improves it before the spacing shrinks. Finally the incumbent's
    trade-sign pattern (with near-kink coordinates left open) selects a few
    kink faces, and the closed-form maximiser on each is scored. Practical up
    to about five assets.
    """
    if problem.costs is None:
        raise CostsMissing("problem has no transaction-cost block")
    if problem.fully_invested or problem.long_only:
        raise ValidationError("grid search supports only the risk constraint")
    n = problem.n
    if n > 5:
        raise ValidationError("grid search is limited to n <= 5")
    Q = problem.Q.entries
    half_width = np.sqrt(problem.risk_budget * np.diag(np.linalg.inv(Q)))
    if n <= 2:
        h = 1e-2 if step is None else step
        axes = [np.arange(-w, w + h, h) for w in half_width]
        offsets, shrink_by = np.arange(-50, 51) / 10.0, 10.0
    else:
        axes = [np.linspace(-w, w, 21) for w in half_width]
        h = float(np.max(half_width)) / 10.0 if step is None else step
        offsets, shrink_by = np.arange(-2.0, 3.0), 2.0
    coarse = h
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    best_x, best_val = _best_on_grid(problem, pts)
    if best_x is None:
        raise ValidationError("grid missed the feasible set; use a smaller step")
    for _ in range(levels):
        # Recentre at this resolution until the incumbent stops improving.
        for _ in range(200):
            local = [c + h * offsets for c in best_x]
            pts = np.stack(np.meshgrid(*local, indexing="ij"), axis=-1).reshape(-1, n)
            x, val = _best_on_grid(problem, pts)
            if not val > best_val:
                break
            best_x, best_val = x, val
        h /= shrink_by
    return _polish_on_faces(problem, best_x, coarse)
