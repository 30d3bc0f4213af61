"""Small deterministic data sets used by the demonstrations and tests."""

from __future__ import annotations

import datetime as dt
from importlib import resources

import numpy as np

from .dataio import ReturnSeries, parse_returns
from .covariance import ReturnSample

# Covariance drawn as an ellipse in the classic mean-variance picture.
FIG1_Q = np.array([[0.2, 0.1], [0.1, 0.2]])
INDEFINITE_Q = np.array([[1.0, 2.0], [2.0, 1.0]])

SYNTHETIC_RETURNS_FILE = "synthetic_returns.csv"


def ewma_trap_halflives(n: int = 3, diagonal: float = 5.0, off_diagonal: float = 500.0) -> np.ndarray:
    h = np.full((n, n), off_diagonal)
    np.fill_diagonal(h, diagonal)
    return h


def ewma_trap_returns(seed: int = 0, periods: int = 400) -> np.ndarray:
    """Three assets whose correlation swings between +0.9 and -0.9.

    Volatility drops fourfold over the last 40 periods. Fast variance
    estimates see only the quiet tail while slow covariance estimates still
    remember the loud past, so the per-entry EWMA matrix comes out
    indefinite.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(periods)
    rho = 0.9 * np.cos(2 * np.pi * t / 200)
    factor = rng.standard_normal(periods)
    noise = rng.standard_normal((periods, 3))
    loading = np.stack([np.ones(periods), np.sign(rho), -np.ones(periods)], axis=1)
    r = np.sqrt(np.abs(rho))[:, None] * factor[:, None] * loading + np.sqrt(1 - np.abs(rho))[:, None] * noise
    vol = np.where(t < periods - 40, 0.02, 0.005)
    return r * vol[:, None]


def ill_conditioned_q() -> np.ndarray:
    """3x3 covariance with eigenvalues (0.04, 0.01, 4e-9) and fixed eigenvectors."""
    v = np.array(
        [
            [1.0, 1.0, 1.0],
            [1.0, -1.0, 0.0],
            [1.0, 1.0, -2.0],
        ]
    )
    v = v / np.linalg.norm(v, axis=1, keepdims=True)
    lam = np.array([0.04, 0.01, 4e-9])
    q = (v.T * lam) @ v
    return 0.5 * (q + q.T)


def synthetic_returns(seed: int = 2013, periods: int = 500) -> ReturnSeries:
    """Two correlated assets whose drift is small next to the per-period noise."""
    rng = np.random.default_rng(seed)
    vol = np.array([0.020, 0.030])
    corr = np.array([[1.0, 0.3], [0.3, 1.0]])
    cov = corr * np.outer(vol, vol)
    drift = np.array([0.004, 0.003])
    values = drift + rng.multivariate_normal(np.zeros(2), cov, size=periods, method="cholesky")
    start = dt.date(2020, 1, 1)
    dates = [(start + dt.timedelta(days=i)).isoformat() for i in range(periods)]
    return ReturnSeries(dates, ["asset_a", "asset_b"], ReturnSample(values))


def load_synthetic_returns() -> ReturnSeries:
    """The bundled two-asset return series (a frozen copy of :func:`synthetic_returns`)."""
    text = resources.files("sevensins.data").joinpath(SYNTHETIC_RETURNS_FILE).read_text(encoding="utf-8")
    return parse_returns(text, SYNTHETIC_RETURNS_FILE)
