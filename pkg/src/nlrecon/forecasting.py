"""Baseline one-step forecasters and the residual bootstrap.

A forecaster maps the current observation vector to a prediction of the next
one. Anything with ``fit(x, y)`` and ``predict(points)`` plugs into the study
harness; two reference models ship here.
"""

from __future__ import annotations

import warnings

import numpy as np

__all__ = [
    "PersistenceForecaster",
    "LinearARForecaster",
    "fit_forecaster",
    "bootstrap_predictive",
    "FORECASTERS",
]


class PersistenceForecaster:
    """Predicts that tomorrow equals today."""

    name = "persistence"

    def fit(self, x: np.ndarray, y: np.ndarray):
        return self

    def predict(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return points.copy()


class LinearARForecaster:
    """Per-coordinate least squares of ``z^{t+1}_j`` on ``z^t_j`` with intercept.

    A coordinate whose sample variance is numerically zero would make the
    normal equations singular; it falls back to persistence (slope 1,
    intercept 0) with a warning.
    """

    name = "linear-ar"

    def __init__(self):
        self.slope: np.ndarray | None = None
        self.intercept: np.ndarray | None = None

    def fit(self, x: np.ndarray, y: np.ndarray):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape != y.shape or x.ndim != 2 or x.shape[0] < 2:
            raise ValueError("need matching (T, n) training matrices with T >= 2")
        x_mean = x.mean(axis=0)
        y_mean = y.mean(axis=0)
        x_centered = x - x_mean
        var = np.einsum("ij,ij->j", x_centered, x_centered)
        cov = np.einsum("ij,ij->j", x_centered, y - y_mean)
        scale = np.einsum("ij,ij->j", x, x)
        degenerate = var <= 1e-14 * np.maximum(1.0, scale)
        if np.any(degenerate):
            warnings.warn(
                "constant training coordinate(s) "
                f"{np.flatnonzero(degenerate).tolist()}; falling back to persistence there",
                stacklevel=2,
            )
        slope = np.where(degenerate, 1.0, cov / np.where(degenerate, 1.0, var))
        intercept = np.where(degenerate, 0.0, y_mean - slope * x_mean)
        self.slope = slope
        self.intercept = intercept
        return self

    def predict(self, points: np.ndarray) -> np.ndarray:
        if self.slope is None:
            raise ValueError("forecaster is not fitted")
        points = np.asarray(points, dtype=float)
        return points * self.slope + self.intercept


FORECASTERS = {
    "persistence": PersistenceForecaster,
    "linear-ar": LinearARForecaster,
}


def fit_forecaster(x_train: np.ndarray, y_train: np.ndarray, forecaster="linear-ar"):
    """Fit a forecaster on aligned one-step training pairs.

    ``forecaster`` is either a registry name (``"persistence"``,
    ``"linear-ar"``) or any object implementing ``fit``/``predict``, which is
    fitted and returned as-is.
    """
    if isinstance(forecaster, str):
        try:
            model = FORECASTERS[forecaster]()
        except KeyError:
            raise LookupError(
                f"unknown forecaster {forecaster!r}; available: {', '.join(sorted(FORECASTERS))}"
            ) from None
    else:
        if not (hasattr(forecaster, "fit") and hasattr(forecaster, "predict")):
            raise ValueError("forecaster object must implement fit(x, y) and predict(points)")
        model = forecaster
    return model.fit(np.asarray(x_train, dtype=float), np.asarray(y_train, dtype=float))


def bootstrap_predictive(
    model,
    x_cal: np.ndarray,
    y_cal: np.ndarray,
    z_t: np.ndarray,
    n_atoms: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Predictive sample for the next step via joint residual resampling.

    One-step residual vectors are computed on the calibration pairs and
    resampled whole (uniformly, with replacement) around the point forecast
    of ``z_t``, preserving cross-coordinate dependence.

    Returns:
        Array of shape ``(n_atoms, n)`` of raw predictive atoms.
    """
    if n_atoms < 2:
        raise ValueError("need at least 2 atoms for a predictive sample")
    x_cal = np.asarray(x_cal, dtype=float)
    y_cal = np.asarray(y_cal, dtype=float)
    if x_cal.shape != y_cal.shape or x_cal.ndim != 2 or x_cal.shape[0] < 1:
        raise ValueError("need matching (T, n) calibration matrices with T >= 1")
    residuals = y_cal - model.predict(x_cal)
    point = model.predict(np.asarray(z_t, dtype=float)[None, :])[0]
    picks = rng.integers(0, residuals.shape[0], size=n_atoms)
    return point + residuals[picks]
