"""L1-penalized logistic regression fit by cyclic coordinate descent.

Features are standardized internally with training-set weighted statistics,
so the penalty acts on comparable scales and predictions are invariant to
affine rescaling of any input column.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ppgscreen.errors import LengthMismatchError
from ppgscreen.models.common import (
    UNIT_WEIGHTS,
    ClassWeights,
    check_training_inputs,
    weighted_log_odds,
)

log = logging.getLogger(__name__)


def soft_threshold(value: float, threshold: float) -> float:
    if value > threshold:
        return value - threshold
    if value < -threshold:
        return value + threshold
    return 0.0


@dataclass(frozen=True)
class LogRegModel:
    """Fitted model; weights live in standardized feature space."""

    weights: np.ndarray
    intercept: float
    mean: np.ndarray
    std: np.ndarray
    penalty: float
    n_sweeps: int
    converged: bool

    def __post_init__(self):
        for name in ("weights", "mean", "std"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not (self.weights.shape == self.mean.shape == self.std.shape
                and self.weights.ndim == 1):
            raise LengthMismatchError("weights, mean and std must be equal-length")

    @property
    def n_features(self) -> int:
        return self.weights.size

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "intercept": float(self.intercept),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "penalty": float(self.penalty),
            "n_sweeps": int(self.n_sweeps),
            "converged": bool(self.converged),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "LogRegModel":
        return cls(
            weights=np.array(payload["weights"], dtype=np.float64),
            intercept=float(payload["intercept"]),
            mean=np.array(payload["mean"], dtype=np.float64),
            std=np.array(payload["std"], dtype=np.float64),
            penalty=float(payload["penalty"]),
            n_sweeps=int(payload["n_sweeps"]),
            converged=bool(payload["converged"]),
        )


def train_logreg(X, y, weights: ClassWeights | None = None, penalty: float = 1.0,
                 tol: float = 1e-6, max_sweeps: int = 1000) -> LogRegModel:
    """Minimize sum_i s_i logloss_i + penalty * ||w||_1, intercept free.

    Cyclic coordinate descent; each coordinate takes a soft-thresholded step
    against the curvature bound h_j = 0.25 * sum_i s_i x_ij^2, so every
    update decreases the objective and the fixed point satisfies the exact
    subgradient condition.  Stops when the largest update in a sweep drops
    below tol, or after max_sweeps.
    """
    X, y = check_training_inputs(X, y)
    if penalty < 0.0:
        raise ValueError(f"penalty must be nonnegative, got {penalty}")
    if weights is None:
        weights = UNIT_WEIGHTS
    s = weights.per_sample(y)

    total = float(s.sum())
    mean = (s @ X) / total
    std = np.sqrt((s @ (X - mean) ** 2) / total)
    constant = std == 0.0
    if constant.any():
        log.debug("constant feature columns pinned to zero weight: %s",
                  np.flatnonzero(constant).tolist())
    std = np.where(constant, 1.0, std)
    Xs = (X - mean) / std

    n, d = Xs.shape
    curvature = 0.25 * (s @ Xs**2)
    curvature_b = 0.25 * total
    w = np.zeros(d)
    b = weighted_log_odds(y, s)
    z = np.full(n, b)

    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        p = expit(z)
        step_b = -float(s @ (p - y)) / curvature_b
        b += step_b
        z += step_b
        largest = abs(step_b)
        for j in range(d):
            if curvature[j] == 0.0:
                continue
            p = expit(z)
            grad = float((s * (p - y)) @ Xs[:, j])
            updated = soft_threshold(w[j] * curvature[j] - grad, penalty) \
                / curvature[j]
            step = updated - w[j]
            if step != 0.0:
                w[j] = updated
                z += step * Xs[:, j]
                largest = max(largest, abs(step))
        if largest < tol:
            converged = True
            break
    if not converged:
        log.warning("coordinate descent hit the sweep cap (%d) without "
                    "meeting tol=%g", max_sweeps, tol)

    return LogRegModel(weights=w, intercept=float(b), mean=mean, std=std,
                       penalty=float(penalty), n_sweeps=sweeps,
                       converged=converged)


def predict_logreg(model: LogRegModel, X):
    """Probability of class 1; a 1-d input is one sample, 2-d is a batch."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise LengthMismatchError(
            f"expected {model.n_features} features, got shape {X.shape}")
    z = ((X - model.mean) / model.std) @ model.weights + model.intercept
    p = expit(z)
    return float(p[0]) if single else p


def logreg_objective(model: LogRegModel, X, y,
                     weights: ClassWeights | None = None) -> float:
    """Penalized training objective of a fitted model, standardized space."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=np.float64)
    s = (weights or UNIT_WEIGHTS).per_sample(y)
    z = ((X - model.mean) / model.std) @ model.weights + model.intercept
    loss = float(s @ np.logaddexp(0.0, (1.0 - 2.0 * y) * z))
    return loss + model.penalty * float(np.abs(model.weights).sum())
