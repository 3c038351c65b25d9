"""Shared pieces for the two classifiers: class weights and input checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ppgscreen.errors import (
    EmptyClassError,
    LengthMismatchError,
    NonFiniteError,
    SchemaError,
    SingleClassError,
)


@dataclass(frozen=True)
class ClassWeights:
    """Per-class sample weights; balanced weighting gives w_c = N / (2 N_c)."""

    w0: float
    w1: float

    def __post_init__(self):
        if not (self.w0 > 0.0 and self.w1 > 0.0):
            raise EmptyClassError(
                f"class weights must be positive, got ({self.w0}, {self.w1})")

    def per_sample(self, y: np.ndarray) -> np.ndarray:
        return np.where(y > 0.5, self.w1, self.w0)


UNIT_WEIGHTS = ClassWeights(1.0, 1.0)


def balanced_weights(n0: int, n1: int) -> ClassWeights:
    """Inverse-frequency weights from the two class counts."""
    if n0 < 1 or n1 < 1:
        raise EmptyClassError(
            f"both classes need at least one sample, got n0={n0}, n1={n1}")
    total = float(n0 + n1)
    return ClassWeights(total / (2.0 * n0), total / (2.0 * n1))


def check_training_inputs(X, y) -> tuple[np.ndarray, np.ndarray]:
    """Validate and normalize a (samples, labels) pair for training."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] == 0:
        raise LengthMismatchError(
            f"expected a non-empty 2-d sample matrix, got shape {X.shape}")
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (X.shape[0],):
        raise LengthMismatchError(
            f"{X.shape[0]} samples but label shape {y.shape}")
    if not np.isfinite(X).all():
        raise NonFiniteError("training matrix contains non-finite values")
    labels = set(np.unique(y).tolist())
    if not labels <= {0.0, 1.0}:
        raise SchemaError(f"labels must be 0 or 1, got {sorted(labels)}")
    if len(labels) < 2:
        raise SingleClassError("training data contains a single class")
    return X, y


def weighted_log_odds(y: np.ndarray, s: np.ndarray) -> float:
    """log of the weighted positive/negative mass ratio (prior log-odds)."""
    pos = float(np.sum(s * y))
    neg = float(np.sum(s * (1.0 - y)))
    return float(np.log(pos / neg))


def weighted_logloss(z: np.ndarray, y: np.ndarray, s: np.ndarray) -> float:
    """Total weighted logistic loss at margins z."""
    return float(s @ np.logaddexp(0.0, (1.0 - 2.0 * y) * z))
