"""Gradient-boosted binary trees on second-order logistic loss.

Each round fits one regression tree to the weighted gradient/hessian pair
(g = s(p - y), h = s p (1 - p)) with exact greedy split search over midpoint
thresholds.  Leaf scores are the penalized Newton step -G/(H + lambda),
stored raw; the learning rate is applied when scores accumulate.
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
    weighted_logloss,
)

log = logging.getLogger(__name__)

LEAF = -1


@dataclass(frozen=True)
class Tree:
    """Flat node arrays, preorder, node 0 is the root; LEAF marks leaves."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def __post_init__(self):
        casts = {"feature": np.int64, "threshold": np.float64,
                 "left": np.int64, "right": np.int64, "value": np.float64}
        n = None
        for name, dtype in casts.items():
            arr = np.array(getattr(self, name), dtype=dtype)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
            if n is None:
                n = arr.size
            elif arr.size != n:
                raise LengthMismatchError("tree node arrays must be equal-length")
        if n == 0:
            raise LengthMismatchError("a tree needs at least one node")

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def depth(self) -> int:
        def walk(node, d):
            if self.feature[node] == LEAF:
                return d
            return max(walk(self.left[node], d + 1),
                       walk(self.right[node], d + 1))
        return walk(0, 0)

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Raw leaf score per row; splits route x < threshold to the left."""
        at = np.zeros(X.shape[0], dtype=np.int64)
        out = np.empty(X.shape[0])
        pending = np.arange(X.shape[0])
        while pending.size:
            nodes = at[pending]
            leafy = self.feature[nodes] == LEAF
            done = pending[leafy]
            out[done] = self.value[at[done]]
            pending = pending[~leafy]
            nodes = at[pending]
            go_left = X[pending, self.feature[nodes]] < self.threshold[nodes]
            at[pending] = np.where(go_left, self.left[nodes], self.right[nodes])
        return out

    def to_dict(self) -> dict:
        return {"feature": self.feature.tolist(),
                "threshold": self.threshold.tolist(),
                "left": self.left.tolist(),
                "right": self.right.tolist(),
                "value": self.value.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> "Tree":
        return cls(feature=payload["feature"], threshold=payload["threshold"],
                   left=payload["left"], right=payload["right"],
                   value=payload["value"])


class _TreeBuilder:
    def __init__(self, X, g, h, max_depth, leaf_penalty, min_child_count):
        self.X = X
        self.g = g
        self.h = h
        self.max_depth = max_depth
        self.leaf_penalty = leaf_penalty
        self.min_child_count = min_child_count
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.value = []

    def build(self) -> Tree:
        self._grow(np.arange(self.X.shape[0]), 0)
        return Tree(feature=self.feature, threshold=self.threshold,
                    left=self.left, right=self.right, value=self.value)

    def _new_node(self, score) -> int:
        node = len(self.feature)
        self.feature.append(LEAF)
        self.threshold.append(np.nan)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(score)
        return node

    def _grow(self, idx, depth) -> int:
        G = float(self.g[idx].sum())
        H = float(self.h[idx].sum())
        node = self._new_node(-G / (H + self.leaf_penalty))
        if depth >= self.max_depth or idx.size < max(2, self.min_child_count):
            return node
        split = self._best_split(idx, G, H)
        if split is None:
            return node
        feat, thr = split
        mask = self.X[idx, feat] < thr
        self.feature[node] = feat
        self.threshold[node] = thr
        self.left[node] = self._grow(idx[mask], depth + 1)
        self.right[node] = self._grow(idx[~mask], depth + 1)
        return node

    def _best_split(self, idx, G, H):
        """Highest-gain (feature, midpoint); ties go to the lowest feature
        index, then the lowest threshold."""
        Xn = self.X[idx]
        m, d = Xn.shape
        order = np.argsort(Xn, axis=0, kind="stable")
        xs = np.take_along_axis(Xn, order, axis=0)
        gl = np.cumsum(self.g[idx][order], axis=0)[:-1]
        hl = np.cumsum(self.h[idx][order], axis=0)[:-1]
        lam = self.leaf_penalty
        gain = 0.5 * (gl**2 / (hl + lam) + (G - gl) ** 2 / (H - hl + lam)
                      - G**2 / (H + lam))
        valid = xs[1:] > xs[:-1]
        if self.min_child_count > 1:
            counts = np.arange(1, m)
            valid &= ((counts >= self.min_child_count)
                      & (m - counts >= self.min_child_count))[:, None]
        gain = np.where(valid, gain, -np.inf)
        flat = np.ascontiguousarray(gain.T)
        best = int(np.argmax(flat))
        feat, pos = divmod(best, m - 1)
        if not flat[feat, pos] > 0.0:
            return None
        return feat, float(0.5 * (xs[pos, feat] + xs[pos + 1, feat]))


@dataclass(frozen=True)
class GbtModel:
    trees: tuple
    base_score: float
    learning_rate: float
    max_depth: int
    leaf_penalty: float
    min_child_count: int
    n_features: int
    loss_history: tuple

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "loss_history",
                           tuple(float(v) for v in self.loss_history))

    def to_dict(self) -> dict:
        return {
            "base_score": float(self.base_score),
            "learning_rate": float(self.learning_rate),
            "max_depth": int(self.max_depth),
            "leaf_penalty": float(self.leaf_penalty),
            "min_child_count": int(self.min_child_count),
            "n_features": int(self.n_features),
            "loss_history": list(self.loss_history),
            "trees": [tree.to_dict() for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "GbtModel":
        return cls(
            trees=tuple(Tree.from_dict(t) for t in payload["trees"]),
            base_score=float(payload["base_score"]),
            learning_rate=float(payload["learning_rate"]),
            max_depth=int(payload["max_depth"]),
            leaf_penalty=float(payload["leaf_penalty"]),
            min_child_count=int(payload["min_child_count"]),
            n_features=int(payload["n_features"]),
            loss_history=tuple(payload["loss_history"]),
        )


def train_gbt(X, y, weights: ClassWeights | None = None, rounds: int = 100,
              learning_rate: float = 0.1, max_depth: int = 30,
              leaf_penalty: float = 1.0, min_child_count: int = 1) -> GbtModel:
    """Boost `rounds` trees; loss_history[k] is the weighted training
    logloss after k rounds (entry 0 is the prior-only loss)."""
    X, y = check_training_inputs(X, y)
    if rounds < 0 or max_depth < 1 or min_child_count < 1:
        raise ValueError("rounds must be >= 0, max_depth and "
                         "min_child_count >= 1")
    if weights is None:
        weights = UNIT_WEIGHTS
    s = weights.per_sample(y)

    base = weighted_log_odds(y, s)
    z = np.full(X.shape[0], base)
    trees = []
    history = [weighted_logloss(z, y, s)]
    for r in range(rounds):
        p = expit(z)
        g = s * (p - y)
        h = s * p * (1.0 - p)
        tree = _TreeBuilder(X, g, h, max_depth, leaf_penalty,
                            min_child_count).build()
        trees.append(tree)
        z = z + learning_rate * tree.predict(X)
        history.append(weighted_logloss(z, y, s))
        log.debug("round %d: %d nodes, loss %.6f", r, tree.n_nodes, history[-1])

    return GbtModel(trees=tuple(trees), base_score=base,
                    learning_rate=float(learning_rate), max_depth=int(max_depth),
                    leaf_penalty=float(leaf_penalty),
                    min_child_count=int(min_child_count),
                    n_features=X.shape[1], loss_history=tuple(history))


def _forest_arrays(model: GbtModel):
    """All trees concatenated into one node table, cached on the model.

    Child indices are shifted by each tree's offset so a single gather
    routes every (row, tree) pair at once; scoring a batch then costs a
    handful of array operations per tree level instead of a python loop
    over trees.
    """
    cached = model.__dict__.get("_forest")
    if cached is None:
        sizes = [tree.n_nodes for tree in model.trees]
        roots = np.concatenate([[0], np.cumsum(sizes[:-1])]).astype(np.int64)
        offsets = np.repeat(roots, sizes)
        cached = {
            "roots": roots,
            "feature": np.concatenate([t.feature for t in model.trees]),
            "threshold": np.concatenate([t.threshold for t in model.trees]),
            "left": np.concatenate([t.left for t in model.trees]) + offsets,
            "right": np.concatenate([t.right for t in model.trees]) + offsets,
            "value": np.concatenate([t.value for t in model.trees]),
        }
        object.__setattr__(model, "_forest", cached)
    return cached


def predict_gbt(model: GbtModel, X):
    """Probability of class 1; a 1-d input is one sample, 2-d is a batch."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise LengthMismatchError(
            f"expected {model.n_features} features, got shape {X.shape}")
    n = X.shape[0]
    z = np.full(n, model.base_score)
    if model.trees:
        forest = _forest_arrays(model)
        rows = np.arange(n)[:, None]
        at = np.broadcast_to(forest["roots"], (n, forest["roots"].size)).copy()
        feat = forest["feature"][at]
        interior = feat != LEAF
        while interior.any():
            x = X[rows, np.where(interior, feat, 0)]
            go_left = x < forest["threshold"][at]
            step = np.where(go_left, forest["left"][at], forest["right"][at])
            at = np.where(interior, step, at)
            feat = forest["feature"][at]
            interior = feat != LEAF
        z += model.learning_rate * forest["value"][at].sum(axis=1)
    p = expit(z)
    return float(p[0]) if single else p
