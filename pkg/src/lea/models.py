"""Regression machinery: random-forest and linear regression plus SMAPE.

The forest uses bootstrap-sampled trees with axis-aligned splits chosen by
variance reduction, examining every feature per split by default (the
usual regression-forest setting; a random subset is available as a knob).
Thresholds sit at midpoints between sorted distinct feature values;
ties break toward the lowest feature index, then the smallest threshold,
so fitting is fully deterministic given the seed. Forest predictions are
means of leaf means and are clamped to the label range seen in training
(forests cannot extrapolate); the linear model is the extrapolation
fallback and the storage cost model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

import numpy as np

from .errors import (
    DegenerateDesign,
    DimensionMismatch,
    InsufficientData,
    LeaError,
    LengthMismatch,
)
from .slices import Dtype


class PredictionTarget(Enum):
    ENCODED_SIZE = "encoded_size"
    MEM_SCAN_NS = "mem_scan_ns"
    STORAGE_SCAN_NS = "storage_scan_ns"


@dataclass(frozen=True)
class TrainingSet:
    dtype: Dtype
    target: PredictionTarget
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) float64, finite and >= 0
    feature_layout_id: str

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.float64)
        if feats.ndim != 2 or labels.ndim != 1 or len(feats) != len(labels):
            raise LeaError("features must be (n, d) with one label per row")
        if not np.all(np.isfinite(labels)) or (len(labels) and labels.min() < 0):
            raise LeaError("labels must be finite and non-negative")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class ForestHyper:
    n_trees: int = 100
    max_depth: int = 16
    min_leaf: int = 2
    rng_seed: int = 42
    # features examined per split; None = all (the regression default).
    # Aggressive subsetting starves sparse corners: a split that cannot see
    # cardinality pools tiny dictionary slices with huge ones.
    feature_subset: Optional[int] = None


@dataclass
class Tree:
    # flattened node arrays; feature == -1 marks a leaf
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray


@dataclass
class ForestModel:
    trees: list[Tree]
    n_trees: int
    max_depth: int
    min_leaf: int
    label_min: float
    label_max: float
    feature_dim: int


@dataclass
class LinearModel:
    weights: np.ndarray
    intercept: float
    feature_dim: int


Model = Union[ForestModel, LinearModel]


class _TreeBuilder:
    def __init__(self, X, y, max_depth, min_leaf, n_feats, rng):
        self.X = X
        self.y = y
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.n_feats = n_feats
        self.rng = rng
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.value = []

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def build(self, idx: np.ndarray, depth: int) -> int:
        node = self._new_node()
        y = self.y[idx]
        self.value[node] = float(y.mean())
        if depth >= self.max_depth or len(idx) < 2 * self.min_leaf:
            return node
        total_sum = y.sum()
        total_sq = (y * y).sum()
        total_sse = total_sq - total_sum * total_sum / len(y)
        if total_sse <= 0.0:
            return node
        split = self._best_split(idx, y, total_sse)
        if split is None:
            return node
        f, thr = split
        mask = self.X[idx, f] <= thr
        self.feature[node] = f
        self.threshold[node] = thr
        self.left[node] = self.build(idx[mask], depth + 1)
        self.right[node] = self.build(idx[~mask], depth + 1)
        return node

    def _best_split(self, idx, y, total_sse):
        d = self.X.shape[1]
        if self.n_feats >= d:
            chosen = np.arange(d)
        else:
            chosen = np.sort(self.rng.choice(d, size=self.n_feats, replace=False))
        n = len(idx)
        best = None  # (gain, feature, threshold)
        for f in chosen:
            xs = self.X[idx, f]
            order = np.argsort(xs, kind="stable")
            xs_sorted = xs[order]
            ys_sorted = y[order]
            lo, hi = self.min_leaf, n - self.min_leaf + 1  # split index range
            if lo >= hi:
                continue
            boundaries = np.flatnonzero(xs_sorted[lo:hi] > xs_sorted[lo - 1 : hi - 1]) + lo
            if len(boundaries) == 0:
                continue
            s1 = np.cumsum(ys_sorted)
            s2 = np.cumsum(ys_sorted * ys_sorted)
            nl = boundaries.astype(np.float64)
            sl = s1[boundaries - 1]
            ql = s2[boundaries - 1]
            nr = n - nl
            sr = s1[-1] - sl
            qr = s2[-1] - ql
            sse = (ql - sl * sl / nl) + (qr - sr * sr / nr)
            gains = total_sse - sse
            k = int(np.argmax(gains))  # first max -> smallest threshold
            gain = float(gains[k])
            if gain <= 0.0:
                continue
            if best is None or gain > best[0]:
                b = boundaries[k]
                thr = 0.5 * (xs_sorted[b - 1] + xs_sorted[b])
                # guard against midpoint rounding onto the upper value
                if thr >= xs_sorted[b]:
                    thr = float(xs_sorted[b - 1])
                best = (gain, int(f), float(thr))
        if best is None:
            return None
        return best[1], best[2]

    def finish(self) -> Tree:
        return Tree(
            feature=np.array(self.feature, dtype=np.int32),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int32),
            right=np.array(self.right, dtype=np.int32),
            value=np.array(self.value, dtype=np.float64),
        )


def fit_forest(data: TrainingSet, hyper: ForestHyper = ForestHyper()) -> ForestModel:
    n = len(data)
    if n < 2 * hyper.min_leaf:
        raise InsufficientData(f"need at least {2 * hyper.min_leaf} rows, got {n}")
    d = data.feature_dim
    n_feats = d if hyper.feature_subset is None else max(1, min(d, hyper.feature_subset))
    seeds = np.random.SeedSequence(hyper.rng_seed).spawn(hyper.n_trees)
    trees = []
    for i in range(hyper.n_trees):
        rng = np.random.default_rng(seeds[i])
        boot = rng.integers(0, n, size=n)
        builder = _TreeBuilder(
            data.features, data.labels, hyper.max_depth, hyper.min_leaf, n_feats, rng
        )
        builder.build(boot, 0)
        trees.append(builder.finish())
    return ForestModel(
        trees=trees,
        n_trees=hyper.n_trees,
        max_depth=hyper.max_depth,
        min_leaf=hyper.min_leaf,
        label_min=float(data.labels.min()),
        label_max=float(data.labels.max()),
        feature_dim=d,
    )


def _tree_predict(tree: Tree, X: np.ndarray) -> np.ndarray:
    cur = np.zeros(len(X), dtype=np.int64)
    active = np.flatnonzero(tree.feature[cur] >= 0)
    while len(active):
        nodes = cur[active]
        x = X[active, tree.feature[nodes]]
        go_left = x <= tree.threshold[nodes]
        cur[active] = np.where(go_left, tree.left[nodes], tree.right[nodes])
        active = active[tree.feature[cur[active]] >= 0]
    return tree.value[cur]


def predict_batch(model: Model, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.feature_dim:
        raise DimensionMismatch(
            f"expected {model.feature_dim} features, got {X.shape[1]}"
        )
    if isinstance(model, LinearModel):
        return X @ model.weights + model.intercept
    acc = np.zeros(len(X))
    for tree in model.trees:
        acc += _tree_predict(tree, X)
    return np.clip(acc / model.n_trees, model.label_min, model.label_max)


def predict(model: Model, x) -> float:
    return float(predict_batch(model, np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


RIDGE_DAMPING = 1e-8


def fit_linear(data: TrainingSet) -> LinearModel:
    """Minimizes ||Ax - y||^2 + RIDGE_DAMPING * ||x||^2.

    Solved through the equivalent augmented least-squares system, which is
    the numerically stable form of the damped normal equations and copes
    with rank-deficient designs (constant feature columns are routine).
    """
    n, d = data.features.shape
    if n < d + 1:
        raise InsufficientData(f"need at least {d + 1} rows, got {n}")
    A = np.column_stack([np.ones(n), data.features])
    if not np.all(np.isfinite(A)):
        raise DegenerateDesign("design matrix contains non-finite values")
    aug = np.vstack([A, math.sqrt(RIDGE_DAMPING) * np.eye(d + 1)])
    rhs = np.concatenate([data.labels, np.zeros(d + 1)])
    coef, *_ = np.linalg.lstsq(aug, rhs, rcond=None)
    if not np.all(np.isfinite(coef)):
        raise DegenerateDesign("damped least squares produced non-finite coefficients")
    return LinearModel(weights=coef[1:], intercept=float(coef[0]), feature_dim=d)


def smape(predicted, actual) -> float:
    """Symmetric mean absolute percentage error, in [0, 200]."""
    p = np.asarray(predicted, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if p.shape != a.shape or p.ndim != 1 or len(p) == 0:
        raise LengthMismatch("predicted and actual must be equal-length, non-empty")
    denom = np.abs(p) + np.abs(a)
    terms = np.zeros(len(p))
    nz = denom > 0
    terms[nz] = 200.0 * np.abs(p[nz] - a[nz]) / denom[nz]
    return float(terms.mean())


# ---------------------------------------------------------------------------
# serialization (versioned documents; round-trips are bit-identical)

MODEL_DOC_VERSION = 1


def model_to_doc(model: Model) -> dict:
    if isinstance(model, LinearModel):
        return {
            "version": MODEL_DOC_VERSION,
            "type": "linear",
            "weights": [float(w) for w in model.weights],
            "intercept": model.intercept,
            "feature_dim": model.feature_dim,
        }
    return {
        "version": MODEL_DOC_VERSION,
        "type": "forest",
        "n_trees": model.n_trees,
        "max_depth": model.max_depth,
        "min_leaf": model.min_leaf,
        "label_min": model.label_min,
        "label_max": model.label_max,
        "feature_dim": model.feature_dim,
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "value": t.value.tolist(),
            }
            for t in model.trees
        ],
    }


def model_from_doc(doc: dict) -> Model:
    if doc.get("version") != MODEL_DOC_VERSION:
        raise LeaError(f"unsupported model document version: {doc.get('version')}")
    if doc["type"] == "linear":
        return LinearModel(
            weights=np.array(doc["weights"], dtype=np.float64),
            intercept=float(doc["intercept"]),
            feature_dim=int(doc["feature_dim"]),
        )
    trees = [
        Tree(
            feature=np.array(t["feature"], dtype=np.int32),
            threshold=np.array(t["threshold"], dtype=np.float64),
            left=np.array(t["left"], dtype=np.int32),
            right=np.array(t["right"], dtype=np.int32),
            value=np.array(t["value"], dtype=np.float64),
        )
        for t in doc["trees"]
    ]
    return ForestModel(
        trees=trees,
        n_trees=int(doc["n_trees"]),
        max_depth=int(doc["max_depth"]),
        min_leaf=int(doc["min_leaf"]),
        label_min=float(doc["label_min"]),
        label_max=float(doc["label_max"]),
        feature_dim=int(doc["feature_dim"]),
    )
