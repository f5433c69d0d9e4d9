"""Decision-tree detectors: single CART, random forest, gradient boosting.

All three share one array-encoded binary tree (`TreeModel`) grown greedily
on top of the split kernels in :mod:`icsadv.kernels`. Conventions the
tests pin down:

* candidate thresholds are midpoints of consecutive distinct sorted values,
  rows with value <= threshold go left;
* a split is accepted only when its impurity decrease is strictly greater
  than ``min_impurity_decrease`` (so the default 0.0 demands positive gain);
* gain ties break toward the lowest feature index, then lowest threshold;
* classification leaves store the class-1 fraction and predict 1 when the
  fraction reaches 0.5; forest votes break ties toward class 0; the boosted
  model predicts 1 when the sigmoid of its score reaches 0.5.

A forest with one tree, no bootstrap and all features per split grows the
identical tree a plain CART would (the per-split feature draw is skipped
when the subset covers every feature, to keep the RNG stream out of it).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    DegenerateTargetError,
    EmptyInputError,
    ParameterError,
    ParseError,
    ShapeError,
)

CART = "cart"
FOREST = "rf"
GBC = "gbc"

_GINI = "gini"
_SSE = "sse"


@dataclass(frozen=True)
class CartParams:
    max_depth: int = 12
    min_samples_split: int = 2
    min_impurity_decrease: float = 0.0

    def __post_init__(self):
        if self.max_depth < 1:
            raise ParameterError("max_depth must be >= 1")
        if self.min_samples_split < 2:
            raise ParameterError("min_samples_split must be >= 2")
        if self.min_impurity_decrease < 0:
            raise ParameterError("min_impurity_decrease must be >= 0")

    def to_json(self) -> dict:
        return {
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "min_impurity_decrease": self.min_impurity_decrease,
        }


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    features_per_split: int | None = None  # None -> ceil(sqrt(n_features))
    bootstrap: bool = True
    max_depth: int = 12
    min_samples_split: int = 2
    min_impurity_decrease: float = 0.0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ParameterError("n_trees must be >= 1")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ParameterError("features_per_split must be >= 1")
        if self.max_depth < 1:
            raise ParameterError("max_depth must be >= 1")
        if self.min_samples_split < 2:
            raise ParameterError("min_samples_split must be >= 2")
        if self.min_impurity_decrease < 0:
            raise ParameterError("min_impurity_decrease must be >= 0")

    def to_json(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "features_per_split": self.features_per_split,
            "bootstrap": self.bootstrap,
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "min_impurity_decrease": self.min_impurity_decrease,
        }


@dataclass(frozen=True)
class GbcParams:
    n_stages: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3

    def __post_init__(self):
        if self.n_stages < 1:
            raise ParameterError("n_stages must be >= 1")
        if self.learning_rate <= 0:
            raise ParameterError("learning_rate must be positive")
        if self.max_depth < 1:
            raise ParameterError("max_depth must be >= 1")

    def to_json(self) -> dict:
        return {
            "n_stages": self.n_stages,
            "learning_rate": self.learning_rate,
            "max_depth": self.max_depth,
        }


class TreeModel:
    """Flat binary tree; feature == -1 marks a leaf holding ``value``."""

    def __init__(self, feature, threshold, left, right, value, n_features):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)
        self.n_features = int(n_features)

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf values for every row of X."""
        return kernels.tree_apply(
            self.feature, self.threshold, self.left, self.right, self.value, X
        )

    def leaf_ids(self, X: np.ndarray) -> np.ndarray:
        """Index of the leaf each row lands in."""
        ids = kernels.tree_apply(
            self.feature,
            self.threshold,
            self.left,
            self.right,
            np.arange(self.n_nodes, dtype=np.float64),
            X,
        )
        return ids.astype(np.int64)

    def to_json(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_features": self.n_features,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TreeModel":
        return cls(
            obj["feature"],
            obj["threshold"],
            obj["left"],
            obj["right"],
            obj["value"],
            obj["n_features"],
        )


class _TreeBuilder:
    def __init__(self, X, target, criterion, max_depth, min_samples_split,
                 min_impurity_decrease, features_per_split=None, rng=None):
        self.X = X
        self.target = target
        self.criterion = criterion
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_impurity_decrease = min_impurity_decrease
        self.features_per_split = features_per_split
        self.rng = rng
        self.n_features = X.shape[1]
        self.all_features = np.arange(self.n_features, dtype=np.int64)
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def _leaf_value(self, idx) -> float:
        t = self.target[idx]
        return float(t.mean())

    def _candidate_features(self) -> np.ndarray:
        k = self.features_per_split
        if k is None or k >= self.n_features:
            return self.all_features
        chosen = self.rng.choice(self.n_features, size=k, replace=False)
        return np.sort(chosen).astype(np.int64)

    def _new_node(self) -> int:
        node = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return node

    def build(self, idx, depth) -> int:
        node = self._new_node()
        self.value[node] = self._leaf_value(idx)
        n = idx.shape[0]
        if depth >= self.max_depth or n < self.min_samples_split:
            return node
        if self.criterion == _GINI:
            t = self.target[idx]
            if t.min() == t.max():
                return node
            feat, thr, gain = kernels.gini_best_split(
                self.X[idx], t, self._candidate_features()
            )
        else:
            feat, thr, gain = kernels.sse_best_split(
                self.X[idx], self.target[idx], self._candidate_features()
            )
        if feat < 0 or not gain > self.min_impurity_decrease:
            return node
        mask = self.X[idx, feat] <= thr
        self.feature[node] = feat
        self.threshold[node] = thr
        self.left[node] = self.build(idx[mask], depth + 1)
        self.right[node] = self.build(idx[~mask], depth + 1)
        return node

    def finish(self) -> TreeModel:
        return TreeModel(
            self.feature, self.threshold, self.left, self.right, self.value,
            self.n_features,
        )


def _check_xy(X, y, binary: bool):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError("X must be 2-D")
    if X.shape[0] == 0:
        raise EmptyInputError("cannot train on an empty dataset")
    y = np.asarray(y)
    if y.shape != (X.shape[0],):
        raise ShapeError("y length does not match X")
    if binary:
        y = y.astype(np.int64)
        if y.size and (y.min() < 0 or y.max() > 1):
            raise ParameterError("labels must be 0 or 1")
    return X, y


class CartModel:
    def __init__(self, tree: TreeModel, params: CartParams):
        self.tree = tree
        self.params = params


def train_cart(X, y, params: CartParams = CartParams()) -> CartModel:
    """Greedy Gini CART; leaves store the class-1 fraction."""
    X, y = _check_xy(X, y, binary=True)
    builder = _TreeBuilder(
        X, y, _GINI, params.max_depth, params.min_samples_split,
        params.min_impurity_decrease,
    )
    builder.build(np.arange(X.shape[0]), 0)
    return CartModel(builder.finish(), params)


class ForestModel:
    def __init__(self, trees: list[TreeModel], params: ForestParams, seed: int):
        self.trees = trees
        self.params = params
        self.seed = seed


def train_forest(X, y, params: ForestParams = ForestParams(), seed: int = 0) -> ForestModel:
    """Bootstrap-aggregated CARTs with per-split feature subsampling."""
    X, y = _check_xy(X, y, binary=True)
    n, d = X.shape
    k = params.features_per_split
    if k is None:
        k = math.ceil(math.sqrt(d))
    if k > d:
        raise ParameterError(
            "features_per_split %d exceeds feature count %d" % (k, d)
        )
    streams = np.random.SeedSequence(seed).spawn(params.n_trees)
    trees = []
    rows = np.arange(n)
    for ss in streams:
        rng = np.random.default_rng(ss)
        idx = rng.integers(0, n, size=n) if params.bootstrap else rows
        builder = _TreeBuilder(
            X, y, _GINI, params.max_depth, params.min_samples_split,
            params.min_impurity_decrease, features_per_split=k, rng=rng,
        )
        builder.build(idx, 0)
        trees.append(builder.finish())
    return ForestModel(trees, params, seed)


class GbcModel:
    def __init__(self, initial_log_odds: float, stages: list[TreeModel],
                 params: GbcParams):
        self.initial_log_odds = float(initial_log_odds)
        self.stages = stages
        self.params = params

    def decision_scores(self, X: np.ndarray, n_stages: int | None = None) -> np.ndarray:
        """Additive scores after the first ``n_stages`` stages (all by default)."""
        stages = self.stages if n_stages is None else self.stages[:n_stages]
        scores = np.full(X.shape[0], self.initial_log_odds)
        for tree in stages:
            scores += self.params.learning_rate * tree.apply(X)
        return scores


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def train_gbc(X, y, params: GbcParams = GbcParams()) -> GbcModel:
    """Boosted regression stumps/trees on the logistic loss.

    Stage trees fit the residual y - sigmoid(score) under SSE splits; leaf
    values take the damped Newton form sum(r) / sum(|r| (1 - |r|)) with a
    zero denominator mapping to a zero leaf.
    """
    X, y = _check_xy(X, y, binary=True)
    p = float(y.mean())
    if p == 0.0 or p == 1.0:
        raise DegenerateTargetError(
            "boosting needs both classes present, got a single class"
        )
    log_odds = math.log(p / (1.0 - p))
    yf = y.astype(np.float64)
    scores = np.full(X.shape[0], log_odds)
    stages = []
    all_rows = np.arange(X.shape[0])
    for _ in range(params.n_stages):
        resid = yf - _sigmoid(scores)
        builder = _TreeBuilder(
            X, resid, _SSE, params.max_depth, 2, 0.0,
        )
        builder.build(all_rows, 0)
        tree = builder.finish()
        leaf_of_row = tree.leaf_ids(X)
        leaf_values = np.zeros(tree.n_nodes)
        for leaf in np.unique(leaf_of_row):
            r = resid[leaf_of_row == leaf]
            denom = float(np.sum(np.abs(r) * (1.0 - np.abs(r))))
            leaf_values[leaf] = float(r.sum()) / denom if denom > 0 else 0.0
        tree.value = leaf_values
        stages.append(tree)
        scores = scores + params.learning_rate * leaf_values[leaf_of_row]
    return GbcModel(log_odds, stages, params)


# ---------------------------------------------------------------------------
# prediction + serialization over all three detector kinds
# ---------------------------------------------------------------------------


def _check_matrix(model, X) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    d = model_n_features(model)
    if X.shape[1] != d:
        raise ShapeError(
            "input has %d features, model expects %d" % (X.shape[1], d)
        )
    return X


def model_kind(model) -> str:
    if isinstance(model, CartModel):
        return CART
    if isinstance(model, ForestModel):
        return FOREST
    if isinstance(model, GbcModel):
        return GBC
    raise ParameterError("unknown detector model type %r" % type(model).__name__)


def model_n_features(model) -> int:
    kind = model_kind(model)
    if kind == CART:
        return model.tree.n_features
    if kind == FOREST:
        return model.trees[0].n_features
    return model.stages[0].n_features


def predict_classes(model, X) -> np.ndarray:
    """Batch 0/1 predictions for any detector kind."""
    X = _check_matrix(model, X)
    kind = model_kind(model)
    if kind == CART:
        return (model.tree.apply(X) >= 0.5).astype(np.int64)
    if kind == FOREST:
        votes = np.zeros(X.shape[0], dtype=np.int64)
        for tree in model.trees:
            votes += tree.apply(X) >= 0.5
        # strict majority; an even split falls back to class 0
        return (2 * votes > len(model.trees)).astype(np.int64)
    return (_sigmoid(model.decision_scores(X)) >= 0.5).astype(np.int64)


def predict_class(model, x) -> int:
    return int(predict_classes(model, np.asarray(x, dtype=np.float64))[0])


def save_model(model, path) -> None:
    kind = model_kind(model)
    doc: dict = {"format": "detector", "version": 1, "kind": kind}
    if kind == CART:
        doc["params"] = model.params.to_json()
        doc["tree"] = model.tree.to_json()
    elif kind == FOREST:
        doc["params"] = model.params.to_json()
        doc["seed"] = model.seed
        doc["trees"] = [t.to_json() for t in model.trees]
    else:
        doc["params"] = model.params.to_json()
        doc["initial_log_odds"] = model.initial_log_odds
        doc["stages"] = [t.to_json() for t in model.stages]
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_model(path):
    with open(path, "r") as fh:
        doc = json.load(fh)
    if doc.get("format") != "detector":
        raise ParseError("%s: not a detector model document" % path)
    kind = doc.get("kind")
    if kind == CART:
        return CartModel(
            TreeModel.from_json(doc["tree"]), CartParams(**doc["params"])
        )
    if kind == FOREST:
        return ForestModel(
            [TreeModel.from_json(t) for t in doc["trees"]],
            ForestParams(**doc["params"]),
            int(doc.get("seed", 0)),
        )
    if kind == GBC:
        return GbcModel(
            doc["initial_log_odds"],
            [TreeModel.from_json(t) for t in doc["stages"]],
            GbcParams(**doc["params"]),
        )
    raise ParseError("%s: unknown detector kind %r" % (path, kind))
