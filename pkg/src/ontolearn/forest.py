"""CART trees and random forests grown with Gini impurity.

Trees are stored as flat node arrays (feature, threshold, left, right,
class counts) so prediction is vectorized and the model serializes to
plain JSON.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .fileio import atomic_open

FORMAT = "ontolearn-forest"
VERSION = 1


@dataclass
class ForestConfig:
    n_trees: int = 10
    min_samples_split: int = 2
    max_depth: int | None = None
    # None = all features; "sqrt" = ceil(sqrt(width))
    mtry: int | str | None = "sqrt"
    bootstrap: bool = True

    def resolve_mtry(self, width: int) -> int:
        if self.mtry is None:
            return width
        if self.mtry == "sqrt":
            return max(1, math.ceil(math.sqrt(width)))
        return max(1, min(int(self.mtry), width))


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, n_classes) class counts

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            feat = self.feature[node]
            inner = feat >= 0
            if not inner.any():
                return node
            idx = np.nonzero(inner)[0]
            go_left = X[idx, feat[idx]] <= self.threshold[node[idx]]
            node[idx] = np.where(go_left, self.left[node[idx]], self.right[node[idx]])

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        counts = self.value[self.apply(X)]
        return counts / counts.sum(axis=1, keepdims=True)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": [float(t) for t in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=np.float64).reshape(len(d["feature"]), -1),
        )


def _best_split(X, y, idx, feats, n_classes):
    """Best Gini split of rows `idx` over columns `feats` (ascending).

    Returns (feature, threshold) or None when every column is constant.
    Ties go to the lowest feature index, then the lowest threshold.
    """
    m = len(idx)
    Xs = X[np.ix_(idx, feats)]
    order = np.argsort(Xs, axis=0, kind="stable")
    vs = np.take_along_axis(Xs, order, axis=0)
    ys = y[idx][order]
    valid = vs[:-1] < vs[1:]  # (m-1, k)
    if not valid.any():
        return None
    onehot = ys[:, :, None] == np.arange(n_classes)
    cl = np.cumsum(onehot, axis=0, dtype=np.int64)[:-1]  # left counts after row j
    total = cl[-1] + onehot[-1]
    cr = total[None, :, :] - cl
    nl = np.arange(1, m, dtype=np.float64)[:, None]
    nr = m - nl
    # minimizing weighted Gini == maximizing sum(cl^2)/nl + sum(cr^2)/nr
    score = (cl.astype(np.float64) ** 2).sum(axis=2) / nl + (cr.astype(np.float64) ** 2).sum(axis=2) / nr
    score = np.where(valid, score, -np.inf)
    # exact ties can differ in the last bit depending on the split position
    best = score.max()
    flat = int(np.argmax(score.T >= best - 1e-12 * max(1.0, abs(best))))
    f_i, j = divmod(flat, m - 1)
    threshold = (vs[j, f_i] + vs[j + 1, f_i]) / 2.0
    if not threshold < vs[j + 1, f_i]:  # midpoint rounded up onto the upper value
        threshold = vs[j, f_i]
    return int(feats[f_i]), float(threshold)


def train_tree(X: np.ndarray, y: np.ndarray, rng: np.random.Generator, mtry: int | None = None,
               n_classes: int | None = None, min_samples_split: int = 2,
               max_depth: int | None = None) -> Tree:
    """Grow one CART tree on integer labels `y` (0..n_classes-1).

    A node becomes a leaf when it is pure, has fewer than
    `min_samples_split` rows, hits `max_depth`, or no drawn feature varies
    within it. Features are drawn `mtry` at a time; if none of a draw
    varies, the next draw is tried until the columns run out.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(X) == 0:
        raise ValueError("cannot grow a tree on zero samples")
    n_classes = int(y.max()) + 1 if n_classes is None else n_classes
    width = X.shape[1]
    mtry = width if mtry is None else max(1, min(mtry, width))

    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(np.bincount(y[idx], minlength=n_classes))
        return len(feature) - 1

    root = new_node(np.arange(len(X)))
    stack = [(root, np.arange(len(X)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        counts = value[node]
        if len(idx) < min_samples_split or np.count_nonzero(counts) <= 1:
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        split = None
        if width:
            perm = rng.permutation(width)
            for lo in range(0, width, mtry):
                feats = np.sort(perm[lo:lo + mtry])
                split = _best_split(X, y, idx, feats, n_classes)
                if split is not None:
                    break
        if split is None:
            continue
        f, t = split
        mask = X[idx, f] <= t
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = f, t
        left[node] = new_node(li)
        right[node] = new_node(ri)
        # right pushed first so the left subtree gets the lower node ids
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return Tree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(value, dtype=np.float64).reshape(len(feature), n_classes),
    )


@dataclass
class ForestModel:
    trees: list[Tree]
    classes: list[str]
    width: int
    config: ForestConfig = field(default_factory=ForestConfig)
    schema_hash: str = ""
    seed: int = 0

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.width:
            raise ValueError(f"feature width {X.shape[1]} does not match model width {self.width}")
        return X

    def predict_proba(self, X) -> np.ndarray:
        single = np.asarray(X).ndim == 1
        X = self._check(X)
        proba = np.zeros((len(X), len(self.classes)))
        for t in self.trees:
            proba += t.predict_proba(X)
        proba /= len(self.trees)
        return proba[0] if single else proba

    def predict(self, X):
        proba = self.predict_proba(X)
        if proba.ndim == 1:
            return self.classes[int(np.argmax(proba))]
        return [self.classes[i] for i in np.argmax(proba, axis=1)]

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": VERSION,
            "classes": list(self.classes),
            "width": self.width,
            "schema_hash": self.schema_hash,
            "seed": self.seed,
            "config": asdict(self.config),
            "trees": [t.to_dict() for t in self.trees],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def save(self, path) -> None:
        with atomic_open(path) as fh:
            fh.write(self.dumps())

    @classmethod
    def from_dict(cls, d) -> "ForestModel":
        if d.get("format") != FORMAT:
            raise ValueError("not a forest model file")
        if d.get("version") != VERSION:
            raise ValueError(f"unsupported forest model version {d.get('version')}")
        return cls(
            trees=[Tree.from_dict(t) for t in d["trees"]],
            classes=list(d["classes"]),
            width=int(d["width"]),
            config=ForestConfig(**d["config"]),
            schema_hash=d.get("schema_hash", ""),
            seed=int(d.get("seed", 0)),
        )

    @classmethod
    def loads(cls, text: str) -> "ForestModel":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "ForestModel":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


def train_forest(X, labels: Sequence, config: ForestConfig | None = None, seed: int = 0,
                 classes: Sequence[str] | None = None, schema_hash: str = "", threads: int = 1) -> ForestModel:
    config = config or ForestConfig()
    if config.n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    labels = list(labels)
    if len(labels) == 0 or len(X) != len(labels):
        raise ValueError("need a non-empty sample set with one label per row")
    classes = list(classes) if classes is not None else sorted(set(labels))
    cindex = {c: i for i, c in enumerate(classes)}
    try:
        y = np.array([cindex[l] for l in labels], dtype=np.int64)
    except KeyError as e:
        raise ValueError(f"label {e.args[0]!r} not among classes {classes}") from None
    mtry = config.resolve_mtry(X.shape[1])
    tree_seeds = np.random.SeedSequence(seed).spawn(config.n_trees)

    def grow(ss):
        rng = np.random.default_rng(ss)
        if config.bootstrap:
            rows = rng.integers(0, len(X), size=len(X))
            Xb, yb = X[rows], y[rows]
        else:
            Xb, yb = X, y
        return train_tree(Xb, yb, rng, mtry, len(classes), config.min_samples_split, config.max_depth)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            trees = list(ex.map(grow, tree_seeds))
    else:
        trees = [grow(ss) for ss in tree_seeds]
    return ForestModel(trees, classes, X.shape[1], config, schema_hash, seed)


def predict_proba(model: ForestModel, X) -> np.ndarray:
    return model.predict_proba(X)


def predict(model: ForestModel, X):
    return model.predict(X)
