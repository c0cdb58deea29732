"""Random-forest estimate of the conditional root moment sqrt(E[(Y - b'(beta'X))^2 | S, X]).

Feature layout is fixed: column 0 holds S, columns 1..p hold X.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import NDArray
from sklearn.tree import DecisionTreeRegressor

from .glm import GlmFamily

LEAF = -1


def residual_targets(family: GlmFamily, beta_pilot, X_pilot, Y_pilot) -> NDArray:
    """Per-unit absolute residuals |Y_i - b'(beta'x_i)|."""
    X_pilot = np.asarray(X_pilot, dtype=float)
    Y_pilot = np.asarray(Y_pilot, dtype=float).ravel()
    beta_pilot = np.asarray(beta_pilot, dtype=float).ravel()
    if X_pilot.shape != (Y_pilot.shape[0], beta_pilot.shape[0]):
        raise ValueError(
            f"dimension mismatch: X {X_pilot.shape}, Y {Y_pilot.shape}, beta {beta_pilot.shape}"
        )
    return np.abs(Y_pilot - GlmFamily(family).mean(X_pilot @ beta_pilot))


def stack_features(S, X) -> NDArray:
    S = np.asarray(S, dtype=float).ravel()
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != S.shape[0]:
        raise ValueError(f"S has {S.shape[0]} entries but X has shape {X.shape}")
    return np.column_stack([S, X])


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    min_leaf: int = 5
    max_depth: int | None = None
    mtry: int | None = None  # default ceil(n_features / 3)
    floor_rel: float = 1e-6


@dataclass(frozen=True)
class Tree:
    """Flat node arrays; ``feature == LEAF`` marks a leaf.

    Features are compared in float32 and ties go left (``x <= threshold``), the same
    convention as the sklearn builder, whose compiled ``apply`` is used when present.
    """

    feature: NDArray
    threshold: NDArray
    left: NDArray
    right: NDArray
    value: NDArray
    _apply: Callable | None = field(default=None, repr=False, compare=False)

    def leaves(self, F: NDArray) -> NDArray:
        F = np.asarray(F, dtype=np.float32)
        if self._apply is not None:
            return self._apply(F)
        return self.traverse(F)

    def traverse(self, F: NDArray) -> NDArray:
        F = np.asarray(F, dtype=np.float32)
        node = np.zeros(F.shape[0], dtype=np.intp)
        rows = np.arange(F.shape[0])
        active = self.feature[node] != LEAF
        while active.any():
            idx = rows[active]
            nd = node[idx]
            go_left = F[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active[idx] = self.feature[node[idx]] != LEAF
        return node

    def predict(self, F: NDArray) -> NDArray:
        return self.value[self.leaves(F)]

    def to_records(self) -> list[dict]:
        return [
            {
                "id": i,
                "feature": int(f),
                "threshold": float(t),
                "left": int(lo),
                "right": int(hi),
                "value": float(v),
            }
            for i, (f, t, lo, hi, v) in enumerate(
                zip(self.feature, self.threshold, self.left, self.right, self.value)
            )
        ]


@dataclass(frozen=True)
class MomentModel:
    trees: list[Tree] = field(repr=False)
    feature_count: int
    floor: float

    def predict(self, F: NDArray) -> NDArray:
        F = np.asarray(F, dtype=float)
        if F.ndim != 2 or F.shape[1] != self.feature_count:
            raise ValueError(f"expected {self.feature_count} features, got shape {F.shape}")
        acc = np.zeros(F.shape[0])
        F = F.astype(np.float32)
        for tree in self.trees:
            acc += tree.predict(F)
        return np.maximum(acc / len(self.trees), self.floor)

    def to_json(self) -> str:
        return json.dumps(
            {
                "feature_count": self.feature_count,
                "floor": self.floor,
                "trees": [t.to_records() for t in self.trees],
            }
        )


def _from_sklearn(est: DecisionTreeRegressor) -> Tree:
    t = est.tree_
    leaf = t.children_left == -1
    feature = np.where(leaf, LEAF, t.feature).astype(np.intp)
    return Tree(
        feature=feature,
        threshold=np.where(leaf, 0.0, t.threshold),
        left=np.where(leaf, 0, t.children_left).astype(np.intp),
        right=np.where(leaf, 0, t.children_right).astype(np.intp),
        value=t.value[:, 0, 0].copy(),
        _apply=est.apply,
    )


def fit_forest(features, targets, params: ForestParams | None = None, rng=None) -> MomentModel:
    """Bootstrap forest of variance-splitting CART trees, seeded from ``rng``."""
    params = params or ForestParams()
    F = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float).ravel()
    if F.ndim != 2 or F.shape[0] != y.shape[0]:
        raise ValueError(f"features {F.shape} do not match targets {y.shape}")
    m, k = F.shape
    if m == 0:
        raise ValueError("cannot fit a forest on zero rows")
    rng = rng if rng is not None else np.random.default_rng()
    mtry = params.mtry or math.ceil(k / 3)
    mean_target = float(np.mean(y))
    floor = params.floor_rel * mean_target if mean_target > 0 else params.floor_rel

    trees = []
    for _ in range(params.n_trees):
        boot = rng.integers(0, m, size=m)
        est = DecisionTreeRegressor(
            min_samples_leaf=params.min_leaf,
            max_depth=params.max_depth,
            max_features=min(mtry, k),
            random_state=int(rng.integers(0, 2**31 - 1)),
        )
        est.fit(F[boot], y[boot])
        trees.append(_from_sklearn(est))
    return MomentModel(trees=trees, feature_count=k, floor=floor)


def predict_root_moment(model: MomentModel, S, X) -> NDArray:
    """Forest average at (S, X), floored to stay strictly positive."""
    return model.predict(stack_features(S, X))
