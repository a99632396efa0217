"""Pixel-wise baseline regressors: linear, random forest, gradient boosting.

The ensembles are built over scikit-learn regression trees with the classic
recipes (bootstrap aggregation; residual fitting with shrinkage), seeded end
to end so refits are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.tree import DecisionTreeRegressor

from ..errors import InsufficientData

TABULAR_KINDS = ("linear", "random_forest", "gradient_boosting")


@dataclass
class TabularModelKind:
    kind: str
    hyperparams: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in TABULAR_KINDS:
            raise ValueError(f"unknown tabular kind {self.kind!r}")


class LinearRegressionModel:
    """Ordinary least squares via the pseudo-inverse; collinear designs are
    solved in the least-squares sense and flagged rather than rejected."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.coef: np.ndarray | None = None
        self.intercept: float = 0.0
        self.singular_design = False

    def fit(self, X: np.ndarray, y: np.ndarray) -> "LinearRegressionModel":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.shape[0] < X.shape[1]:
            raise InsufficientData(f"need >= {X.shape[1]} rows, got {X.shape[0]}")
        design = np.hstack([X, np.ones((X.shape[0], 1))])
        solution, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
        self.singular_design = rank < design.shape[1]
        self.coef = solution[:-1]
        self.intercept = float(solution[-1])
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.coef + self.intercept


class RandomForestModel:
    def __init__(self, n_trees: int = 300, max_depth: int | None = None,
                 bootstrap: bool = True, max_features: float | str = 1.0,
                 min_samples_leaf: int = 1, seed: int = 0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.bootstrap = bootstrap
        self.max_features = max_features
        self.min_samples_leaf = min_samples_leaf
        self.seed = seed
        self.trees: list[DecisionTreeRegressor] = []

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RandomForestModel":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.shape[0] < 1:
            raise InsufficientData("no training rows")
        rng = np.random.default_rng(self.seed)
        self.trees = []
        for i in range(self.n_trees):
            tree = DecisionTreeRegressor(
                max_depth=self.max_depth,
                max_features=self.max_features,
                min_samples_leaf=self.min_samples_leaf,
                random_state=int(rng.integers(0, 2 ** 31 - 1)),
            )
            if self.bootstrap:
                idx = rng.integers(0, X.shape[0], size=X.shape[0])
                tree.fit(X[idx], y[idx])
            else:
                tree.fit(X, y)
            self.trees.append(tree)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.zeros(X.shape[0])
        for tree in self.trees:
            out += tree.predict(X)
        return out / len(self.trees)


class GradientBoostingModel:
    """First-order gradient boosting over regression trees with shrinkage."""

    def __init__(self, n_trees: int = 300, learning_rate: float = 0.1,
                 max_depth: int = 4, seed: int = 0):
        self.n_trees = n_trees
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.seed = seed
        self.base: float = 0.0
        self.trees: list[DecisionTreeRegressor] = []

    def fit(self, X: np.ndarray, y: np.ndarray) -> "GradientBoostingModel":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.shape[0] < 1:
            raise InsufficientData("no training rows")
        rng = np.random.default_rng(self.seed)
        self.base = float(y.mean())
        residual = y - self.base
        self.trees = []
        for _ in range(self.n_trees):
            tree = DecisionTreeRegressor(
                max_depth=self.max_depth,
                random_state=int(rng.integers(0, 2 ** 31 - 1)),
            )
            tree.fit(X, residual)
            residual = residual - self.learning_rate * tree.predict(X)
            self.trees.append(tree)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.full(X.shape[0], self.base)
        for tree in self.trees:
            out += self.learning_rate * tree.predict(X)
        return out


def fit_tabular(kind: TabularModelKind, X: np.ndarray, y: np.ndarray, seed: int = 0):
    """Fit the requested baseline; returns the fitted model object."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n, features) with matching y")
    if X.shape[0] == 0:
        raise InsufficientData("no training rows")
    params = dict(kind.hyperparams)
    params.setdefault("seed", seed)
    if kind.kind == "linear":
        model = LinearRegressionModel(seed=params["seed"])
    elif kind.kind == "random_forest":
        model = RandomForestModel(**params)
    else:
        model = GradientBoostingModel(**params)
    return model.fit(X, y)
