"""Base classifiers, the final classifier and majority voting.

Every classifier resolves ties toward the lowest label so that results are
reproducible. kNN and nearest-centroid are small numpy implementations;
trees and forests are backed by scikit-learn's CART (Gini impurity,
midpoint thresholds) with hard voting across trees.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.ensemble import RandomForestClassifier
from sklearn.tree import DecisionTreeClassifier
from sklearn.utils.validation import check_is_fitted

from ._validation import check_labels, check_matrix
from .datasets import LabeledDataset, UnlabeledDataset
from .exceptions import EmptyInput, InvalidInput

__all__ = [
    "ClassifierModel",
    "KNNClassifier",
    "LabeledDataset",
    "NearestCentroidClassifier",
    "PseudoSplit",
    "TreeClassifier",
    "UnlabeledDataset",
    "VotingForestClassifier",
    "default_base_classifiers",
    "fit",
    "majority_vote",
    "predict",
    "split_by_vote",
]

KINDS = ("knn", "nearest_centroid", "decision_tree", "random_forest")


def _lowest_argmax(counts):
    """Row-wise argmax; ``np.argmax`` already returns the first maximum."""
    return np.argmax(counts, axis=1)


class _LabelMixin:
    def _encode(self, y):
        self.classes_, encoded = np.unique(y, return_inverse=True)
        return encoded

    def _check_query(self, X):
        check_is_fitted(self, "classes_")
        X = check_matrix(X, "X", allow_empty=True)
        if X.shape[0] and X.shape[1] != self.n_features_in_:
            raise InvalidInput(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X


class KNNClassifier(_LabelMixin, ClassifierMixin, BaseEstimator):
    """Brute-force k-nearest-neighbours with plain majority voting.

    Neighbours at equal distance are ordered by label, and tied votes go
    to the lowest label.
    """

    def __init__(self, n_neighbors=3, chunk_size=1024):
        self.n_neighbors = n_neighbors
        self.chunk_size = chunk_size

    def fit(self, X, y):
        X = check_matrix(X, "X")
        y = check_labels(y, X.shape[0])
        if not 1 <= self.n_neighbors <= X.shape[0]:
            raise InvalidInput(f"k={self.n_neighbors} must lie in [1, {X.shape[0]}]")
        self._y = self._encode(y)
        self._X = X
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        X = self._check_query(X)
        out = np.empty(X.shape[0], dtype=np.int64)
        k, n_classes = self.n_neighbors, self.classes_.size
        for start in range(0, X.shape[0], self.chunk_size):
            D = cdist(X[start:start + self.chunk_size], self._X, "sqeuclidean")
            labels = np.broadcast_to(self._y, D.shape)
            # sort by distance, then by label
            order = np.lexsort((labels, D))[:, :k]
            neigh = self._y[order]
            counts = np.zeros((neigh.shape[0], n_classes), dtype=np.int64)
            np.add.at(counts, (np.arange(neigh.shape[0])[:, None], neigh), 1)
            out[start:start + neigh.shape[0]] = _lowest_argmax(counts)
        return self.classes_[out]


class NearestCentroidClassifier(_LabelMixin, ClassifierMixin, BaseEstimator):
    """Assign each sample to the class with the closest mean."""

    def fit(self, X, y):
        X = check_matrix(X, "X")
        y = self._encode(check_labels(y, X.shape[0]))
        self.centroids_ = np.vstack([X[y == j].mean(axis=0) for j in range(self.classes_.size)])
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        X = self._check_query(X)
        if X.shape[0] == 0:
            return self.classes_[:0].copy()
        return self.classes_[np.argmin(cdist(X, self.centroids_, "sqeuclidean"), axis=1)]


class TreeClassifier(_LabelMixin, ClassifierMixin, BaseEstimator):
    """A single CART tree grown on the full training set."""

    def __init__(self, max_depth=12, random_state=0):
        self.max_depth = max_depth
        self.random_state = random_state

    def fit(self, X, y):
        X = check_matrix(X, "X")
        y = self._encode(check_labels(y, X.shape[0]))
        self.tree_ = DecisionTreeClassifier(
            criterion="gini", max_depth=self.max_depth, min_samples_leaf=1,
            random_state=self.random_state,
        ).fit(X, y)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        X = self._check_query(X)
        if X.shape[0] == 0:
            return self.classes_[:0].copy()
        return self.classes_[_lowest_argmax(self.tree_.predict_proba(X))]


class VotingForestClassifier(_LabelMixin, ClassifierMixin, BaseEstimator):
    """Bagged CART trees with sqrt(d) feature subsampling and hard voting.

    Parameters
    ----------
    n_estimators : int, default=30
    max_depth : int or None, default=12
    random_state : int, default=0
    """

    def __init__(self, n_estimators=30, max_depth=12, random_state=0):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.random_state = random_state

    def fit(self, X, y):
        X = check_matrix(X, "X")
        y = self._encode(check_labels(y, X.shape[0]))
        if self.n_estimators < 1:
            raise InvalidInput("n_estimators must be at least 1")
        self.forest_ = RandomForestClassifier(
            n_estimators=self.n_estimators, criterion="gini", max_depth=self.max_depth,
            max_features="sqrt", bootstrap=True, min_samples_leaf=1,
            random_state=self.random_state,
        ).fit(X, y)
        self.n_features_in_ = X.shape[1]
        return self

    def tree_votes(self, X):
        """(n_estimators, n_samples) encoded class index predicted by each tree."""
        return np.vstack([_lowest_argmax(t.predict_proba(X)) for t in self.forest_.estimators_])

    def predict(self, X):
        X = self._check_query(X)
        if X.shape[0] == 0:
            return self.classes_[:0].copy()
        votes = self.tree_votes(X)
        counts = np.zeros((X.shape[0], self.classes_.size), dtype=np.int64)
        for row in votes:
            counts[np.arange(X.shape[0]), row] += 1
        return self.classes_[_lowest_argmax(counts)]


@dataclass(frozen=True)
class ClassifierModel:
    """Declarative description of a classifier.

    ``seed`` left as None is filled in from the pipeline seed.
    """

    kind: str = "random_forest"
    k: int = 3
    n_trees: int = 30
    max_depth: int | None = 12
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInput(f"unknown classifier kind {self.kind!r}; expected one of {KINDS}")
        if self.k < 1:
            raise InvalidInput("k must be at least 1")
        if self.n_trees < 1:
            raise InvalidInput("n_trees must be at least 1")

    def with_seed(self, seed):
        return self if self.seed is not None else replace(self, seed=seed)

    def build(self):
        seed = 0 if self.seed is None else self.seed
        if self.kind == "knn":
            return KNNClassifier(self.k)
        if self.kind == "nearest_centroid":
            return NearestCentroidClassifier()
        if self.kind == "decision_tree":
            return TreeClassifier(self.max_depth, seed)
        return VotingForestClassifier(self.n_trees, self.max_depth, seed)


def default_base_classifiers():
    """kNN (k=3), nearest centroid and a 30-tree forest."""
    return (
        ClassifierModel("knn", k=3),
        ClassifierModel("nearest_centroid"),
        ClassifierModel("random_forest", n_trees=30),
    )


def fit(model, data):
    """Train ``model`` on a :class:`LabeledDataset`; returns the fitted estimator."""
    return model.build().fit(data.X, data.y)


def predict(trained, X):
    return trained.predict(X)


def majority_vote(predictions):
    """Strict-majority vote over classifiers.

    Parameters
    ----------
    predictions : array-like of shape (t, n)
        Row ``i`` holds classifier ``i``'s labels (non-negative ints).

    Returns
    -------
    ndarray of shape (n,)
        The label chosen by more than ``t / 2`` classifiers, else -1.
    """
    P = np.atleast_2d(np.asarray(predictions, dtype=np.int64))
    if P.size == 0:
        raise EmptyInput("need at least one classifier and one sample")
    t = P.shape[0]
    out = np.full(P.shape[1], -1, dtype=np.int64)
    for label in np.unique(P):
        won = 2 * np.count_nonzero(P == label, axis=0) > t
        out[won] = label
    return out


@dataclass(frozen=True)
class PseudoSplit:
    """Target indices split into voted candidates and unvoted residuals."""

    can_idx: np.ndarray
    y_can: np.ndarray
    res_idx: np.ndarray

    @property
    def n(self):
        return self.can_idx.size + self.res_idx.size

    @property
    def empty(self):
        return self.can_idx.size == 0


def split_by_vote(target, votes):
    """Partition target samples by whether the vote produced a label.

    ``target`` may be an :class:`UnlabeledDataset` or a plain matrix; only
    its row count is used. Original order is kept within each part.
    """
    n = target.n if isinstance(target, UnlabeledDataset) else np.asarray(target).shape[0]
    votes = check_labels(votes, n, "votes")
    can = np.flatnonzero(votes >= 0)
    res = np.flatnonzero(votes < 0)
    return PseudoSplit(can, votes[can], res)
