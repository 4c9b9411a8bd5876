"""Labeled and unlabeled feature matrices."""

from dataclasses import dataclass

import numpy as np

from ._validation import check_labels, check_matrix
from .exceptions import InvalidInput


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix ``X`` (n, d) with integer labels ``y`` in ``0..C-1``.

    ``C`` defaults to ``max(y) + 1``.
    """

    X: np.ndarray
    y: np.ndarray
    C: int | None = None

    def __post_init__(self):
        X = check_matrix(self.X, "X")
        y = check_labels(self.y, X.shape[0])
        if y.min() < 0:
            raise InvalidInput("labels must be non-negative")
        C = int(y.max()) + 1 if self.C is None else int(self.C)
        if y.max() >= C:
            raise InvalidInput(f"label {y.max()} out of range for C={C}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "C", C)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def subset(self, idx):
        return LabeledDataset(self.X[idx], self.y[idx], self.C)


@dataclass(frozen=True)
class UnlabeledDataset:
    X: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "X", check_matrix(self.X, "X"))

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]
