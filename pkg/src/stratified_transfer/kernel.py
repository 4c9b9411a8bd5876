"""Gram matrices over stacked source and candidate samples."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from ._validation import check_matrix, check_same_width
from .exceptions import DegenerateInput, InvalidInput

KERNELS = ("linear", "rbf")
MEDIAN = "median"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and bandwidth.

    ``bandwidth`` is a positive float or the string ``"median"``, which is
    resolved per call from the samples (rbf only; ignored for linear).
    """

    kind: str = "rbf"
    bandwidth: float | str = MEDIAN

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise InvalidInput(f"unknown kernel {self.kind!r}; expected one of {KERNELS}")
        if isinstance(self.bandwidth, str):
            if self.bandwidth != MEDIAN:
                raise InvalidInput(f"bandwidth must be a positive number or {MEDIAN!r}")
        elif not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise InvalidInput(f"bandwidth must be positive, got {self.bandwidth}")

    def resolve(self, samples):
        """Return a spec with a numeric bandwidth fitted to ``samples``."""
        if self.kind == "rbf" and self.bandwidth == MEDIAN:
            return KernelSpec("rbf", median_bandwidth(samples))
        return self


def median_bandwidth(samples):
    """Median of all pairwise Euclidean distances (i < j)."""
    X = check_matrix(samples, "samples", min_rows=2)
    sigma = float(np.median(pdist(X)))
    if sigma <= 0:
        # more than half the pairs coincide; fall back to the nonzero ones
        d = pdist(X)
        d = d[d > 0]
        if d.size == 0:
            raise DegenerateInput("all samples are identical; bandwidth undefined")
        sigma = float(np.median(d))
    return sigma


def gram(samples, spec=KernelSpec(), other=None):
    """Kernel matrix between rows of ``samples`` (and ``other`` if given).

    Parameters
    ----------
    samples : array-like of shape (n, d)
    spec : KernelSpec
        A ``"median"`` bandwidth is resolved on ``samples``.
    other : array-like of shape (p, d), optional
        When given, the (n, p) cross-kernel is returned instead.

    Returns
    -------
    K : ndarray
        Symmetric (n, n) when ``other`` is None.
    """
    X = check_matrix(samples, "samples")
    spec = spec.resolve(X)
    Y = X if other is None else check_matrix(other, "other", allow_empty=True)
    if other is not None:
        check_same_width(X, Y, ("samples", "other"))

    if spec.kind == "linear":
        K = X @ Y.T
    else:
        K = np.exp(-cdist(X, Y, "sqeuclidean") / (2.0 * spec.bandwidth ** 2))
    if other is None:
        K = 0.5 * (K + K.T)
        if spec.kind == "rbf":
            np.fill_diagonal(K, 1.0)
    return K
