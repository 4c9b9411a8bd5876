"""Maximum mean discrepancy and the matrices behind the transfer objective.

Sample ordering contract: in every stacked matrix the source rows come
first (indices ``0..n1-1``) and the candidate rows after them.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_labels, check_matrix, check_same_width
from .exceptions import InvalidInput
from .kernel import KernelSpec, gram


def mmd_distance(Xs, Xt, spec=KernelSpec()):
    """Squared distance between the kernel mean embeddings of two sample sets.

    A ``"median"`` bandwidth is resolved on the union of both sets. Small
    negative values caused by rounding are clamped to 0.
    """
    Xs = check_matrix(Xs, "Xs")
    Xt = check_matrix(Xt, "Xt")
    check_same_width(Xs, Xt, ("Xs", "Xt"))
    spec = spec.resolve(np.vstack([Xs, Xt]))
    value = (
        gram(Xs, spec).mean()
        - 2.0 * gram(Xs, spec, Xt).mean()
        + gram(Xt, spec).mean()
    )
    return max(float(value), 0.0)


def intra_class_mmd(src, can, spec=KernelSpec()):
    """Sum over classes of the MMD between source and candidate samples.

    Parameters
    ----------
    src, can : LabeledDataset
        Source data and candidates with (pseudo) labels.
    spec : KernelSpec
        One bandwidth, resolved on all samples together, is shared by every
        class term.

    Classes present on only one side contribute 0.
    """
    check_same_width(src.X, can.X, ("src", "can"))
    spec = spec.resolve(np.vstack([src.X, can.X]))
    total = 0.0
    for c in np.intersect1d(src.y, can.y):
        total += mmd_distance(src.X[src.y == c], can.X[can.y == c], spec)
    return total


def class_weight_vector(labels_src, labels_can, c):
    """Vector ``u`` with ``u u^T`` equal to the class-``c`` MMD matrix.

    Source entries of class ``c`` are ``1/n1c``, candidate entries
    ``-1/n2c``. All zero if the class is missing on either side.
    """
    ys = np.asarray(labels_src)
    yc = np.asarray(labels_can)
    u = np.zeros(ys.size + yc.size)
    in_src = ys == c
    in_can = yc == c
    n1c, n2c = np.count_nonzero(in_src), np.count_nonzero(in_can)
    if n1c and n2c:
        u[: ys.size][in_src] = 1.0 / n1c
        u[ys.size:][in_can] = -1.0 / n2c
    return u


def build_lc(labels_src, labels_can, c):
    """Dense per-class MMD matrix over the stacked source+candidate samples.

    Entries are ``1/n1c^2`` on source pairs of class ``c``, ``1/n2c^2`` on
    candidate pairs, ``-1/(n1c n2c)`` across, and 0 elsewhere.
    """
    u = class_weight_vector(labels_src, labels_can, c)
    return np.outer(u, u)


@dataclass(frozen=True)
class IntraClassMMDMatrix:
    """Per-class MMD matrices, stored through their rank-one factors.

    ``factor`` has one column ``u_c`` per class so that
    ``L_c = u_c u_c^T`` and the sum over classes is ``factor @ factor.T``.
    Dense matrices are built only on request.
    """

    factor: np.ndarray
    classes: np.ndarray
    class_counts: dict = field(default_factory=dict)
    n_source: int | None = None

    @property
    def n(self):
        return self.factor.shape[0]

    @property
    def per_class(self):
        return {int(c): np.outer(u, u) for c, u in zip(self.classes, self.factor.T)}

    @property
    def summed(self):
        return self.factor @ self.factor.T

    def quadratic_trace(self, M):
        """``tr(M^T (sum_c L_c) M)`` without forming the dense sum."""
        P = self.factor.T @ M
        return float(np.sum(P * P))


def intra_class_matrix(labels_src, labels_can, classes=None):
    """Collect the per-class MMD factors for all ``classes``.

    ``classes`` defaults to every label seen on either side.
    """
    ys = check_labels(labels_src, name="labels_src")
    yc = check_labels(labels_can, name="labels_can")
    if classes is None:
        classes = np.union1d(ys, yc)
    classes = np.asarray(classes, dtype=np.int64)
    factor = np.zeros((ys.size + yc.size, classes.size))
    counts = {}
    for j, c in enumerate(classes):
        factor[:, j] = class_weight_vector(ys, yc, c)
        counts[int(c)] = (int(np.count_nonzero(ys == c)), int(np.count_nonzero(yc == c)))
    return IntraClassMMDMatrix(factor, classes, counts, ys.size)


def global_mmd_matrix(n1, n2):
    """MMD matrix treating each domain as a single class."""
    if n1 < 1 or n2 < 1:
        raise InvalidInput("both domains need at least one sample")
    return intra_class_matrix(np.zeros(n1, dtype=np.int64), np.zeros(n2, dtype=np.int64))


@dataclass(frozen=True)
class CenteringMatrix:
    """``H = I - (1/n) 1 1^T``, applied implicitly by :meth:`apply`."""

    n: int

    @property
    def entries(self):
        return np.eye(self.n) - np.full((self.n, self.n), 1.0 / self.n)

    def apply(self, M):
        """``H @ M``: subtract column means."""
        M = np.asarray(M, dtype=float)
        return M - M.mean(axis=0, keepdims=True)


def centering(n):
    if n < 1:
        raise InvalidInput(f"centering matrix needs n >= 1, got {n}")
    return CenteringMatrix(int(n))
