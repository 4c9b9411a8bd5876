"""Kernel subspace learning that minimises (intra-class) MMD.

The projection ``W`` solves::

    min_W  tr(W^T K L K W) + lam * tr(W^T W)   s.t.  W^T K H K W = I

whose stationarity condition is the generalized eigenproblem
``(K L K + lam I) w = phi (K H K) w``; ``W`` holds the ``m`` eigenvectors
with the smallest ``phi``. ``L`` is either the sum of per-class MMD
matrices (stratified transfer) or a single whole-domain MMD matrix
(global shift).

Both sides are symmetric. The left side is positive definite whenever
``lam > 0``, while ``K H K`` is rank deficient, so the solvers work on the
reciprocal pencil ``(K H K) w = mu (K L K + lam I) w`` and take its largest
``mu = 1 / phi``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, eigsh
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_labels, check_matrix, check_same_width, check_square
from .exceptions import InvalidInput, NumericalFailure
from .kernel import KernelSpec, gram
from .mmd import CenteringMatrix, IntraClassMMDMatrix, centering, global_mmd_matrix, intra_class_matrix

DENSE_LIMIT = 1500
COMPLEX_TOL = 1e-8


@dataclass(frozen=True)
class TransferConfig:
    """Settings for the subspace solve.

    Parameters
    ----------
    m : int
        Number of projection directions.
    lambda_ : float
        Weight of the ``tr(W^T W)`` regulariser.
    eps : float or None
        Ridge added to ``K H K``. None means ``1e-9 * tr(K H K) / n``.
    dense_limit : int
        Problems with more stacked samples than this use a Lanczos solver.
    """

    m: int = 30
    lambda_: float = 1.0
    eps: float | None = None
    dense_limit: int = DENSE_LIMIT

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise InvalidInput(f"m must be a positive integer, got {self.m}")
        if not self.lambda_ >= 0:
            raise InvalidInput(f"lambda_ must be non-negative, got {self.lambda_}")
        if self.eps is not None and not self.eps >= 0:
            raise InvalidInput(f"eps must be non-negative, got {self.eps}")


@dataclass(frozen=True)
class TransformMatrix:
    """Projection ``W`` (n, m) and its eigenvalues in ascending order."""

    W: np.ndarray
    eigenvalues: np.ndarray
    n_source: int | None = None

    @property
    def m(self):
        return self.W.shape[1]


@dataclass(frozen=True)
class TransformedData:
    """``Z = W^T K`` with one column per stacked sample."""

    Z: np.ndarray
    n_source: int

    @property
    def source(self):
        """Source samples as rows, shape (n1, m)."""
        return self.Z[:, : self.n_source].T

    @property
    def target(self):
        """Candidate samples as rows, shape (n2, m)."""
        return self.Z[:, self.n_source:].T


def _fix_signs(W):
    """Flip columns so the first clearly nonzero entry is positive."""
    W = W.copy()
    for j in range(W.shape[1]):
        col = W[:, j]
        scale = np.max(np.abs(col))
        if scale == 0:
            continue
        first = np.flatnonzero(np.abs(col) > 1e-10 * scale)[0]
        if col[first] < 0:
            W[:, j] = -col
    return W


def _normalize_columns(W, B, tol):
    """Scale columns to ``w^T B w = 1``; unit Euclidean norm where that form is <= tol."""
    q = np.einsum("ij,ij->j", W, B @ W)
    scale = np.where(q > tol, np.sqrt(np.abs(q)), np.linalg.norm(W, axis=0))
    scale[scale == 0] = 1.0
    return W / scale


def smallest_generalized_eigenpairs(A, B, m):
    """The ``m`` smallest eigenpairs of the symmetric pencil ``A w = phi B w``.

    Parameters
    ----------
    A, B : ndarray of shape (n, n)
        Symmetric; at least one of them must be positive definite.
    m : int
        Number of eigenpairs, ``1 <= m <= n``.

    Returns
    -------
    phi : ndarray of shape (m,)
        Ascending eigenvalues.
    W : ndarray of shape (n, m)
        Eigenvectors scaled so that ``w^T B w = 1`` (unit norm where that
        form is not positive), with the first nonzero entry positive.
    """
    A = check_square(A, "A")
    B = check_square(B, "B")
    n = A.shape[0]
    if B.shape != A.shape:
        raise InvalidInput("A and B must have the same shape")
    if not 1 <= m <= n:
        raise InvalidInput(f"m must lie in [1, {n}], got {m}")
    A = 0.5 * (A + A.T)
    B = 0.5 * (B + B.T)
    try:
        # reciprocal pencil: A positive definite, largest mu = 1/phi wanted
        mu, V = scipy.linalg.eigh(B, A, subset_by_index=[n - m, n - 1])
        if np.any(mu <= 0):
            raise np.linalg.LinAlgError("non-positive reciprocal eigenvalue")
        phi, W = 1.0 / mu[::-1], V[:, ::-1]
    except (np.linalg.LinAlgError, ValueError):
        try:
            phi, W = scipy.linalg.eigh(A, B, subset_by_index=[0, m - 1])
        except (np.linalg.LinAlgError, ValueError):
            phi, W = _general_pencil(A, B, m)
    tol = 1e-12 * max(1.0, np.trace(B) / n)
    W = _fix_signs(_normalize_columns(W, B, tol))
    return phi, W


def _general_pencil(A, B, m):
    try:
        vals, vecs = scipy.linalg.eig(A, B)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailure(f"generalized eigensolver failed: {exc}") from exc
    finite = np.isfinite(vals)
    vals, vecs = vals[finite], vecs[:, finite]
    if vals.size < m:
        raise NumericalFailure("pencil has fewer finite eigenvalues than requested")
    order = np.argsort(vals.real, kind="stable")[:m]
    vals, vecs = vals[order], vecs[:, order]
    if np.any(np.abs(vals.imag) > COMPLEX_TOL * np.maximum(1.0, np.abs(vals.real))):
        raise NumericalFailure("pencil has complex eigenvalues among the smallest")
    return vals.real, np.real(vecs)


def _inverse_sqrt_low_rank(V, lam):
    """Operator for ``(lam I + V V^T)^{-1/2}``."""
    Q, s, _ = np.linalg.svd(V, full_matrices=False)
    keep = s > 1e-14 * max(1.0, s.max(initial=0.0))
    Q, s = Q[:, keep], s[keep]
    coef = 1.0 / np.sqrt(lam + s * s) - 1.0 / np.sqrt(lam)
    root = 1.0 / np.sqrt(lam)

    def apply(x):
        return root * x + Q @ (coef[:, None] * (Q.T @ x))

    return apply


def _lanczos_solve(K, factor, lam, eps, m):
    n = K.shape[0]
    a_inv_half = _inverse_sqrt_low_rank(K @ factor, lam)

    def matmat(x):
        x = x.reshape(n, -1)
        y = a_inv_half(x)
        ky = K @ y
        ky -= ky.mean(axis=0, keepdims=True)
        return a_inv_half(K @ ky + eps * y)

    op = LinearOperator((n, n), matvec=matmat, matmat=matmat, dtype=float)
    v0 = np.random.default_rng(0).standard_normal(n)
    try:
        mu, V = eigsh(op, k=m, which="LA", v0=v0, tol=0.0)
    except (ArpackError, ArpackNoConvergence) as exc:
        raise NumericalFailure(f"Lanczos solver failed: {exc}") from exc
    order = np.argsort(-mu, kind="stable")
    mu, V = mu[order], V[:, order]
    if np.any(mu <= 0):
        raise NumericalFailure("non-positive eigenvalue in reciprocal pencil")
    return 1.0 / mu, a_inv_half(V)


def _check_inputs(K, L, H):
    K = check_square(K, "K")
    n = K.shape[0]
    if not np.all(np.isfinite(K)):
        raise InvalidInput("K contains non-finite values")
    if L.n != n:
        raise InvalidInput(f"L is {L.n}x{L.n} but K is {n}x{n}")
    if H is not None and H.n != n:
        raise InvalidInput(f"H is {H.n}x{H.n} but K is {n}x{n}")
    return K


def solve_stl_transform(K, L, H=None, cfg=TransferConfig()):
    """Solve for the projection minimising the summed per-class MMD.

    Parameters
    ----------
    K : ndarray of shape (n, n)
        Kernel over stacked source and candidate samples.
    L : IntraClassMMDMatrix
        Per-class MMD factors for the same ordering.
    H : CenteringMatrix, optional
        Defaults to ``centering(n)``.
    cfg : TransferConfig

    Returns
    -------
    TransformMatrix
        Columns satisfy ``w^T (K H K) w = 1`` and are ordered by ascending
        eigenvalue.
    """
    K = _check_inputs(K, L, H)
    n = K.shape[0]
    if cfg.m > n:
        raise InvalidInput(f"m={cfg.m} exceeds the number of stacked samples {n}")
    H = H if H is not None else centering(n)

    HK = H.apply(K)
    khk_trace = float(np.sum(HK * HK))
    eps = cfg.eps if cfg.eps is not None else 1e-9 * khk_trace / n
    lam = cfg.lambda_ if cfg.lambda_ > 0 else max(eps, np.finfo(float).tiny)

    V = K @ L.factor
    if n <= cfg.dense_limit or cfg.m >= n - 1:
        A = V @ V.T
        A[np.diag_indices(n)] += lam
        B = K @ HK
        B = 0.5 * (B + B.T)
        B[np.diag_indices(n)] += eps
        try:
            mu, vecs = scipy.linalg.eigh(B, A, subset_by_index=[n - cfg.m, n - 1])
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalFailure(f"generalized eigensolver failed: {exc}") from exc
        if np.any(mu <= 0):
            raise NumericalFailure("non-positive eigenvalue in reciprocal pencil")
        phi, W = 1.0 / mu[::-1], vecs[:, ::-1]
    else:
        phi, W = _lanczos_solve(K, L.factor, lam, eps, cfg.m)

    KW = K @ W
    HKW = KW - KW.mean(axis=0, keepdims=True)
    q = np.sum(KW * HKW, axis=0)
    tol = max(eps, 1e-300)
    scale = np.where(q > tol, np.sqrt(np.abs(q)), np.linalg.norm(W, axis=0))
    scale[scale == 0] = 1.0
    W = _fix_signs(W / scale)
    return TransformMatrix(W, phi, L.n_source)


def solve_global_transform(K, L_global=None, H=None, cfg=TransferConfig(), n_source=None):
    """Projection minimising the whole-domain MMD (a global shift).

    ``L_global`` defaults to :func:`global_mmd_matrix` built from
    ``n_source``.
    """
    if L_global is None:
        if n_source is None:
            raise InvalidInput("pass L_global or n_source")
        L_global = global_mmd_matrix(n_source, np.asarray(K).shape[0] - n_source)
    return solve_stl_transform(K, L_global, H, cfg)


def project(K, W, n_source=None):
    """``Z = W^T K``; ``n_source`` defaults to the value stored on ``W``."""
    K = np.asarray(K, dtype=float)
    Wm = W.W if isinstance(W, TransformMatrix) else np.asarray(W, dtype=float)
    if K.ndim != 2 or Wm.ndim != 2 or Wm.shape[0] != K.shape[0]:
        raise InvalidInput(f"cannot project K {K.shape} with W {Wm.shape}")
    if n_source is None:
        n_source = W.n_source if isinstance(W, TransformMatrix) else None
    if n_source is None:
        n_source = K.shape[1]
    return TransformedData(Wm.T @ K, int(n_source))


def transformed_mmd(Z, L):
    """Summed per-class MMD of the projected columns, ``tr(Z L Z^T)``."""
    Zm = Z.Z if isinstance(Z, TransformedData) else np.asarray(Z)
    return L.quadratic_trace(Zm.T)


def pca_baseline(X, m):
    """Project mean-centred ``X`` onto its top ``m`` principal axes.

    Each axis is signed so that its largest-magnitude loading is positive.
    """
    X = check_matrix(X, "X")
    n, d = X.shape
    if not 1 <= m <= d:
        raise InvalidInput(f"m must lie in [1, {d}], got {m}")
    if m > n:
        raise InvalidInput(f"m={m} exceeds the number of samples {n}")
    Xc = X - X.mean(axis=0)
    _, _, Vt = np.linalg.svd(Xc, full_matrices=False)
    comps = Vt[:m]
    signs = np.sign(comps[np.arange(m), np.argmax(np.abs(comps), axis=1)])
    signs[signs == 0] = 1.0
    return Xc @ (comps * signs[:, None]).T


class IntraClassTransfer(BaseEstimator, TransformerMixin):
    """Learn a kernel subspace that aligns source and target class by class.

    Without target labels the whole target is one class, which yields the
    global-shift projection.

    Parameters
    ----------
    n_components : int, default=30
    lambda_ : float, default=1.0
    kernel : {"rbf", "linear"}, default="rbf"
    bandwidth : float or "median", default="median"
    eps : float or None, default=None
        Ridge on ``K H K``; see :class:`TransferConfig`.

    Attributes
    ----------
    X_fit_ : ndarray of shape (n1 + n2, d)
        Stacked source and target samples.
    kernel_spec_ : KernelSpec
        Kernel with its bandwidth resolved.
    transform_ : TransformMatrix
    embedding_ : ndarray of shape (n1 + n2, n_components)
        Projected training samples, source rows first.
    n_source_ : int
    """

    def __init__(self, n_components=30, lambda_=1.0, kernel="rbf", bandwidth="median", eps=None):
        self.n_components = n_components
        self.lambda_ = lambda_
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.eps = eps

    def fit(self, X, y, X_target, y_target=None):
        Xs = check_matrix(X, "X")
        Xt = check_matrix(X_target, "X_target")
        check_same_width(Xs, Xt, ("X", "X_target"))
        ys = check_labels(y, Xs.shape[0])
        stacked = np.vstack([Xs, Xt])
        spec = KernelSpec(self.kernel, self.bandwidth).resolve(stacked)
        K = gram(stacked, spec)
        if y_target is None:
            L = global_mmd_matrix(Xs.shape[0], Xt.shape[0])
        else:
            L = intra_class_matrix(ys, check_labels(y_target, Xt.shape[0], "y_target"))
        cfg = TransferConfig(self.n_components, self.lambda_, self.eps)
        self.transform_ = solve_stl_transform(K, L, CenteringMatrix(K.shape[0]), cfg)
        self.X_fit_ = stacked
        self.kernel_spec_ = spec
        self.n_source_ = Xs.shape[0]
        self.n_features_in_ = Xs.shape[1]
        self.embedding_ = project(K, self.transform_).Z.T
        return self

    def transform(self, X):
        """Project new samples through the kernel against the training set."""
        check_is_fitted(self, "transform_")
        X = check_matrix(X, "X", allow_empty=True)
        if X.shape[1] != self.n_features_in_:
            raise InvalidInput(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        if X.shape[0] == 0:
            return np.empty((0, self.transform_.m))
        return (self.transform_.W.T @ gram(self.X_fit_, self.kernel_spec_, X)).T
