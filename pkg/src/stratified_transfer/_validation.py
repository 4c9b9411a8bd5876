"""Input validation helpers shared by the estimators and functional API."""

import numpy as np

from .exceptions import EmptyInput, InvalidInput


def check_matrix(X, name="X", min_rows=1, allow_empty=False):
    """Return ``X`` as a finite 2-D float array.

    A 1-D input is treated as a single column. Raises :class:`EmptyInput`
    when there are fewer than ``min_rows`` rows (unless ``allow_empty`` and
    the array has zero rows) and :class:`InvalidInput` for non-finite
    entries or a wrong number of dimensions.
    """
    try:
        X = np.asarray(X, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"{name} is not numeric: {exc}") from exc
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InvalidInput(f"{name} must be 2-D, got {X.ndim}-D")
    if X.shape[0] == 0 and allow_empty:
        return X
    if X.shape[0] < min_rows:
        raise EmptyInput(f"{name} needs at least {min_rows} row(s), got {X.shape[0]}")
    if not np.all(np.isfinite(X)):
        raise InvalidInput(f"{name} contains non-finite values")
    return X


def check_labels(y, n=None, name="y"):
    """Return ``y`` as a 1-D int64 array, optionally checking its length."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise InvalidInput(f"{name} must be 1-D")
    if y.size and not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.isfinite(y.astype(float))) or np.any(y != np.round(y)):
            raise InvalidInput(f"{name} must hold integer labels")
    y = y.astype(np.int64)
    if n is not None and y.shape[0] != n:
        raise InvalidInput(f"{name} has length {y.shape[0]}, expected {n}")
    return y


def check_same_width(A, B, names=("A", "B")):
    if A.shape[1] != B.shape[1]:
        raise InvalidInput(
            f"{names[0]} has {A.shape[1]} columns but {names[1]} has {B.shape[1]}"
        )


def check_square(M, name="M"):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInput(f"{name} must be square, got shape {M.shape}")
    return M
