"""Stratified transfer: vote, align class by class, re-annotate, repeat.

One run:

1. Base classifiers trained on the source vote on every target sample.
   Samples with a strict majority become candidates carrying that pseudo
   label; the rest are residuals.
2. Source and candidates are stacked, the per-class MMD projection is
   solved, and both are mapped into the learned subspace.
3. A final classifier trained on projected source labels the projected
   candidates. A second classifier trained on the candidates' raw features
   and those new labels labels the residuals.
4. From the second round on, every target sample is a candidate carrying
   its current label. Rounds repeat until no label changes or the
   iteration cap is reached. Voting happens only once.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_labels, check_matrix, check_same_width
from .classify import (
    ClassifierModel,
    PseudoSplit,
    default_base_classifiers,
    majority_vote,
    split_by_vote,
)
from .datasets import LabeledDataset, UnlabeledDataset
from .exceptions import InvalidInput, NumericalFailure
from .kernel import KernelSpec, gram
from .mmd import centering, intra_class_matrix
from .transfer import TransferConfig, TransformedData, project, solve_stl_transform, transformed_mmd

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class STLConfig:
    transfer: TransferConfig = field(default_factory=TransferConfig)
    kernel: KernelSpec = field(default_factory=KernelSpec)
    base_classifiers: tuple = field(default_factory=default_base_classifiers)
    final_classifier: ClassifierModel = field(default_factory=ClassifierModel)
    T: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.T < 1:
            raise InvalidInput(f"T must be at least 1, got {self.T}")
        if len(self.base_classifiers) < 1:
            raise InvalidInput("need at least one base classifier")
        object.__setattr__(self, "base_classifiers", tuple(self.base_classifiers))

    def final_model(self):
        return self.final_classifier.with_seed(self.seed)


@dataclass(frozen=True)
class IterationRecord:
    """Diagnostics for one refinement round.

    ``mmd`` is the summed per-class MMD of the projected samples under the
    labels that entered the solve. ``changed`` counts target labels that
    differ from the previous round (round 1 compares against the vote,
    where residuals count as changed).
    """

    iteration: int
    mmd: float
    changed: int
    n_candidates: int
    n_residuals: int
    bandwidth: float | None = None
    candidate_accuracy: float | None = None


@dataclass(frozen=True)
class STLResult:
    y_t: np.ndarray
    per_iteration: tuple = ()
    fallback: bool = False
    votes: np.ndarray | None = None

    @property
    def n_iterations(self):
        return len(self.per_iteration)

    @property
    def converged(self):
        return bool(self.per_iteration) and self.per_iteration[-1].changed == 0

    @property
    def changed_counts(self):
        return [rec.changed for rec in self.per_iteration]


@dataclass
class _Solution:
    """Artifacts of the last round, kept for out-of-sample prediction."""

    stacked: np.ndarray
    kernel: KernelSpec
    W: np.ndarray
    n_source: int


def second_annotation(Z, y_src, X_can_raw, X_res_raw, cfg=STLConfig()):
    """Relabel candidates in the subspace, then label residuals from them.

    Parameters
    ----------
    Z : TransformedData
        Projected source columns followed by candidate columns.
    y_src : array-like of shape (n1,)
    X_can_raw, X_res_raw : array-like
        Candidate and residual features in the original space.
    cfg : STLConfig
        Supplies the final classifier and seed.

    Returns
    -------
    y_can : ndarray of shape (n_can,)
    y_res : ndarray of shape (n_res,)
    """
    y_src = check_labels(y_src, Z.n_source, "y_src")
    model = cfg.final_model()
    y_can = model.build().fit(Z.source, y_src).predict(Z.target)
    X_res_raw = check_matrix(X_res_raw, "X_res_raw", allow_empty=True)
    if X_res_raw.shape[0] == 0:
        return y_can, np.empty(0, dtype=np.int64)
    X_can_raw = check_matrix(X_can_raw, "X_can_raw")
    if np.unique(y_can).size == 1:
        return y_can, np.full(X_res_raw.shape[0], y_can[0], dtype=np.int64)
    y_res = model.build().fit(X_can_raw, y_can).predict(X_res_raw)
    return y_can, y_res


def refresh_candidates(y_t):
    """Every target sample becomes a candidate carrying its current label."""
    y_t = check_labels(y_t, name="y_t")
    if np.any(y_t < 0):
        raise InvalidInput("refreshed labels must all be non-negative")
    return PseudoSplit(np.arange(y_t.size), y_t.copy(), np.empty(0, dtype=np.int64))


def vote(src, tgt, cfg):
    """Base-classifier predictions on the target, shape (t, n_t)."""
    rows = []
    for i, model in enumerate(cfg.base_classifiers):
        clf = model.with_seed(cfg.seed + i).build().fit(src.X, src.y)
        rows.append(clf.predict(tgt.X))
    return np.vstack(rows)


def _accuracy(y_true, y_pred):
    return float(np.mean(y_true == y_pred)) if y_true.size else None


def _run(src, tgt, cfg, y_true=None):
    if not isinstance(tgt, UnlabeledDataset):
        tgt = UnlabeledDataset(getattr(tgt, "X", tgt))
    check_same_width(src.X, tgt.X, ("source", "target"))
    if y_true is not None:
        y_true = check_labels(y_true, tgt.n, "y_true")

    if np.unique(src.y).size < 2:
        label = int(src.y[0])
        return STLResult(np.full(tgt.n, label, dtype=np.int64), (), True), None

    votes = majority_vote(vote(src, tgt, cfg))
    split = split_by_vote(tgt, votes)
    if split.empty:
        logger.warning("no target sample reached a majority; labelling from source only")
        clf = cfg.final_model().build().fit(src.X, src.y)
        return STLResult(clf.predict(tgt.X), (), True, votes), None

    classes = np.arange(src.C)
    y_prev = votes
    records = []
    solution = None
    for it in range(1, cfg.T + 1):
        X_can = tgt.X[split.can_idx]
        stacked = np.vstack([src.X, X_can])
        spec = cfg.kernel.resolve(stacked)
        K = gram(stacked, spec)
        L = intra_class_matrix(src.y, split.y_can, classes)
        H = centering(stacked.shape[0])
        try:
            tm = solve_stl_transform(K, L, H, cfg.transfer)
        except NumericalFailure as exc:
            raise NumericalFailure(str(exc), iteration=it) from exc
        Z = project(K, tm)

        y_can, y_res = second_annotation(Z, src.y, X_can, tgt.X[split.res_idx], cfg)
        y_t = np.empty(tgt.n, dtype=np.int64)
        y_t[split.can_idx] = y_can
        y_t[split.res_idx] = y_res

        changed = int(np.count_nonzero(y_t != y_prev))
        records.append(IterationRecord(
            iteration=it,
            mmd=transformed_mmd(Z, L),
            changed=changed,
            n_candidates=int(split.can_idx.size),
            n_residuals=int(split.res_idx.size),
            bandwidth=spec.bandwidth if spec.kind == "rbf" else None,
            candidate_accuracy=None if y_true is None else _accuracy(y_true[split.can_idx], y_can),
        ))
        logger.debug("iteration %d: %d labels changed", it, changed)
        solution = _Solution(stacked, spec, tm.W, src.n)
        y_prev = y_t
        if changed == 0:
            break
        split = refresh_candidates(y_t)

    return STLResult(y_prev, tuple(records), False, votes), solution


def run_stl(src, tgt, cfg=STLConfig(), y_true=None):
    """Label an unlabeled target domain from a labeled source.

    Parameters
    ----------
    src : LabeledDataset
    tgt : UnlabeledDataset or array-like of shape (n_t, d)
    cfg : STLConfig
    y_true : array-like of shape (n_t,), optional
        Ground truth, used only for the per-round candidate accuracy.

    Returns
    -------
    STLResult
        ``fallback`` is set when no target sample won a majority (the
        final classifier then labels the raw target directly) or when the
        source holds a single class.

    Raises
    ------
    NumericalFailure
        With ``iteration`` set to the failing round.
    """
    return _run(src, tgt, cfg, y_true)[0]


class StratifiedTransferClassifier(ClassifierMixin, BaseEstimator):
    """Transductive classifier for an unlabeled target domain.

    ``fit`` takes the labeled source and the unlabeled target together and
    stores the target labeling in ``labels_``. ``predict`` projects new
    samples through the last learned subspace and applies the final
    classifier.

    Parameters
    ----------
    n_components : int, default=30
    lambda_ : float, default=1.0
    kernel : {"rbf", "linear"}, default="rbf"
    bandwidth : float or "median", default="median"
    max_iter : int, default=10
    base_classifiers : sequence of ClassifierModel, optional
        Defaults to kNN (k=3), nearest centroid and a 30-tree forest.
    final_classifier : ClassifierModel, optional
        Defaults to a 30-tree forest.
    random_state : int, default=0

    Attributes
    ----------
    labels_ : ndarray of shape (n_target,)
    result_ : STLResult
    classes_ : ndarray
    """

    def __init__(self, n_components=30, lambda_=1.0, kernel="rbf", bandwidth="median",
                 max_iter=10, base_classifiers=None, final_classifier=None, random_state=0):
        self.n_components = n_components
        self.lambda_ = lambda_
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.max_iter = max_iter
        self.base_classifiers = base_classifiers
        self.final_classifier = final_classifier
        self.random_state = random_state

    def _config(self):
        return STLConfig(
            transfer=TransferConfig(self.n_components, self.lambda_),
            kernel=KernelSpec(self.kernel, self.bandwidth),
            base_classifiers=tuple(self.base_classifiers or default_base_classifiers()),
            final_classifier=self.final_classifier or ClassifierModel(),
            T=self.max_iter,
            seed=self.random_state,
        )

    def fit(self, X, y, X_target):
        src = LabeledDataset(X, y)
        tgt = UnlabeledDataset(X_target)
        cfg = self._config()
        self.result_, self._solution = _run(src, tgt, cfg)
        self.labels_ = self.result_.y_t
        self.classes_ = np.unique(src.y)
        self.n_features_in_ = src.d
        model = cfg.final_model().build()
        if self._solution is None:
            self._final = model.fit(src.X, src.y)
        else:
            sol = self._solution
            K = gram(sol.stacked, sol.kernel)
            Z = TransformedData(sol.W.T @ K, sol.n_source)
            self._final = model.fit(Z.source, src.y)
        return self

    def fit_predict(self, X, y, X_target):
        return self.fit(X, y, X_target).labels_

    def transform(self, X):
        """Coordinates of ``X`` in the last learned subspace."""
        check_is_fitted(self, "result_")
        X = check_matrix(X, "X", allow_empty=True)
        if self._solution is None:
            raise InvalidInput("no subspace was learned (source-only fallback)")
        sol = self._solution
        if X.shape[0] == 0:
            return np.empty((0, sol.W.shape[1]))
        return (sol.W.T @ gram(sol.stacked, sol.kernel, X)).T

    def predict(self, X):
        check_is_fitted(self, "result_")
        X = check_matrix(X, "X", allow_empty=True)
        if X.shape[0] and X.shape[1] != self.n_features_in_:
            raise InvalidInput(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        if self._solution is None:
            return self._final.predict(X)
        return self._final.predict(self.transform(X))
