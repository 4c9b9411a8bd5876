"""Benchmark harness: feature CSV I/O, synthetic shifts, repeated runs, reports."""

import csv
import dataclasses
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_labels
from .datasets import LabeledDataset, UnlabeledDataset
from .exceptions import EmptyInput, InvalidInput, ParseError, STLError
from .kernel import KernelSpec, gram
from .mmd import centering, global_mmd_matrix
from .pipeline import STLConfig, run_stl
from .transfer import TransferConfig, pca_baseline, project, solve_global_transform

logger = logging.getLogger(__name__)

METHODS = ("stl", "global", "pca", "source_only")
GRID_SPACING = 6.0


def accuracy(y_true, y_pred):
    """Fraction of positions where the two label sequences agree."""
    y_true = np.asarray(y_true).ravel()
    y_pred = np.asarray(y_pred).ravel()
    if y_true.shape != y_pred.shape:
        raise InvalidInput(f"length mismatch: {y_true.size} vs {y_pred.size}")
    if y_true.size == 0:
        raise EmptyInput("accuracy of an empty labeling is undefined")
    return float(np.mean(y_true == y_pred))


# --------------------------------------------------------------------- CSV


def _parse_int(cell):
    value = float(cell)
    if not value.is_integer():
        raise ValueError(f"label {cell!r} is not an integer")
    return int(value)


def load_feature_csv(path):
    """Read a feature CSV with header ``f1..fd[,label]``.

    Returns a :class:`LabeledDataset` when the last column is ``label``,
    else an :class:`UnlabeledDataset`. Row order is preserved.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("missing header row", line=1) from None
        labeled = bool(header) and header[-1].lower() == "label"
        width = len(header)
        n_feat = width - 1 if labeled else width
        if n_feat < 1:
            raise ParseError("no feature columns", line=1)
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != width:
                raise ParseError(f"expected {width} fields, got {len(row)}", line=lineno)
            try:
                rows.append([float(cell) for cell in row[:n_feat]])
                if labeled:
                    labels.append(_parse_int(row[-1]))
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
    if not rows:
        raise EmptyInput(f"{path} has no data rows")
    X = np.array(rows)
    if not np.all(np.isfinite(X)):
        raise ParseError("non-finite feature value")
    if labeled:
        return LabeledDataset(X, np.array(labels, dtype=np.int64))
    return UnlabeledDataset(X)


def write_feature_csv(path, X, y=None):
    X = np.asarray(X, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = [f"f{j}" for j in range(1, X.shape[1] + 1)]
        writer.writerow(header + (["label"] if y is not None else []))
        for i, row in enumerate(X):
            cells = [repr(float(v)) for v in row]
            if y is not None:
                cells.append(str(int(y[i])))
            writer.writerow(cells)


def load_labels_csv(path):
    """Read a single-column label file (header row first)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            next(reader)
        except StopIteration:
            raise ParseError("missing header row", line=1) from None
        labels = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                labels.append(_parse_int(row[-1]))
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
    if not labels:
        raise EmptyInput(f"{path} has no labels")
    return np.array(labels, dtype=np.int64)


def write_labels_csv(path, y):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"])
        writer.writerows([[int(v)] for v in y])


# --------------------------------------------------------------- synthetic


def class_means(classes, dim):
    """Class centres on a square grid in the first two coordinates."""
    side = math.ceil(math.sqrt(classes))
    means = np.zeros((classes, dim))
    for c in range(classes):
        means[c, 0] = GRID_SPACING * (c % side)
        if dim > 1:
            means[c, 1] = GRID_SPACING * (c // side)
        elif c >= side:
            means[c, 0] = GRID_SPACING * c
    return means


def synth_shift(classes=4, per_class=100, dim=10, shift=0.0, scale=1.0, seed=7):
    """Gaussian blobs for a source domain and a shifted, rescaled target.

    Each class is a unit-covariance Gaussian at a fixed grid centre. The
    target draws fresh samples from the same blobs and maps them through
    ``x -> scale * x + shift``. A scalar ``shift`` moves along the first
    axis only.

    Returns
    -------
    source, target : LabeledDataset
        Labels are balanced; the target's labels are ground truth for
        evaluation.
    """
    if classes < 2 or per_class < 2 or dim < 1:
        raise InvalidInput("need classes >= 2, per_class >= 2, dim >= 1")
    shift_vec = np.zeros(dim)
    shift_arr = np.atleast_1d(np.asarray(shift, dtype=float))
    if shift_arr.size == 1:
        shift_vec[0] = shift_arr[0]
    elif shift_arr.size == dim:
        shift_vec = shift_arr
    else:
        raise InvalidInput(f"shift must be a scalar or have {dim} entries")
    rng = np.random.default_rng(seed)
    means = class_means(classes, dim)
    y = np.repeat(np.arange(classes), per_class)
    Xs = means[y] + rng.standard_normal((y.size, dim))
    Xt = scale * (means[y] + rng.standard_normal((y.size, dim))) + shift_vec
    return LabeledDataset(Xs, y, classes), LabeledDataset(Xt, y.copy(), classes)


# ----------------------------------------------------------------- methods


def _stacked_baseline(src, X_tgt, cfg, embed):
    Z = embed(np.vstack([src.X, X_tgt]))
    clf = cfg.final_model().build().fit(Z[: src.n], src.y)
    return clf.predict(Z[src.n:])


def run_method(method, src, X_tgt, cfg=STLConfig(), y_true=None):
    """Label ``X_tgt`` with one of the supported methods.

    Returns
    -------
    y_pred : ndarray
    diagnostics : dict
    """
    X_tgt = UnlabeledDataset(X_tgt).X
    if method == "source_only":
        clf = cfg.final_model().build().fit(src.X, src.y)
        return clf.predict(X_tgt), {}
    if method == "stl":
        result = run_stl(src, X_tgt, cfg, y_true)
        return result.y_t, {
            "iterations": [dataclasses.asdict(r) for r in result.per_iteration],
            "fallback": result.fallback,
        }
    if method == "pca":
        m = min(cfg.transfer.m, src.d)
        return _stacked_baseline(src, X_tgt, cfg, lambda X: pca_baseline(X, m)), {"dim": m}
    if method == "global":
        def embed(X):
            spec = cfg.kernel.resolve(X)
            K = gram(X, spec)
            L = global_mmd_matrix(src.n, X.shape[0] - src.n)
            tm = solve_global_transform(K, L, centering(X.shape[0]), cfg.transfer)
            return project(K, tm).Z.T

        return _stacked_baseline(src, X_tgt, cfg, embed), {}
    raise InvalidInput(f"unknown method {method!r}; expected one of {METHODS}")


# ------------------------------------------------------------------- tasks


@dataclass
class TaskSpec:
    source_path: str
    target_path: str
    truth_path: str | None = None
    config: STLConfig = field(default_factory=STLConfig)
    method: str = "stl"
    repeats: int = 5
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.repeats < 1:
            raise InvalidInput("repeats must be at least 1")
        if self.method not in METHODS:
            raise InvalidInput(f"unknown method {self.method!r}; expected one of {METHODS}")


@dataclass
class Report:
    method: str
    accuracies: list
    per_repeat: list
    config: dict
    wall_time: float
    failures: list = field(default_factory=list)

    @property
    def mean(self):
        return float(np.mean(self.accuracies)) if self.accuracies else None

    @property
    def std(self):
        return float(np.std(self.accuracies)) if self.accuracies else None

    def to_dict(self):
        return {
            "method": self.method,
            "accuracies": self.accuracies,
            "mean": self.mean,
            "std": self.std,
            "per_repeat": self.per_repeat,
            "failures": self.failures,
            "config": self.config,
            "wall_time": self.wall_time,
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent, default=_json_default)

    def summary(self):
        lines = [f"method: {self.method}"]
        if self.accuracies:
            lines.append(
                "accuracy (%): " + ", ".join(f"{100 * a:.2f}" for a in self.accuracies)
            )
            lines.append(f"mean {100 * self.mean:.2f} +/- {100 * self.std:.2f}")
        else:
            lines.append("accuracy: n/a (no ground truth)")
        if self.failures:
            lines.append(f"failed repeats: {len(self.failures)}")
        lines.append(f"wall time: {self.wall_time:.2f}s")
        return "\n".join(lines)


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"{type(obj).__name__} is not JSON serialisable")


def thread_count():
    """Worker cap from ``STL_THREADS`` (default 1)."""
    raw = os.environ.get("STL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise InvalidInput(f"STL_THREADS must be an integer, got {raw!r}") from None


def shuffled_order(n_src, n_tgt, seed):
    """Permutations of source and target rows for one repeat."""
    rng = np.random.default_rng(seed)
    return rng.permutation(n_src), rng.permutation(n_tgt)


def run_repeats(src, X_tgt, y_true=None, cfg=STLConfig(), method="stl", repeats=5,
                shuffle_seed=0, threads=None):
    """Run ``method`` on ``repeats`` reshufflings of the same data.

    Repeat ``i`` permutes source and target rows with seed
    ``shuffle_seed + i``, so different methods see identical shuffles.
    A repeat that raises is recorded under ``failures``; if every repeat
    fails the last error is re-raised.
    """
    if method not in METHODS:
        raise InvalidInput(f"unknown method {method!r}; expected one of {METHODS}")
    if repeats < 1:
        raise InvalidInput("repeats must be at least 1")
    X_tgt = UnlabeledDataset(X_tgt).X
    if y_true is not None:
        y_true = check_labels(y_true, X_tgt.shape[0], "y_true")
    threads = thread_count() if threads is None else threads

    def one(i):
        ps, pt = shuffled_order(src.n, X_tgt.shape[0], shuffle_seed + i)
        truth = None if y_true is None else y_true[pt]
        try:
            pred, diag = run_method(method, src.subset(ps), X_tgt[pt], cfg, truth)
        except STLError as exc:
            logger.warning("repeat %d failed: %s", i, exc)
            return i, None, None, exc
        labels = np.empty_like(pred)
        labels[pt] = pred
        return i, labels, diag, None

    start = time.perf_counter()
    if threads > 1 and repeats > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one, range(repeats)))
    else:
        outcomes = [one(i) for i in range(repeats)]
    wall = time.perf_counter() - start

    accuracies, per_repeat, failures = [], [], []
    last_error = None
    for i, labels, diag, err in outcomes:
        if err is not None:
            failures.append({"repeat": i, "error": f"{type(err).__name__}: {err}"})
            last_error = err
            continue
        entry = {"repeat": i, "shuffle_seed": shuffle_seed + i}
        if y_true is not None:
            acc = accuracy(y_true, labels)
            accuracies.append(acc)
            entry["accuracy"] = acc
        else:
            entry["labels"] = labels.tolist()
        entry.update(diag)
        per_repeat.append(entry)
    if len(failures) == repeats:
        raise last_error

    config = dataclasses.asdict(cfg)
    config.update(method=method, repeats=repeats, shuffle_seed=shuffle_seed)
    return Report(method, accuracies, per_repeat, config, wall, failures)


def run_task(spec):
    """Load the task's CSVs and run :func:`run_repeats`.

    Ground truth comes from ``truth_path`` or, failing that, from a
    ``label`` column in the target file. Target labels are never shown to
    the method.
    """
    src = load_feature_csv(spec.source_path)
    if not isinstance(src, LabeledDataset):
        raise InvalidInput(f"{spec.source_path} must carry a label column")
    tgt = load_feature_csv(spec.target_path)
    y_true = load_labels_csv(spec.truth_path) if spec.truth_path else getattr(tgt, "y", None)
    if y_true is not None and y_true.size != tgt.n:
        raise InvalidInput(f"truth has {y_true.size} labels for {tgt.n} target rows")
    return run_repeats(src, tgt.X, y_true, spec.config, spec.method, spec.repeats,
                       spec.shuffle_seed)


def default_config(dim=30, lambda_=1.0, iters=10, kernel="rbf", seed=0):
    return STLConfig(
        transfer=TransferConfig(m=dim, lambda_=lambda_),
        kernel=KernelSpec(kernel),
        T=iters,
        seed=seed,
    )
