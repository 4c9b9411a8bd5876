"""Stratified transfer learning for cross-domain classification."""

from .classify import (
    ClassifierModel,
    KNNClassifier,
    NearestCentroidClassifier,
    PseudoSplit,
    TreeClassifier,
    VotingForestClassifier,
    majority_vote,
    split_by_vote,
)
from .datasets import LabeledDataset, UnlabeledDataset
from .exceptions import (
    DegenerateInput,
    EmptyInput,
    InvalidInput,
    NumericalFailure,
    ParseError,
    STLError,
)
from .features import WindowFeatureExtractor, extract_features, magnitude, slide_windows
from .kernel import KernelSpec, gram, median_bandwidth
from .mmd import build_lc, centering, intra_class_matrix, intra_class_mmd, mmd_distance
from .pipeline import STLConfig, STLResult, StratifiedTransferClassifier, run_stl
from .transfer import (
    IntraClassTransfer,
    TransferConfig,
    pca_baseline,
    project,
    solve_global_transform,
    solve_stl_transform,
)

__version__ = "0.1.0"

__all__ = [
    "ClassifierModel",
    "DegenerateInput",
    "EmptyInput",
    "IntraClassTransfer",
    "InvalidInput",
    "KNNClassifier",
    "KernelSpec",
    "LabeledDataset",
    "NearestCentroidClassifier",
    "NumericalFailure",
    "ParseError",
    "PseudoSplit",
    "STLConfig",
    "STLError",
    "STLResult",
    "StratifiedTransferClassifier",
    "TransferConfig",
    "TreeClassifier",
    "UnlabeledDataset",
    "VotingForestClassifier",
    "WindowFeatureExtractor",
    "build_lc",
    "centering",
    "extract_features",
    "gram",
    "intra_class_matrix",
    "intra_class_mmd",
    "magnitude",
    "majority_vote",
    "median_bandwidth",
    "mmd_distance",
    "pca_baseline",
    "project",
    "run_stl",
    "slide_windows",
    "solve_global_transform",
    "solve_stl_transform",
    "split_by_vote",
]
