"""Unsupervised segmentation and classification of ring-transfer actions
from robot kinematics and scene fluents."""

from .config import PipelineConfig
from .evaluator import EvalReport, classify, evaluate, matching_score, prepare_dataset
from .features import FeatureConfig, SegmentFeatures, build_features
from .fluents import Fluent, Predicate, compute_fluents
from .knn import FeatureMask, choose_k, knn_retrieve, mixed_distance
from .segmenter import Segment, SegmenterConfig, segment
from .trace import Action, Arm, Color, ExecutionTrace, load_trace, save_trace

__version__ = "0.1.0"

__all__ = [
    "Action",
    "Arm",
    "Color",
    "EvalReport",
    "ExecutionTrace",
    "FeatureConfig",
    "FeatureMask",
    "Fluent",
    "PipelineConfig",
    "Predicate",
    "Segment",
    "SegmentFeatures",
    "SegmenterConfig",
    "build_features",
    "choose_k",
    "classify",
    "compute_fluents",
    "evaluate",
    "knn_retrieve",
    "load_trace",
    "matching_score",
    "mixed_distance",
    "prepare_dataset",
    "save_trace",
    "segment",
]
