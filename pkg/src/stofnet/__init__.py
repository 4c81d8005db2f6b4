"""Sub-sample time-of-flight echo localization in 1-D signals."""
from .dataset import LabeledFrame, SyntheticConfig, TargetMask, generate_synthetic, load_dataset, save_dataset
from .detection import Detection, detect_single, nms_1d, select_threshold_gmeans
from .evaluation import EvalReport, MatchResult, benchmark, jaccard, match_detections, rmse_aggregate
from .model import ModelConfig, StofNet, count_parameters, forward, load_model, save_model
from .signal_core import Frame, Kernel1D
from .training import TrainConfig, loss, train

__version__ = "0.1.0"

__all__ = [
    "Detection",
    "EvalReport",
    "Frame",
    "Kernel1D",
    "LabeledFrame",
    "MatchResult",
    "ModelConfig",
    "StofNet",
    "SyntheticConfig",
    "TargetMask",
    "TrainConfig",
    "benchmark",
    "count_parameters",
    "detect_single",
    "forward",
    "generate_synthetic",
    "jaccard",
    "load_dataset",
    "load_model",
    "loss",
    "match_detections",
    "nms_1d",
    "rmse_aggregate",
    "save_dataset",
    "save_model",
    "select_threshold_gmeans",
    "train",
]
