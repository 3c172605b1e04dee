"""Group DRO with per-group Wasserstein uncertainty sets."""
from .model import ModelParams, init_params
from .robust import RobustConfig, robust_group_loss, worst_case_perturbation
from .trainer import METHODS, TrainConfig, train
from .metrics import MetricsReport, evaluate

__all__ = [
    "METHODS",
    "MetricsReport",
    "ModelParams",
    "RobustConfig",
    "TrainConfig",
    "evaluate",
    "init_params",
    "robust_group_loss",
    "train",
    "worst_case_perturbation",
]
__version__ = "0.1.0"
