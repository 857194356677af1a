"""Focal Tversky loss and attention U-Net segmentation engine."""

from . import models as models
from .ablation import default_grid, run_ablation, run_ablation_async
from .checkpoint import load_checkpoint, save_checkpoint
from .config import FTSegSettings
from .data import Sample, generate_synthetic, load_dataset, load_image_dir, split
from .enums import ExponentConvention, GradcheckScope, LossKind, Preset, Variant
from .evaluation import evaluate
from .exceptions import (
    DataError,
    FTSegError,
    GradcheckError,
    IncompatibilityError,
    ShapeError,
    TrainingError,
    ValidationError,
)
from .gradcheck import gradcheck, run_scope
from .losses import (
    PredictionPair,
    deep_supervision_loss,
    dice_score,
    focal_tversky_loss,
    tversky_index,
    tversky_loss,
)
from .models import LossConfig, ModelConfig, SplitSpec, SyntheticConfig, TrainConfig
from .network import build_model, model_forward
from .presets import presets
from .tensor import Tape, Tensor, no_grad
from .training import cross_validate, train

__version__ = "0.1.0"
__all__ = [
    "DataError",
    "ExponentConvention",
    "FTSegError",
    "FTSegSettings",
    "GradcheckError",
    "GradcheckScope",
    "IncompatibilityError",
    "LossConfig",
    "LossKind",
    "ModelConfig",
    "PredictionPair",
    "Preset",
    "Sample",
    "ShapeError",
    "SplitSpec",
    "SyntheticConfig",
    "Tape",
    "Tensor",
    "TrainConfig",
    "TrainingError",
    "ValidationError",
    "Variant",
    "build_model",
    "cross_validate",
    "deep_supervision_loss",
    "default_grid",
    "dice_score",
    "evaluate",
    "focal_tversky_loss",
    "generate_synthetic",
    "gradcheck",
    "load_checkpoint",
    "load_dataset",
    "load_image_dir",
    "model_forward",
    "models",
    "no_grad",
    "presets",
    "run_ablation",
    "run_ablation_async",
    "run_scope",
    "save_checkpoint",
    "split",
    "train",
    "tversky_index",
    "tversky_loss",
]
