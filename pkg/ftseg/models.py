"""Pydantic models for ftseg configuration and results."""

from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .enums import ExponentConvention, LossKind, Variant


class BaseFTSegModel(BaseModel):
    """Base model for all configuration and result records."""

    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class LossConfig(BaseFTSegModel):
    """Hyperparameters of the Dice/Tversky/focal Tversky family."""

    alpha: float = Field(default=0.7, ge=0.0, le=1.0)  # false-negative weight
    beta: float = Field(default=0.3, ge=0.0, le=1.0)  # false-positive weight
    gamma: float = Field(default=4 / 3, ge=1.0, le=3.0)
    epsilon: float = Field(default=1e-6, gt=0.0)
    exponent_convention: ExponentConvention = ExponentConvention.AS_PRINTED
    dice_as_printed: bool = False

    @property
    def exponent(self) -> float:
        """Focal exponent under the configured convention."""
        if self.exponent_convention is ExponentConvention.DIRECT:
            return self.gamma
        return 1.0 / self.gamma


class ModelConfig(BaseFTSegModel):
    """Architecture selection and sizing."""

    variant: Variant = Variant.ATTN_UNET_MULTI_INPUT
    depth: int = Field(default=4, ge=2)
    base_channels: int = Field(default=16, ge=1)
    deep_supervision: bool = True
    input_channels: int = Field(default=1, ge=1)
    seed: int = 0

    @property
    def gated(self) -> bool:
        """Whether skip connections pass through attention gates."""
        return self.variant is not Variant.UNET

    @property
    def pyramid(self) -> bool:
        """Whether the encoder receives the input image pyramid."""
        return self.variant is Variant.ATTN_UNET_MULTI_INPUT

    @property
    def head_count(self) -> int:
        """Number of output heads."""
        return self.depth - 1 if self.deep_supervision else 1

    @property
    def spatial_multiple(self) -> int:
        """Required divisor of input height and width."""
        return 2 ** (self.depth - 1)


class TrainConfig(BaseFTSegModel):
    """SGD-with-momentum training protocol."""

    learning_rate: float = Field(default=0.01, gt=0.0)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    decay: float = Field(default=1e-6, ge=0.0)
    epochs: int = Field(default=20, ge=1)
    batch_size: int = Field(default=8, ge=1)
    loss: LossConfig = Field(default_factory=LossConfig)
    loss_kind: LossKind = LossKind.FTL
    seed: int = 0

    def learning_rate_at(self, epoch: int) -> float:
        """Inverse-time decayed learning rate for a zero-based epoch."""
        return self.learning_rate / (1.0 + self.decay * epoch)


class SyntheticConfig(BaseFTSegModel):
    """Synthetic imbalanced-lesion generator settings."""

    count: int = Field(default=200, ge=1)
    height: int = Field(default=64, ge=2)
    width: int = Field(default=64, ge=2)
    channels: int = Field(default=1, ge=1)
    lesion_area_range: tuple[float, float] = (0.02, 0.10)
    contrast: float = Field(default=0.25, ge=0.0)
    noise_sigma: float = Field(default=0.05, ge=0.0)
    seed: int = 0

    @field_validator("lesion_area_range")
    @classmethod
    def _check_area_range(cls, value: tuple[float, float]) -> tuple[float, float]:
        lo, hi = value
        if not 0.0 < lo <= hi < 0.5:
            raise ValueError("lesion_area_range must satisfy 0 < lo <= hi < 0.5")
        return value


class SplitSpec(BaseFTSegModel):
    """Train/test split and cross-validation settings."""

    train_fraction: float = Field(default=0.75, gt=0.0, lt=1.0)
    folds: int = Field(default=5, ge=2)
    seed: int = 0


class MetricSummary(BaseFTSegModel):
    """Mean and population standard deviation of one metric."""

    mean: float = Field(ge=0.0, le=1.0)
    std: float = Field(ge=0.0)


class FoldScores(BaseFTSegModel):
    """Raw per-fold metric means."""

    dice: float
    precision: float
    recall: float


class Metrics(BaseFTSegModel):
    """Dice, precision and recall as mean ± std across folds."""

    dice: MetricSummary
    precision: MetricSummary
    recall: MetricSummary
    n_folds: int = Field(ge=1)

    def as_record(self) -> dict[str, float]:
        """Flatten to the tabular column layout."""
        return {
            "dice_mean": self.dice.mean,
            "dice_std": self.dice.std,
            "precision_mean": self.precision.mean,
            "precision_std": self.precision.std,
            "recall_mean": self.recall.mean,
            "recall_std": self.recall.std,
        }


class ImageScore(BaseFTSegModel):
    """Pixel counts and metrics for one image."""

    id: str
    tp: int
    fp: int
    fn: int
    dice: float
    precision: float
    recall: float


class HistoryRecord(BaseFTSegModel):
    """One training epoch."""

    epoch: int
    train_loss: float
    val_dice: float
    learning_rate: float


class History(BaseFTSegModel):
    """Per-epoch training records."""

    records: list[HistoryRecord] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_order(self) -> "History":
        for prev, cur in zip(self.records, self.records[1:]):
            if cur.epoch <= prev.epoch:
                raise ValueError("epochs must be strictly increasing")
            if cur.learning_rate > prev.learning_rate:
                raise ValueError("learning rate must be non-increasing")
        return self


class GradcheckReport(BaseFTSegModel):
    """Outcome of one finite-difference comparison."""

    label: str = ""
    max_rel_err: float
    tol: float
    passed: bool
    worst_index: tuple[int, ...] | None = None
    analytic: float | None = None
    numeric: float | None = None
    checked: int = 0
    skipped: int = 0


class AblationEntry(BaseFTSegModel):
    """One configuration of the ablation grid."""

    label: str
    model: ModelConfig
    train: TrainConfig


class AblationRow(BaseFTSegModel):
    """One row of the ablation table."""

    model: str
    parameters: str
    metrics: Metrics

    def as_record(self) -> dict[str, Any]:
        """Flatten to the ablation table column layout."""
        return {"model": self.model, "parameters": self.parameters} | (
            self.metrics.as_record()
        )


class ForegroundStats(BaseFTSegModel):
    """Foreground-fraction statistics of a dataset."""

    mean: float
    std: float
    min: float
    max: float


class DatasetManifest(BaseFTSegModel):
    """Manifest written next to an exported dataset."""

    seed: int
    count: int
    config: SyntheticConfig | None = None
    foreground: ForegroundStats
