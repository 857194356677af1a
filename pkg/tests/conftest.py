"""Test configuration."""

import numpy as np
import pytest

from ftseg.data import Sample, generate_synthetic
from ftseg.enums import ExponentConvention, Variant
from ftseg.models import LossConfig, ModelConfig, SyntheticConfig, TrainConfig

VANISHING_EPSILON = 1e-300


@pytest.fixture
def loss_config() -> LossConfig:
    """Loss weights of the hand-evaluated examples, with ε vanishing against every nonzero sum."""
    return LossConfig(alpha=0.7, beta=0.3, gamma=4 / 3, epsilon=VANISHING_EPSILON)


@pytest.fixture
def canonical_pair() -> tuple[np.ndarray, np.ndarray]:
    """The 4-pixel example: TP=0.6, FN=0.4, FP=0.4."""
    p = np.array([0.6, 0.2, 0.1, 0.1]).reshape(1, 1, 2, 2)
    g = np.array([1.0, 0.0, 0.0, 0.0]).reshape(1, 1, 2, 2)
    return p, g


@pytest.fixture
def direct_config() -> LossConfig:
    """Exponent γ instead of 1/γ."""
    return LossConfig(gamma=2.0, exponent_convention=ExponentConvention.DIRECT)


@pytest.fixture
def tiny_model_config() -> ModelConfig:
    """Smallest attention model with deep supervision."""
    return ModelConfig(
        variant=Variant.ATTN_UNET_MULTI_INPUT,
        depth=3,
        base_channels=2,
        deep_supervision=True,
        seed=0,
    )


@pytest.fixture
def tiny_synthetic_config() -> SyntheticConfig:
    """Eight 16×16 grayscale samples."""
    return SyntheticConfig(count=8, height=16, width=16, lesion_area_range=(0.05, 0.2), seed=3)


@pytest.fixture
def tiny_dataset(tiny_synthetic_config: SyntheticConfig) -> list[Sample]:
    """Generated tiny dataset."""
    return generate_synthetic(tiny_synthetic_config)


@pytest.fixture
def quick_train_config() -> TrainConfig:
    """Two short epochs."""
    return TrainConfig(learning_rate=0.05, epochs=2, batch_size=4, seed=0)
