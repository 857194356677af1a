"""Dice, Tversky and focal Tversky losses with deep-supervision combination.

All reductions run over every pixel of the batch (batch-level soft overlap).
Binary problems use one foreground channel; complement-class values are
``1 - p`` and ``1 - g``.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from pydantic import Field

from .enums import ExponentConvention, LossKind
from .exceptions import ShapeError, ValidationError
from .models import BaseFTSegModel, LossConfig
from .tensor import Tensor, as_tensor, clip, pow_scalar, sum_all

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PredictionPair:
    """Foreground probabilities `p` and binary ground truth `g`."""

    p: Tensor
    g: Tensor

    def __post_init__(self) -> None:
        object.__setattr__(self, "p", as_tensor(self.p))
        object.__setattr__(self, "g", as_tensor(self.g))
        if self.p.shape != self.g.shape:
            raise ShapeError(
                f"prediction shape {self.p.shape} differs from target {self.g.shape}"
            )
        if np.any((self.p.data < 0) | (self.p.data > 1)):
            raise ValidationError("probabilities must lie in [0, 1]")
        if not np.isin(self.g.data, (0.0, 1.0)).all():
            raise ValidationError("ground truth must be binary {0, 1}")


def _true_positive(pair: PredictionPair) -> Tensor:
    return sum_all(pair.p * pair.g)


def dice_score(
    pair: PredictionPair, epsilon: float = 1e-6, *, as_printed: bool = False
) -> Tensor:
    """Soft Dice coefficient (2·Σpg + ε) / (Σp + Σg + ε).

    `as_printed` drops the factor 2 from the numerator; perfect overlap then
    scores 0.5.
    """
    overlap = _true_positive(pair)
    numerator = (overlap if as_printed else 2.0 * overlap) + epsilon
    return numerator / (sum_all(pair.p) + sum_all(pair.g) + epsilon)


def dice_loss(pair: PredictionPair, cfg: LossConfig) -> Tensor:
    return 1.0 - dice_score(pair, cfg.epsilon, as_printed=cfg.dice_as_printed)


def tversky_index(pair: PredictionPair, cfg: LossConfig) -> Tensor:
    """(Σpg + ε) / (Σpg + α·Σ(1−p)g + β·Σp(1−g) + ε); α weighs false negatives."""
    tp = _true_positive(pair)
    fn = sum_all((1.0 - pair.p) * pair.g)
    fp = sum_all(pair.p * (1.0 - pair.g))
    return (tp + cfg.epsilon) / (tp + cfg.alpha * fn + cfg.beta * fp + cfg.epsilon)


def tversky_loss(pair: PredictionPair, cfg: LossConfig) -> Tensor:
    return 1.0 - tversky_index(pair, cfg)


def focal_tversky_loss(pair: PredictionPair, cfg: LossConfig) -> Tensor:
    """(1 − TI) raised to the focal exponent (1/γ as printed, γ when direct)."""
    if not 1.0 <= cfg.gamma <= 3.0:
        raise ValidationError(f"gamma must lie in [1, 3], got {cfg.gamma}")
    base = tversky_loss(pair, cfg)
    if cfg.exponent == 1.0:
        return base
    return pow_scalar(clip(base, 0.0, 1.0), cfg.exponent)


def _pairs(
    outputs: Sequence[Tensor], targets: Sequence[Tensor | np.ndarray]
) -> list[PredictionPair]:
    if not outputs or len(outputs) != len(targets):
        raise ValidationError(
            f"need matching non-empty head lists, got {len(outputs)} outputs "
            f"and {len(targets)} targets"
        )
    return [PredictionPair(p, g) for p, g in zip(outputs, targets)]


def deep_supervision_loss(
    outputs: Sequence[Tensor],
    targets: Sequence[Tensor | np.ndarray],
    cfg: LossConfig,
) -> Tensor:
    """FTL on every intermediate head plus TL on the final head, unit weights.

    Heads are ordered coarsest first; a single head reduces to TL alone.
    """
    *intermediate, final = _pairs(outputs, targets)
    total = tversky_loss(final, cfg)
    for pair in intermediate:
        total = total + focal_tversky_loss(pair, cfg)
    return total


def supervised_loss(
    outputs: Sequence[Tensor],
    targets: Sequence[Tensor | np.ndarray],
    cfg: LossConfig,
    kind: LossKind,
) -> Tensor:
    """Training loss for a model's heads under the selected loss kind.

    FTL on several heads follows the deep-supervision rule; a single FTL head
    is trained with FTL directly. DL and TL are summed over all heads.
    """
    kind = LossKind(kind)
    if kind is LossKind.FTL and len(outputs) > 1:
        return deep_supervision_loss(outputs, targets, cfg)
    single = {
        LossKind.DL: dice_loss,
        LossKind.TL: tversky_loss,
        LossKind.FTL: focal_tversky_loss,
    }[kind]
    pairs = _pairs(outputs, targets)
    total = single(pairs[0], cfg)
    for pair in pairs[1:]:
        total = total + single(pair, cfg)
    return total


class CurvePoint(BaseFTSegModel):
    """One sample of the focal Tversky curve."""

    ti: float = Field(ge=0.0, le=1.0)
    gamma: float
    loss: float


def focal_curve(
    gammas: Sequence[float],
    resolution: int = 101,
    convention: ExponentConvention = ExponentConvention.AS_PRINTED,
) -> list[CurvePoint]:
    """Tabulate (1 − TI)^e over TI ∈ [0, 1] for each γ."""
    if resolution < 2:
        raise ValidationError(f"resolution must be at least 2, got {resolution}")
    bad = [g for g in gammas if not 1.0 <= g <= 3.0]
    if bad:
        raise ValidationError(f"gamma values outside [1, 3]: {bad}")
    direct = ExponentConvention(convention) is ExponentConvention.DIRECT
    points: list[CurvePoint] = []
    ti = np.linspace(0.0, 1.0, resolution)
    for gamma in gammas:
        exponent = gamma if direct else 1.0 / gamma
        values = np.power(1.0 - ti, exponent)
        points.extend(
            CurvePoint(ti=float(t), gamma=float(gamma), loss=float(v))
            for t, v in zip(ti, values)
        )
    return points
