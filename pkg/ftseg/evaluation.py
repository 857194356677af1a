"""Pixel-level Dice, precision and recall."""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np

from .data import Sample, stack_batch
from .exceptions import ValidationError
from .models import FoldScores, ImageScore, Metrics, MetricSummary
from .network import Model
from .tensor import no_grad

logger = logging.getLogger(__name__)

METRIC_EPSILON = 1e-8


def predict(model: Model, samples: Sequence[Sample], batch_size: int = 8) -> np.ndarray:
    """Final-head probabilities, N×1×H×W, without recording a tape."""
    chunks = []
    with no_grad():
        for start in range(0, len(samples), batch_size):
            images, _ = stack_batch(samples[start : start + batch_size])
            chunks.append(model(images).final.data)
    return np.concatenate(chunks)


def score_image(prediction: np.ndarray, mask: np.ndarray, id: str = "") -> ImageScore:
    """Counts and metrics of one binary prediction against its mask."""
    pred = prediction.astype(bool)
    truth = mask.astype(bool)
    tp = int(np.count_nonzero(pred & truth))
    fp = int(np.count_nonzero(pred & ~truth))
    fn = int(np.count_nonzero(~pred & truth))
    return ImageScore(
        id=id,
        tp=tp,
        fp=fp,
        fn=fn,
        precision=tp / (tp + fp + METRIC_EPSILON),
        recall=tp / (tp + fn + METRIC_EPSILON),
        dice=2 * tp / (2 * tp + fp + fn + METRIC_EPSILON),
    )


def score_images(
    model: Model, samples: Sequence[Sample], threshold: float = 0.5
) -> tuple[list[ImageScore], np.ndarray]:
    """Per-image scores and the binarized final-head predictions."""
    if not samples:
        raise ValidationError("cannot score an empty sample set")
    binary = (predict(model, samples) >= threshold).astype(np.float64)
    scores = [score_image(b, s.mask, s.id) for b, s in zip(binary, samples)]
    return scores, binary


def fold_scores(scores: Sequence[ImageScore]) -> FoldScores:
    """Per-image means."""
    return FoldScores(
        dice=float(np.mean([s.dice for s in scores])),
        precision=float(np.mean([s.precision for s in scores])),
        recall=float(np.mean([s.recall for s in scores])),
    )


def aggregate_metrics(folds: Sequence[FoldScores]) -> Metrics:
    """Mean ± population standard deviation across folds."""
    if not folds:
        raise ValidationError("cannot aggregate zero folds")

    def summary(values: list[float]) -> MetricSummary:
        arr = np.asarray(values)
        return MetricSummary(mean=float(arr.mean()), std=float(arr.std()))

    return Metrics(
        dice=summary([f.dice for f in folds]),
        precision=summary([f.precision for f in folds]),
        recall=summary([f.recall for f in folds]),
        n_folds=len(folds),
    )


def evaluate(model: Model, samples: Sequence[Sample], threshold: float = 0.5) -> Metrics:
    """Single-fold metrics: per-image means with zero spread."""
    scores, _ = score_images(model, samples, threshold)
    return aggregate_metrics([fold_scores(scores)])
