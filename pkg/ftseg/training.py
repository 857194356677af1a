"""SGD-with-momentum training and k-fold cross-validation."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence

import numpy as np

from .data import Sample, kfold, stack_batch
from .evaluation import aggregate_metrics, evaluate, fold_scores, score_images
from .exceptions import ShapeError, TrainingError, ValidationError
from .losses import supervised_loss
from .models import History, HistoryRecord, Metrics, SplitSpec, TrainConfig
from .network import Model, check_input, head_targets
from .rng import CounterRNG, derive_seed
from .runlog import RunLog
from .tensor import Tape, Tensor

logger = logging.getLogger(__name__)

ModelFactory = Callable[[int], Model]


def sgd_momentum_step(
    params: Sequence[Tensor],
    grads: Sequence[np.ndarray],
    state: list[np.ndarray] | None,
    cfg: TrainConfig,
    epoch: int,
) -> list[np.ndarray]:
    """v ← m·v − lr_e·grad, p ← p + v, with lr_e = lr₀ / (1 + decay·epoch).

    Parameters are updated in place; returns the new velocities.
    """
    if state is None:
        state = [np.zeros_like(p.data) for p in params]
    if not len(params) == len(grads) == len(state):
        raise ShapeError(
            f"sgd step got {len(params)} parameters, {len(grads)} gradients "
            f"and {len(state)} velocities"
        )
    lr = cfg.learning_rate_at(epoch)
    updated = []
    for i, (param, grad, velocity) in enumerate(zip(params, grads, state)):
        if not param.shape == grad.shape == velocity.shape:
            raise ShapeError(
                f"sgd step: parameter {i} has shape {param.shape} but gradient "
                f"{grad.shape} and velocity {velocity.shape}"
            )
        velocity = cfg.momentum * velocity - lr * grad
        param.data += velocity
        updated.append(velocity)
    return updated


def _batches(n: int, batch_size: int, seed: int, epoch: int) -> list[np.ndarray]:
    order = CounterRNG(seed, "shuffle", epoch).permutation(n)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


def train(
    model: Model,
    dataset: Sequence[Sample],
    cfg: TrainConfig,
    *,
    validation: Sequence[Sample] | None = None,
    run_log: RunLog | None = None,
) -> tuple[Model, History]:
    """Train `model` in place for `cfg.epochs` epochs.

    Mini-batches come from a shuffle keyed by (seed, epoch). Validation Dice
    is measured on `validation`, or on the training set when none is given.

    Raises:
        ValidationError: If the dataset is empty.
        ShapeError: If the samples do not fit the model.
        TrainingError: If a batch loss is not finite.
    """
    if not dataset:
        raise ValidationError("cannot train on an empty dataset")
    check_input(model.config, (1, *dataset[0].image.shape))
    params = model.parameters()
    state: list[np.ndarray] | None = None
    records: list[HistoryRecord] = []

    for epoch in range(cfg.epochs):
        lr = cfg.learning_rate_at(epoch)
        losses = []
        for b, indices in enumerate(_batches(len(dataset), cfg.batch_size, cfg.seed, epoch)):
            images, masks = stack_batch([dataset[i] for i in indices])
            targets = head_targets(masks, model.config.head_count)
            with Tape() as tape:
                outputs = model(images)
                loss = supervised_loss(outputs.heads, targets, cfg.loss, cfg.loss_kind)
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingError(f"non-finite loss {value}", epoch=epoch, batch=b)
            model.zero_grad()
            tape.backward(loss, params)
            state = sgd_momentum_step(params, [p.grad for p in params], state, cfg, epoch)
            losses.append(value)

        val_dice = evaluate(model, validation or dataset).dice.mean
        record = HistoryRecord(
            epoch=epoch,
            train_loss=float(np.mean(losses)),
            val_dice=val_dice,
            learning_rate=lr,
        )
        records.append(record)
        logger.info(
            "epoch %d/%d loss=%.6f val_dice=%.4f lr=%.3g",
            epoch + 1,
            cfg.epochs,
            record.train_loss,
            record.val_dice,
            lr,
        )
        if run_log is not None:
            run_log.append("epoch", **record.model_dump())

    model.zero_grad()
    return model, History(records=records)


def cross_validate(
    model_factory: ModelFactory,
    dataset: Sequence[Sample],
    spec: SplitSpec,
    cfg: TrainConfig,
    test: Sequence[Sample] | None = None,
    *,
    run_log: RunLog | None = None,
) -> Metrics:
    """Train a fresh model per fold and report mean ± population std.

    Fold k trains on the other folds with seed derive_seed(cfg.seed, "fold", k)
    and is scored on `test` when given, otherwise on its held-out part.
    """
    folds = kfold(dataset, spec.folds, spec.seed)
    per_fold = []
    for k, (train_part, held_out) in enumerate(folds):
        seed = derive_seed(cfg.seed, "fold", k)
        model = model_factory(seed)
        fold_cfg = cfg.model_copy(update={"seed": seed})
        train(model, train_part, fold_cfg, validation=held_out, run_log=run_log)
        scores, _ = score_images(model, test or held_out)
        per_fold.append(fold_scores(scores))
        logger.info("fold %d/%d dice=%.4f", k + 1, len(folds), per_fold[-1].dice)
    return aggregate_metrics(per_fold)
