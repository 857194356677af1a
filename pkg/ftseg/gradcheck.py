"""Central-difference verification of analytic gradients."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence

import numpy as np

from .enums import ExponentConvention, GradcheckScope, LossKind, Variant
from .exceptions import ShapeError, ValidationError
from .losses import (
    PredictionPair,
    deep_supervision_loss,
    dice_loss,
    focal_tversky_loss,
    supervised_loss,
    tversky_loss,
)
from .models import GradcheckReport, LossConfig, ModelConfig
from .network import AttentionGateParams, Model, attention_gate, build_model, head_targets
from .rng import CounterRNG, derive_seed
from .tensor import Tape, Tensor, branch_trace, no_grad, same_branches, sum_all

logger = logging.getLogger(__name__)

REL_FLOOR = 1e-8


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = REL_FLOOR) -> np.ndarray:
    return np.abs(analytic - numeric) / np.maximum(floor, np.abs(analytic) + np.abs(numeric))


def trial_coordinates(
    shape: tuple[int, ...], trial: int, trials: int, rng: CounterRNG
) -> tuple[list[tuple[int, ...]], int]:
    """Candidate coordinates of one trial and how many of them to compare.

    A fixed permutation keyed by `rng` is dealt round-robin over `trials`, so
    every coordinate is some trial's share. The share comes first; the rest
    of the permutation follows as replacements for coordinates skipped at a
    kink. Tensors smaller than `trials` contribute one coordinate per trial.
    """
    every = list(np.ndindex(*shape))
    order = [every[i] for i in rng.permutation(len(every))]
    share = order[trial::trials]
    taken = set(share)
    start = trial % len(order)
    rest = [c for c in order[start:] + order[:start] if c not in taken]
    return share + rest, max(1, len(share))


def _evaluate(f: Callable[[Tensor], Tensor], x: Tensor) -> float:
    value = f(x)
    if value.size != 1:
        raise ShapeError(f"gradcheck needs a scalar function, got shape {value.shape}")
    return value.item()


def gradcheck(
    f: Callable[[Tensor], Tensor],
    x: Tensor,
    h: float = 1e-5,
    tol: float = 1e-4,
    indices: Sequence[tuple[int, ...]] | None = None,
    label: str = "",
    floor: float = REL_FLOOR,
    limit: int | None = None,
) -> GradcheckReport:
    """Compare d f / d x from the tape with (f(x+h·e_i) − f(x−h·e_i)) / 2h.

    `x` is perturbed in place and restored; only `indices` are compared when
    given, in order, stopping after `limit` compared coordinates. A
    coordinate whose ±h step changes the branch of a relu, clip or maxpool
    (see `branch_trace`) is skipped: the central difference there straddles
    a kink. The relative error of a coordinate is
    |a − n| / max(floor, |a| + |n|).
    """
    if not 1e-6 <= h <= 1e-4:
        raise ValidationError(f"step h must lie in [1e-6, 1e-4], got {h}")
    x.requires_grad = True
    x.grad = None
    with Tape() as tape, branch_trace() as reference:
        y = f(x)
    if y.size != 1:
        raise ShapeError(f"gradcheck needs a scalar function, got shape {y.shape}")
    if not np.isfinite(y.data).all():
        raise ValidationError(f"{label or 'gradcheck'}: f(x) is not finite")
    if y.tape is tape:
        tape.backward(y, [x])
    analytic = x.grad if x.grad is not None else np.zeros_like(x.data)
    x.grad = None

    candidates = indices if indices is not None else list(np.ndindex(*x.shape))
    coords: list[tuple[int, ...]] = []
    numeric: list[float] = []
    skipped = 0
    with no_grad():
        for idx in candidates:
            if limit is not None and len(coords) >= limit:
                break
            original = x.data[idx]
            x.data[idx] = original + h
            with branch_trace() as upper_trace:
                upper = _evaluate(f, x)
            x.data[idx] = original - h
            with branch_trace() as lower_trace:
                lower = _evaluate(f, x)
            x.data[idx] = original
            if not (
                same_branches(reference, upper_trace) and same_branches(reference, lower_trace)
            ):
                skipped += 1
                continue
            coords.append(tuple(idx))
            numeric.append((upper - lower) / (2.0 * h))

    if skipped:
        logger.debug("%s: skipped %d coordinates across a kink", label or "gradcheck", skipped)
    if not coords:
        return GradcheckReport(
            label=label, max_rel_err=0.0, tol=tol, passed=True, skipped=skipped
        )
    picked = np.array([analytic[idx] for idx in coords])
    errors = relative_error(picked, np.array(numeric), floor)
    worst = int(np.argmax(errors))
    max_err = float(errors[worst])
    return GradcheckReport(
        label=label,
        max_rel_err=max_err,
        tol=tol,
        passed=max_err < tol,
        worst_index=tuple(int(i) for i in coords[worst]),
        analytic=float(picked[worst]),
        numeric=float(numeric[worst]),
        checked=len(coords),
        skipped=skipped,
    )


def worst_of(reports: Sequence[GradcheckReport], label: str) -> GradcheckReport:
    """Collapse several reports into the one with the largest error."""
    worst = max(reports, key=lambda r: r.max_rel_err)
    return worst.model_copy(
        update={
            "label": f"{label} ({worst.label})" if worst.label else label,
            "passed": all(r.passed for r in reports),
            "checked": sum(r.checked for r in reports),
            "skipped": sum(r.skipped for r in reports),
        }
    )


# suites


def _random_pair(rng: CounterRNG, shape: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    p = rng.uniform(0.05, 0.95, shape)
    g = (rng.random(shape) < 0.4).astype(np.float64)
    g.flat[0] = 1.0
    return p, g


def check_losses(seed: int = 0, trials: int = 100, tol: float = 1e-4) -> list[GradcheckReport]:
    """Every loss against central differences w.r.t. the probabilities."""
    cfg = LossConfig()
    direct = LossConfig(gamma=2.0, exponent_convention=ExponentConvention.DIRECT)
    losses = {
        "dice": lambda pair: dice_loss(pair, cfg),
        "tversky": lambda pair: tversky_loss(pair, cfg),
        "focal_tversky": lambda pair: focal_tversky_loss(pair, cfg),
        "focal_tversky_direct": lambda pair: focal_tversky_loss(pair, direct),
    }
    collected: dict[str, list[GradcheckReport]] = {name: [] for name in losses}
    collected["deep_supervision"] = []
    for trial in range(trials):
        rng = CounterRNG(seed, "gradcheck", "losses", trial)
        p, g = _random_pair(rng, (1, 1, 4, 4))
        for name, loss in losses.items():
            report = gradcheck(
                lambda t, loss=loss, g=g: loss(PredictionPair(t, g)),
                Tensor.parameter(p),
                tol=tol,
                label=f"trial {trial}",
            )
            collected[name].append(report)

        coarse_g = g.reshape(1, 1, 2, 2, 2, 2).max(axis=(3, 5))
        coarse = Tensor.parameter(rng.uniform(0.05, 0.95, (1, 1, 2, 2)))
        report = gradcheck(
            lambda t, g=g, coarse=coarse, coarse_g=coarse_g: deep_supervision_loss(
                [coarse, t], [coarse_g, g], cfg
            ),
            Tensor.parameter(p),
            tol=tol,
            label=f"trial {trial}",
        )
        collected["deep_supervision"].append(report)
    return [worst_of(reports, name) for name, reports in collected.items()]


def check_gate(seed: int = 0, trials: int = 100, tol: float = 1e-4) -> list[GradcheckReport]:
    """Gate output against central differences w.r.t. its inputs and weights."""
    collected: dict[str, list[GradcheckReport]] = {}
    for trial in range(trials):
        rng = CounterRNG(seed, "gradcheck", "gate", trial)
        x = Tensor(rng.normal((1, 2, 4, 4)))
        g = Tensor(rng.normal((1, 3, 2, 2)))
        params = AttentionGateParams(
            W_x=Tensor.parameter(rng.normal((2, 2, 1, 1))),
            W_g=Tensor.parameter(rng.normal((2, 3, 1, 1))),
            b_g=Tensor.parameter(rng.normal(2)),
            psi=Tensor.parameter(rng.normal((1, 2, 1, 1))),
            b_psi=Tensor.parameter(rng.normal(1)),
        )
        weights = Tensor(rng.normal((1, 2, 4, 4)))

        def objective() -> Tensor:
            gated, _ = attention_gate(x, g, params)
            return sum_all(gated * weights)

        for name, target in {"x": x, "g": g, **params.tensors()}.items():
            report = gradcheck(
                lambda _t: objective(), target, tol=tol, label=f"trial {trial}"
            )
            collected.setdefault(name, []).append(report)
    return [worst_of(reports, f"gate.{name}") for name, reports in collected.items()]


def _model_objective(
    model: Model, image: np.ndarray, targets: list[Tensor], loss_cfg: LossConfig
) -> Callable[[Tensor], Tensor]:
    def objective(_t: Tensor) -> Tensor:
        return supervised_loss(model(image).heads, targets, loss_cfg, LossKind.FTL)

    return objective


def check_model(
    seed: int = 0,
    trials: int = 100,
    tol: float = 1e-3,
    h: float = 1e-4,
) -> list[GradcheckReport]:
    """Deep-supervision loss of a small attention model w.r.t. every parameter.

    Each trial builds a fresh model with random nonzero biases, so no relu
    input sits exactly at its kink, and feeds it one 1×1×16×16 batch. Every
    parameter tensor is compared in every trial, and across `trials` every
    coordinate of every tensor is offered once (see `trial_coordinates`).
    Returns one report per parameter tensor.
    """
    collected: dict[str, list[GradcheckReport]] = {}
    loss_cfg = LossConfig()
    for trial in range(trials):
        rng = CounterRNG(seed, "gradcheck", "model", trial)
        cfg = ModelConfig(
            variant=Variant.ATTN_UNET_MULTI_INPUT,
            depth=3,
            base_channels=2,
            deep_supervision=True,
            seed=derive_seed(seed, "gradcheck", "model", trial),
        )
        model = build_model(cfg)
        for name, param in model.params.items():
            if param.ndim == 1:
                param.data[...] = 0.1 * rng.child("bias", name).normal(param.shape)
        image = rng.random((1, 1, 16, 16))
        mask = (rng.random((1, 1, 16, 16)) < 0.3).astype(np.float64)
        targets = head_targets(mask, cfg.head_count)

        objective = _model_objective(model, image, targets, loss_cfg)
        for name, param in model.params.items():
            candidates, limit = trial_coordinates(
                param.shape, trial, trials, CounterRNG(seed, "gradcheck", "coords", name)
            )
            report = gradcheck(
                objective,
                param,
                h=h,
                tol=tol,
                indices=candidates,
                limit=limit,
                label=f"trial {trial}",
            )
            collected.setdefault(name, []).append(report)
    reports = [worst_of(r, name) for name, r in collected.items()]
    for report in reports:
        logger.debug(
            "%s max_rel_err=%.3e checked=%d skipped=%d",
            report.label,
            report.max_rel_err,
            report.checked,
            report.skipped,
        )
    return reports


def run_scope(scope: GradcheckScope | str, seed: int = 0) -> list[GradcheckReport]:
    scope = GradcheckScope(scope)
    if scope is GradcheckScope.LOSSES:
        return check_losses(seed)
    if scope is GradcheckScope.GATE:
        return check_gate(seed)
    return [worst_of(check_model(seed), "model")]
