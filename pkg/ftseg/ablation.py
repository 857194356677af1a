"""Seven-configuration ablation over architecture variants and losses."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from functools import partial
from pathlib import Path

import anyio
import anyio.to_thread
from pydantic import TypeAdapter
from pydantic import ValidationError as PydanticValidationError

from .data import Sample
from .enums import LossKind, Variant
from .exceptions import FTSegError, ValidationError
from .models import AblationEntry, AblationRow, ModelConfig, SplitSpec, TrainConfig
from .network import build_model
from .runlog import RunLog
from .training import cross_validate
from .utils import format_parameters

logger = logging.getLogger(__name__)

_GRID_ADAPTER = TypeAdapter(list[AblationEntry])

# label -> (variant, deep supervision, loss)
DEFAULT_ROWS: dict[str, tuple[Variant, bool, LossKind]] = {
    "unet+dl": (Variant.UNET, False, LossKind.DL),
    "unet+tl": (Variant.UNET, False, LossKind.TL),
    "unet+ftl": (Variant.UNET, False, LossKind.FTL),
    "attn+dl": (Variant.ATTN_UNET, True, LossKind.DL),
    "attn_multi+dl": (Variant.ATTN_UNET_MULTI_INPUT, True, LossKind.DL),
    "attn_multi+tl": (Variant.ATTN_UNET_MULTI_INPUT, True, LossKind.TL),
    "attn_multi+ftl": (Variant.ATTN_UNET_MULTI_INPUT, True, LossKind.FTL),
}


def default_grid(
    model: ModelConfig | None = None,
    train: TrainConfig | None = None,
    rows: Sequence[str] | None = None,
) -> list[AblationEntry]:
    """Grid entries in table order, optionally restricted to `rows`."""
    model = model or ModelConfig()
    train = train or TrainConfig()
    labels = list(DEFAULT_ROWS) if rows is None else list(rows)
    unknown = [label for label in labels if label not in DEFAULT_ROWS]
    if unknown:
        raise ValidationError(
            f"unknown ablation rows {unknown}; choose from {', '.join(DEFAULT_ROWS)}"
        )
    grid = []
    for label in DEFAULT_ROWS:
        if label not in labels:
            continue
        variant, deep_supervision, kind = DEFAULT_ROWS[label]
        grid.append(
            AblationEntry(
                label=label,
                model=model.model_copy(
                    update={"variant": variant, "deep_supervision": deep_supervision}
                ),
                train=train.model_copy(update={"loss_kind": kind}),
            )
        )
    return grid


def run_row(
    entry: AblationEntry,
    dataset: Sequence[Sample],
    spec: SplitSpec,
    test: Sequence[Sample] | None = None,
) -> AblationRow:
    """Cross-validate one grid entry."""

    def factory(seed: int):
        return build_model(entry.model.model_copy(update={"seed": seed}))

    metrics = cross_validate(factory, dataset, spec, entry.train, test)
    logger.info(
        "%s dice=%.4f±%.4f recall=%.4f",
        entry.label,
        metrics.dice.mean,
        metrics.dice.std,
        metrics.recall.mean,
    )
    return AblationRow(
        model=entry.label,
        parameters=format_parameters(entry.train.loss_kind, entry.train.loss),
        metrics=metrics,
    )


async def run_ablation_async(
    dataset: Sequence[Sample],
    grid: Sequence[AblationEntry],
    spec: SplitSpec,
    test: Sequence[Sample] | None = None,
    *,
    jobs: int = 1,
    run_log: RunLog | None = None,
) -> list[AblationRow]:
    """Run grid rows on worker threads, at most `jobs` at a time.

    Rows are returned in grid order; the first failing row in grid order is
    re-raised after all rows finish.
    """
    if not grid:
        raise ValidationError("ablation grid is empty")
    limiter = anyio.CapacityLimiter(max(1, jobs))
    results: list[AblationRow | None] = [None] * len(grid)
    errors: list[FTSegError | None] = [None] * len(grid)

    async def worker(i: int, entry: AblationEntry) -> None:
        try:
            results[i] = await anyio.to_thread.run_sync(
                partial(run_row, entry, dataset, spec, test), limiter=limiter
            )
        except FTSegError as exc:
            errors[i] = exc
            return
        if run_log is not None:
            await run_log.append_async("ablation_row", **results[i].as_record())

    async with anyio.create_task_group() as tg:
        for i, entry in enumerate(grid):
            tg.start_soon(worker, i, entry)

    for error in errors:
        if error is not None:
            raise error
    return [row for row in results if row is not None]


def run_ablation(
    dataset: Sequence[Sample],
    grid: Sequence[AblationEntry],
    spec: SplitSpec,
    test: Sequence[Sample] | None = None,
    *,
    jobs: int = 1,
    run_log: RunLog | None = None,
) -> list[AblationRow]:
    """One table row per grid entry, in grid order."""
    if not grid:
        raise ValidationError("ablation grid is empty")
    if jobs > 1:
        return anyio.run(
            partial(
                run_ablation_async, dataset, grid, spec, test, jobs=jobs, run_log=run_log
            )
        )
    rows = []
    for entry in grid:
        row = run_row(entry, dataset, spec, test)
        if run_log is not None:
            run_log.append("ablation_row", **row.as_record())
        rows.append(row)
    return rows


def load_grid(path: str | Path) -> list[AblationEntry]:
    """Read a JSON list of grid entries."""
    path = Path(path)
    try:
        grid = _GRID_ADAPTER.validate_json(path.read_bytes())
    except OSError as exc:
        raise ValidationError(f"cannot read grid file {path}: {exc}") from exc
    except PydanticValidationError as exc:
        raise ValidationError(f"invalid grid file {path}", errors={"detail": exc.errors()}) from exc
    if not grid:
        raise ValidationError(f"grid file {path} has no entries")
    return grid
