"""Command-line entry point: synth | train | eval | ablate | gradcheck | curve.

Options may come from a flat ``key = value`` file (``--config``) and from the
command line; command-line values win. Each subcommand validates the merged
values against its own option schema, so unknown keys are rejected.

Exit codes: 0 success, 2 usage, 3 training failure, 4 incompatibility,
5 verification failure.
"""

from __future__ import annotations

import argparse
import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np
from PIL import Image
from pydantic import Field, model_validator
from pydantic import ValidationError as PydanticValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from .ablation import default_grid, load_grid, run_ablation
from .checkpoint import load_checkpoint, save_checkpoint
from .config import FTSegSettings
from .data import export_dataset, foreground_stats, generate_synthetic, load_dataset, split
from .enums import ExponentConvention, GradcheckScope, LossKind, Preset, Variant
from .evaluation import aggregate_metrics, fold_scores, score_images
from .exceptions import FTSegError, GradcheckError, IncompatibilityError, ShapeError
from .gradcheck import run_scope
from .losses import focal_curve
from .models import (
    BaseFTSegModel,
    DatasetManifest,
    LossConfig,
    ModelConfig,
    SplitSpec,
    SyntheticConfig,
    TrainConfig,
)
from .network import build_model, check_input
from .presets import presets
from .runlog import RunLog
from .training import train
from .utils import (
    ABLATION_COLUMNS,
    CURVE_COLUMNS,
    HISTORY_COLUMNS,
    METRICS_COLUMNS,
    SCORE_COLUMNS,
    parse_gammas,
    read_flat_config,
    write_table,
)

logger = logging.getLogger(__name__)

console = Console()
err_console = Console(stderr=True)

CHECKPOINT_NAME = "model.ckpt"


# option schemas


class SynthOptions(BaseFTSegModel):
    out: Path
    preset: Preset | None = None
    seed: int = 0
    count: int | None = None
    height: int | None = None
    width: int | None = None
    channels: int | None = None
    area_min: float | None = None
    area_max: float | None = None
    contrast: float | None = None
    noise_sigma: float | None = None

    def synthetic_config(self) -> SyntheticConfig:
        base = (
            presets.get_config(self.preset).model_dump()
            if self.preset is not None
            else SyntheticConfig().model_dump()
        )
        lo, hi = base["lesion_area_range"]
        overrides = self.model_dump(
            include={"count", "height", "width", "channels", "contrast", "noise_sigma"},
            exclude_none=True,
        )
        return SyntheticConfig(
            **{
                **base,
                **overrides,
                "seed": self.seed,
                "lesion_area_range": (
                    self.area_min if self.area_min is not None else lo,
                    self.area_max if self.area_max is not None else hi,
                ),
            }
        )


class ModelOptions(BaseFTSegModel):
    """Architecture, loss and optimizer keys shared by train and ablate."""

    variant: Variant = Variant.ATTN_UNET_MULTI_INPUT
    depth: int = 4
    base_channels: int = 16
    deep_supervision: bool = True
    loss: LossKind = LossKind.FTL
    alpha: float = 0.7
    beta: float = 0.3
    gamma: float = 4 / 3
    epsilon: float = 1e-6
    exponent_convention: ExponentConvention = ExponentConvention.AS_PRINTED
    lr: float = 0.01
    momentum: float = 0.9
    decay: float = 1e-6
    epochs: int = 20
    batch: int = 8
    seed: int = 0

    def build_model_config(self, channels: int) -> ModelConfig:
        return ModelConfig(
            variant=self.variant,
            depth=self.depth,
            base_channels=self.base_channels,
            deep_supervision=self.deep_supervision,
            input_channels=channels,
            seed=self.seed,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.lr,
            momentum=self.momentum,
            decay=self.decay,
            epochs=self.epochs,
            batch_size=self.batch,
            loss=LossConfig(
                alpha=self.alpha,
                beta=self.beta,
                gamma=self.gamma,
                epsilon=self.epsilon,
                exponent_convention=self.exponent_convention,
            ),
            loss_kind=self.loss,
            seed=self.seed,
        )


class TrainOptions(ModelOptions):
    data: Path
    out: Path
    val_data: Path | None = None


class EvalOptions(BaseFTSegModel):
    checkpoint: Path
    data: Path
    out: Path
    threshold: float = Field(default=0.5, gt=0.0, lt=1.0)
    overlays: bool = False


class AblateOptions(ModelOptions):
    data: Path
    out: Path
    test_data: Path | None = None
    train_fraction: float = 0.75
    folds: int = 5
    rows: str | None = None
    grid: Path | None = None
    jobs: int | None = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _rows_or_grid(self) -> AblateOptions:
        if self.rows is not None and self.grid is not None:
            raise ValueError("give either rows or grid, not both")
        return self


class GradcheckOptions(BaseFTSegModel):
    scope: GradcheckScope
    seed: int = 0


class CurveOptions(BaseFTSegModel):
    out: Path
    gammas: str = "1,4/3,2,3"
    resolution: int = 101
    convention: ExponentConvention = ExponentConvention.AS_PRINTED


# commands


def cmd_synth(opts: SynthOptions, settings: FTSegSettings) -> int:
    cfg = opts.synthetic_config()
    samples = generate_synthetic(cfg)
    manifest = DatasetManifest(
        seed=cfg.seed, count=cfg.count, config=cfg, foreground=foreground_stats(samples)
    )
    try:
        root = export_dataset(samples, opts.out, manifest)
    except OSError as exc:
        raise FTSegError(f"cannot write dataset to {opts.out}: {exc}") from exc
    stats = manifest.foreground
    if opts.preset is not None:
        console.print(f"preset {opts.preset.value}: {presets.get_description(opts.preset)}")
    console.print(
        f"wrote {cfg.count} samples to {root} "
        f"(foreground mean {stats.mean:.4f}, min {stats.min:.4f}, max {stats.max:.4f})"
    )
    return 0


def cmd_train(opts: TrainOptions, settings: FTSegSettings) -> int:
    cfg = opts.train_config()
    dataset = load_dataset(opts.data)
    if not dataset:
        raise FTSegError(f"no samples found under {opts.data}", exit_code=2)
    validation = None
    if opts.val_data is not None:
        validation = load_dataset(opts.val_data, target_size=dataset[0].size)
    model = build_model(opts.build_model_config(dataset[0].channels))
    model, history = train(
        model, dataset, cfg, validation=validation, run_log=RunLog(settings)
    )
    save_checkpoint(model, opts.out / CHECKPOINT_NAME)
    write_table(
        (r.model_dump() for r in history.records), HISTORY_COLUMNS, opts.out / "history.csv"
    )
    console.print(f"final val_dice {history.records[-1].val_dice:.6f}")
    return 0


def _write_overlays(out: Path, ids: Sequence[str], binary: np.ndarray, masks: np.ndarray) -> None:
    """Prediction | mask | disagreement, side by side, one grayscale PNG per image."""
    out.mkdir(parents=True, exist_ok=True)
    for id_, pred, mask in zip(ids, binary, masks):
        disagreement = np.abs(pred[0] - mask[0])
        strip = np.concatenate([pred[0], mask[0], disagreement], axis=1)
        Image.fromarray((strip * 255).astype(np.uint8), mode="L").save(out / f"{id_}.png")


def cmd_eval(opts: EvalOptions, settings: FTSegSettings) -> int:
    model = load_checkpoint(opts.checkpoint)
    dataset = load_dataset(opts.data)
    if not dataset:
        raise FTSegError(f"no samples found under {opts.data}", exit_code=2)
    try:
        check_input(model.config, (1, *dataset[0].image.shape))
    except ShapeError as exc:
        raise IncompatibilityError(
            f"checkpoint {opts.checkpoint} cannot evaluate {opts.data}: {exc.message}"
        ) from exc

    scores, binary = score_images(model, dataset, opts.threshold)
    metrics = aggregate_metrics([fold_scores(scores)])
    write_table([metrics.as_record()], METRICS_COLUMNS, opts.out / "metrics.csv")
    write_table((s.model_dump() for s in scores), SCORE_COLUMNS, opts.out / "scores.csv")
    if opts.overlays:
        _write_overlays(
            opts.out / "overlays",
            [s.id for s in dataset],
            binary,
            np.stack([s.mask for s in dataset]),
        )
    console.print(
        f"dice {metrics.dice.mean:.6f}  precision {metrics.precision.mean:.6f}  "
        f"recall {metrics.recall.mean:.6f}"
    )
    return 0


def cmd_ablate(opts: AblateOptions, settings: FTSegSettings) -> int:
    dataset = load_dataset(opts.data)
    if not dataset:
        raise FTSegError(f"no samples found under {opts.data}", exit_code=2)
    spec = SplitSpec(train_fraction=opts.train_fraction, folds=opts.folds, seed=opts.seed)
    if opts.test_data is not None:
        train_part = dataset
        test = load_dataset(opts.test_data, target_size=dataset[0].size)
    else:
        train_part, test = split(dataset, spec)

    if opts.grid is not None:
        grid = load_grid(opts.grid)
    else:
        rows = [r.strip() for r in opts.rows.split(",")] if opts.rows else None
        grid = default_grid(
            opts.build_model_config(dataset[0].channels), opts.train_config(), rows
        )
    table = run_ablation(
        train_part,
        grid,
        spec,
        test,
        jobs=opts.jobs or settings.jobs,
        run_log=RunLog(settings),
    )
    write_table((row.as_record() for row in table), ABLATION_COLUMNS, opts.out / "ablation.csv")

    view = Table(*ABLATION_COLUMNS[:2], "dice", "precision", "recall")
    for row in table:
        m = row.metrics
        view.add_row(
            row.model,
            row.parameters,
            f"{m.dice.mean:.3f} ± {m.dice.std:.3f}",
            f"{m.precision.mean:.3f} ± {m.precision.std:.3f}",
            f"{m.recall.mean:.3f} ± {m.recall.std:.3f}",
        )
    console.print(view)
    return 0


def cmd_gradcheck(opts: GradcheckOptions, settings: FTSegSettings) -> int:
    reports = run_scope(opts.scope, opts.seed)
    for report in reports:
        status = "[green]pass[/green]" if report.passed else "[red]FAIL[/red]"
        console.print(
            f"{report.label:<32} max_rel_err={report.max_rel_err:.3e} "
            f"tol={report.tol:g} checked={report.checked} skipped={report.skipped} {status}"
        )
    failed = [r for r in reports if not r.passed]
    if failed:
        worst = max(failed, key=lambda r: r.max_rel_err)
        raise GradcheckError(
            f"{opts.scope.value}: {worst.label} failed at index {worst.worst_index} "
            f"(analytic {worst.analytic:.6e}, numeric {worst.numeric:.6e})",
            report=worst,
        )
    return 0


def cmd_curve(opts: CurveOptions, settings: FTSegSettings) -> int:
    gammas = list(dict.fromkeys(parse_gammas(opts.gammas)))
    points = focal_curve(gammas, opts.resolution, opts.convention)
    write_table((p.model_dump() for p in points), CURVE_COLUMNS, opts.out)
    console.print(f"wrote {len(gammas)} curves to {opts.out}")
    return 0


COMMANDS: dict[str, tuple[type[BaseFTSegModel], Any]] = {
    "synth": (SynthOptions, cmd_synth),
    "train": (TrainOptions, cmd_train),
    "eval": (EvalOptions, cmd_eval),
    "ablate": (AblateOptions, cmd_ablate),
    "gradcheck": (GradcheckOptions, cmd_gradcheck),
    "curve": (CurveOptions, cmd_curve),
}


# parser


def _add_model_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--variant", choices=[v.value for v in Variant])
    parser.add_argument("--depth", type=int)
    parser.add_argument("--base-channels", type=int)
    parser.add_argument("--deep-supervision", action=argparse.BooleanOptionalAction)
    parser.add_argument("--loss", choices=[k.value for k in LossKind])
    parser.add_argument("--alpha", type=float, help="false-negative weight")
    parser.add_argument("--beta", type=float, help="false-positive weight")
    parser.add_argument("--gamma", type=float, help="focal parameter in [1, 3]")
    parser.add_argument("--epsilon", type=float)
    parser.add_argument(
        "--exponent-convention", choices=[c.value for c in ExponentConvention]
    )
    parser.add_argument("--lr", type=float)
    parser.add_argument("--momentum", type=float)
    parser.add_argument("--decay", type=float)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch", type=int)
    parser.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ftseg",
        description="Focal Tversky segmentation experiments",
        argument_default=argparse.SUPPRESS,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, summary: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=summary, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", type=Path, help="flat key = value file")
        return p

    p = command("synth", "generate a synthetic imbalanced-lesion dataset")
    p.add_argument("--out", type=Path, help="dataset directory")
    choices = presets.get_preset_choices()
    p.add_argument(
        "--preset",
        choices=list(choices),
        help="; ".join(f"{name}: {text}" for name, text in choices.items()),
    )
    p.add_argument("--seed", type=int)
    p.add_argument("--count", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--channels", type=int)
    p.add_argument("--area-min", type=float)
    p.add_argument("--area-max", type=float)
    p.add_argument("--contrast", type=float)
    p.add_argument("--noise-sigma", type=float)

    p = command("train", "train a model and write a checkpoint and history")
    p.add_argument("--data", type=Path, help="dataset directory with images/ and masks/")
    p.add_argument("--val-data", type=Path)
    p.add_argument("--out", type=Path, help="output directory")
    _add_model_arguments(p)

    p = command("eval", "score a checkpoint on a dataset")
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--data", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--threshold", type=float)
    p.add_argument("--overlays", action="store_true")

    p = command("ablate", "cross-validate the ablation grid")
    p.add_argument("--data", type=Path)
    p.add_argument("--test-data", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--folds", type=int)
    p.add_argument("--rows", help="comma-separated row labels, e.g. unet+dl,attn_multi+ftl")
    p.add_argument("--grid", type=Path, help="JSON list of grid entries")
    p.add_argument("--jobs", type=int)
    _add_model_arguments(p)

    p = command("gradcheck", "finite-difference gradient verification")
    p.add_argument("scope", choices=[s.value for s in GradcheckScope])
    p.add_argument("--seed", type=int)

    p = command("curve", "tabulate the focal Tversky curve family")
    p.add_argument("--gammas", help="comma-separated, fractions allowed")
    p.add_argument("--resolution", type=int)
    p.add_argument("--convention", choices=[c.value for c in ExponentConvention])
    p.add_argument("--out", type=Path)
    return parser


def merge_options(args: argparse.Namespace) -> tuple[str, dict[str, Any]]:
    """Config-file values overridden by command-line values."""
    given = vars(args).copy()
    command = given.pop("command")
    config = given.pop("config", None)
    values: dict[str, Any] = read_flat_config(config) if config is not None else {}
    values.update(given)
    return command, values


def configure_logging(settings: FTSegSettings) -> None:
    logging.basicConfig(
        level=settings.log_level.upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    settings = FTSegSettings()
    configure_logging(settings)
    try:
        command, values = merge_options(args)
        schema, handler = COMMANDS[command]
        opts = schema(**values)
        return handler(opts, settings)
    except PydanticValidationError as exc:
        err_console.print(f"[red]invalid options:[/red] {exc}")
        return 2
    except FTSegError as exc:
        err_console.print(f"[red]error:[/red] {exc.message}")
        return exc.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
