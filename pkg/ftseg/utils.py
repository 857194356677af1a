"""Formatting, tabular output and flat configuration files."""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from fractions import Fraction
from pathlib import Path
from typing import Any

import pandas as pd

from .enums import LossKind
from .exceptions import ValidationError
from .models import LossConfig

__all__ = (
    "ABLATION_COLUMNS",
    "CURVE_COLUMNS",
    "HISTORY_COLUMNS",
    "METRICS_COLUMNS",
    "SCORE_COLUMNS",
    "format_number",
    "format_parameters",
    "parse_gammas",
    "read_flat_config",
    "write_table",
)

HISTORY_COLUMNS = ("epoch", "train_loss", "val_dice", "learning_rate")
METRICS_COLUMNS = (
    "dice_mean",
    "dice_std",
    "precision_mean",
    "precision_std",
    "recall_mean",
    "recall_std",
)
ABLATION_COLUMNS = ("model", "parameters", *METRICS_COLUMNS)
CURVE_COLUMNS = ("ti", "gamma", "loss")
SCORE_COLUMNS = ("id", "tp", "fp", "fn", "dice", "precision", "recall")


def format_number(value: float) -> str:
    """Short decimal, or a small fraction when the value is one (4/3)."""
    if round(value, 3) == value:
        return f"{value:g}"
    fraction = Fraction(value).limit_denominator(12)
    if abs(float(fraction) - value) < 1e-9:
        return f"{fraction.numerator}/{fraction.denominator}"
    return f"{value:.4g}"


def format_parameters(kind: LossKind, cfg: LossConfig) -> str:
    """The α/β/γ column of an ablation row.

    Dice is the Tversky index at α = β = 0.5, so DL rows show those weights.
    """
    kind = LossKind(kind)
    if kind is LossKind.DL:
        return "α=0.5, β=0.5"
    text = f"α={format_number(cfg.alpha)}, β={format_number(cfg.beta)}"
    if kind is LossKind.FTL:
        text += f", γ={format_number(cfg.gamma)}"
    return text


def write_table(
    rows: Iterable[Mapping[str, Any]], columns: Sequence[str], path: str | Path
) -> Path:
    """Comma-delimited table with a header row, LF endings and %.6f reals."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(list(rows), columns=list(columns))
    frame.to_csv(path, index=False, float_format="%.6f", lineterminator="\n")
    return path


def read_flat_config(path: str | Path) -> dict[str, str]:
    """Parse `key = value` lines; `#` starts a comment, blank lines are skipped."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read config file {path}: {exc}") from exc

    values: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or not key:
            raise ValidationError(f"{path}:{number}: expected 'key = value', got {raw!r}")
        values[key] = value.strip()
    return values


def parse_gammas(text: str | Sequence[float]) -> list[float]:
    """Comma-separated γ list; fractions such as 4/3 are accepted."""
    if not isinstance(text, str):
        return [float(g) for g in text]
    try:
        return [float(Fraction(part.strip())) for part in text.split(",") if part.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise ValidationError(f"invalid gamma list {text!r}") from exc
