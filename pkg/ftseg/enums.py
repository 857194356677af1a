"""Enums for the ftseg engine."""

from enum import Enum


class Variant(str, Enum):
    """Architecture variant."""

    UNET = "unet"
    ATTN_UNET = "attn_unet"
    ATTN_UNET_MULTI_INPUT = "attn_unet_multi_input"


class LossKind(str, Enum):
    """Training loss selector."""

    DL = "dl"
    TL = "tl"
    FTL = "ftl"


class ExponentConvention(str, Enum):
    """Focal exponent convention."""

    AS_PRINTED = "as_printed"  # exponent 1/gamma
    DIRECT = "direct"  # exponent gamma


class Padding(str, Enum):
    """Convolution border handling."""

    SAME = "same"
    VALID = "valid"


class GradcheckScope(str, Enum):
    """Finite-difference suite selector."""

    LOSSES = "losses"
    GATE = "gate"
    MODEL = "model"


class Preset(str, Enum):
    """Synthetic dataset preset."""

    BUS_LIKE = "bus-like"
    ISIC_LIKE = "isic-like"
