"""U-Net variants with additive attention gates and deep supervision."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .enums import Padding
from .exceptions import ShapeError, ValidationError
from .models import ModelConfig
from .ops import avgpool2d, concat_channels, conv2d, maxpool2d, upsample_bilinear
from .rng import CounterRNG
from .tensor import Tensor, as_tensor, relu, sigmoid

logger = logging.getLogger(__name__)

GATE_FIELDS = ("W_x", "W_g", "b_g", "psi", "b_psi")


@dataclass
class AttentionGateParams:
    """1×1 transforms of one additive attention gate."""

    W_x: Tensor  # (C_int, C_x, 1, 1)
    W_g: Tensor  # (C_int, C_g, 1, 1)
    b_g: Tensor  # (C_int,)
    psi: Tensor  # (1, C_int, 1, 1)
    b_psi: Tensor  # (1,)

    def __post_init__(self) -> None:
        inter = self.W_x.shape[0]
        if self.W_x.shape[2:] != (1, 1) or self.W_g.shape[2:] != (1, 1):
            raise ShapeError("gate transforms must be 1×1 kernels")
        if self.W_g.shape[0] != inter or self.b_g.shape != (inter,):
            raise ShapeError(
                f"W_x, W_g and b_g disagree on intermediate channels: "
                f"{self.W_x.shape}, {self.W_g.shape}, {self.b_g.shape}"
            )
        if self.psi.shape != (1, inter, 1, 1) or self.b_psi.shape != (1,):
            raise ShapeError(
                f"psi must map {inter} channels to 1, got {self.psi.shape}, "
                f"{self.b_psi.shape}"
            )

    @classmethod
    def zeros(cls, x_channels: int, g_channels: int, inter: int) -> AttentionGateParams:
        return cls(
            W_x=Tensor.parameter(np.zeros((inter, x_channels, 1, 1))),
            W_g=Tensor.parameter(np.zeros((inter, g_channels, 1, 1))),
            b_g=Tensor.parameter(np.zeros(inter)),
            psi=Tensor.parameter(np.zeros((1, inter, 1, 1))),
            b_psi=Tensor.parameter(np.zeros(1)),
        )

    def tensors(self) -> dict[str, Tensor]:
        return {name: getattr(self, name) for name in GATE_FIELDS}


def attention_gate(
    x: Tensor, g: Tensor, params: AttentionGateParams
) -> tuple[Tensor, Tensor]:
    """Scale skip features `x` by coefficients computed with gating signal `g`.

    `g` comes from the next-coarser scale and is bilinearly upsampled to the
    resolution of `x` before the additive join. Returns the gated features and
    the N×1×H×W coefficients.
    """
    if x.ndim != 4 or g.ndim != 4:
        raise ShapeError(f"attention_gate: expected NCHW inputs, got {x.shape}, {g.shape}")
    n, _, h, w = x.shape
    gn, _, gh, gw = g.shape
    if gn != n or (h, w) != (2 * gh, 2 * gw):
        raise ShapeError(
            f"attention_gate: gating signal {g.shape} must be half the "
            f"resolution of the query {x.shape}"
        )
    g_up = upsample_bilinear(g, 2)
    joined = relu(conv2d(x, params.W_x) + conv2d(g_up, params.W_g, params.b_g))
    coefficients = sigmoid(conv2d(joined, params.psi, params.b_psi))
    return x * coefficients, coefficients


@dataclass
class ModelOutputs:
    """Probability maps ordered coarsest first; the last head is full resolution."""

    heads: list[Tensor]
    coefficients: dict[int, Tensor] = field(default_factory=dict)

    @property
    def final(self) -> Tensor:
        return self.heads[-1]


def stage_channels(cfg: ModelConfig) -> list[int]:
    return [cfg.base_channels * 2**k for k in range(cfg.depth)]


def head_scales(cfg: ModelConfig) -> list[int]:
    """Decoder scale index of each head, coarsest first."""
    if cfg.deep_supervision:
        return list(range(cfg.depth - 2, -1, -1))
    return [0]


def gate_scales(cfg: ModelConfig) -> list[int]:
    """Skip connections that are gated; the first skip never is."""
    return list(range(cfg.depth - 2, 0, -1)) if cfg.gated else []


def layer_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Ordered parameter names and shapes of a configuration."""
    ch = stage_channels(cfg)
    extra = cfg.input_channels if cfg.pyramid else 0
    shapes: dict[str, tuple[int, ...]] = {}

    def conv_block(prefix: str, c_in: int, c_out: int) -> None:
        shapes[f"{prefix}.conv1.weight"] = (c_out, c_in, 3, 3)
        shapes[f"{prefix}.conv1.bias"] = (c_out,)
        shapes[f"{prefix}.conv2.weight"] = (c_out, c_out, 3, 3)
        shapes[f"{prefix}.conv2.bias"] = (c_out,)

    for k in range(cfg.depth):
        c_in = cfg.input_channels if k == 0 else ch[k - 1] + extra
        conv_block(f"enc{k}", c_in, ch[k])
    for k in range(cfg.depth - 2, -1, -1):
        if k in gate_scales(cfg):
            inter = max(1, ch[k] // 2)
            shapes[f"gate{k}.W_x"] = (inter, ch[k], 1, 1)
            shapes[f"gate{k}.W_g"] = (inter, ch[k + 1], 1, 1)
            shapes[f"gate{k}.b_g"] = (inter,)
            shapes[f"gate{k}.psi"] = (1, inter, 1, 1)
            shapes[f"gate{k}.b_psi"] = (1,)
        conv_block(f"dec{k}", ch[k + 1] + ch[k], ch[k])
    for k in head_scales(cfg):
        shapes[f"head{k}.weight"] = (1, ch[k], 1, 1)
        shapes[f"head{k}.bias"] = (1,)
    return shapes


class Model:
    """Named parameters of one architecture plus its forward pass."""

    def __init__(self, config: ModelConfig, params: dict[str, Tensor]):
        expected = layer_shapes(config)
        actual = {name: t.shape for name, t in params.items()}
        if list(expected.items()) != list(actual.items()):
            raise ShapeError("parameters do not match the model configuration")
        self.config = config
        self.params = params

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def parameter_count(self) -> int:
        return sum(t.size for t in self.params.values())

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.zero_grad()

    def gate(self, scale: int) -> AttentionGateParams:
        return AttentionGateParams(
            **{name: self.params[f"gate{scale}.{name}"] for name in GATE_FIELDS}
        )

    @property
    def gates(self) -> dict[int, AttentionGateParams]:
        return {k: self.gate(k) for k in gate_scales(self.config)}

    def _conv_block(self, x: Tensor, prefix: str) -> Tensor:
        p = self.params
        for conv in ("conv1", "conv2"):
            x = relu(
                conv2d(
                    x,
                    p[f"{prefix}.{conv}.weight"],
                    p[f"{prefix}.{conv}.bias"],
                    Padding.SAME,
                )
            )
        return x

    def __call__(self, batch: Tensor | np.ndarray) -> ModelOutputs:
        return model_forward(self, batch)


def build_model(cfg: ModelConfig) -> Model:
    """Instantiate parameters: fan-in-scaled uniform weights, zero biases."""
    rng = CounterRNG(cfg.seed, "init")
    params: dict[str, Tensor] = {}
    for name, shape in layer_shapes(cfg).items():
        if len(shape) == 1:
            params[name] = Tensor.parameter(np.zeros(shape))
            continue
        fan_in = int(np.prod(shape[1:]))
        bound = np.sqrt(6.0 / fan_in)
        params[name] = Tensor.parameter(rng.uniform(-bound, bound, shape))
    model = Model(cfg, params)
    logger.debug(
        "built %s depth=%d base=%d with %d parameters",
        cfg.variant.value,
        cfg.depth,
        cfg.base_channels,
        model.parameter_count(),
    )
    return model


def check_input(cfg: ModelConfig, shape: tuple[int, ...]) -> None:
    """Reject inputs the model cannot consume."""
    if len(shape) != 4:
        raise ShapeError(f"model input must be N×C×H×W, got shape {shape}")
    _, c, h, w = shape
    if c != cfg.input_channels:
        raise ShapeError(f"model expects {cfg.input_channels} input channels, got {c}")
    multiple = cfg.spatial_multiple
    if h % multiple or w % multiple:
        raise ShapeError(
            f"input size {h}×{w} must be a multiple of {multiple} for depth {cfg.depth}"
        )


def model_forward(model: Model, batch: Tensor | np.ndarray) -> ModelOutputs:
    """Encoder → (gated) skips → decoder → sigmoid heads."""
    cfg = model.config
    x = as_tensor(batch)
    check_input(cfg, x.shape)

    pyramid = [x]
    if cfg.pyramid:
        for _ in range(1, cfg.depth):
            pyramid.append(avgpool2d(pyramid[-1]))

    skips: list[Tensor] = []
    h = x
    for k in range(cfg.depth):
        if k > 0:
            h = maxpool2d(h)
            if cfg.pyramid:
                h = concat_channels(h, pyramid[k])
        h = model._conv_block(h, f"enc{k}")
        skips.append(h)

    coefficients: dict[int, Tensor] = {}
    decoded: dict[int, Tensor] = {}
    d = skips[-1]
    for k in range(cfg.depth - 2, -1, -1):
        skip = skips[k]
        if k in gate_scales(cfg):
            skip, coefficients[k] = attention_gate(skip, d, model.gate(k))
        d = model._conv_block(concat_channels(upsample_bilinear(d, 2), skip), f"dec{k}")
        decoded[k] = d

    heads = [
        sigmoid(
            conv2d(
                decoded[k],
                model.params[f"head{k}.weight"],
                model.params[f"head{k}.bias"],
            )
        )
        for k in head_scales(cfg)
    ]
    return ModelOutputs(heads=heads, coefficients=coefficients)


def downsample_mask(mask: Tensor | np.ndarray, factor: int) -> Tensor:
    """Max-pool a binary N×1×H×W mask so any positive pixel survives."""
    data = mask.data if isinstance(mask, Tensor) else np.asarray(mask, dtype=np.float64)
    if not np.isin(data, (0.0, 1.0)).all():
        raise ValidationError("downsample_mask requires a binary mask")
    if factor < 1 or factor & (factor - 1):
        raise ValidationError(f"factor must be a power of 2, got {factor}")
    if data.ndim != 4:
        raise ShapeError(f"mask must be N×1×H×W, got shape {data.shape}")
    n, c, h, w = data.shape
    if h % factor or w % factor:
        raise ShapeError(f"factor {factor} does not divide mask size {h}×{w}")
    pooled = data.reshape(n, c, h // factor, factor, w // factor, factor).max(axis=(3, 5))
    return Tensor(pooled)


def head_targets(mask: Tensor | np.ndarray, head_count: int) -> list[Tensor]:
    """Targets for each head, coarsest first."""
    return [downsample_mask(mask, 2 ** (head_count - 1 - i)) for i in range(head_count)]
